#pragma once

// Truncated tensor algebra over R^d: dense per-level storage, the tensor
// product between levels, and the Chen (concatenation) product of
// multiplicative functionals.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace roughlab {

/// Largest truncation depth accepted anywhere in the library.
inline constexpr std::size_t kMaxDepth = 8;

namespace detail {

inline std::size_t checked_pow(std::size_t base, std::size_t exp) {
    std::size_t out = 1;
    for (std::size_t k = 0; k < exp; ++k) {
        if (base != 0 && out > (std::size_t{1} << 40) / base) {
            throw std::invalid_argument("tensor level too large: d^nu overflows the size guard");
        }
        out *= base;
    }
    return out;
}

/// Offset of level `order` inside the flat layout [level 0 | level 1 | ...].
inline std::size_t level_offset(std::size_t dim, std::size_t order) {
    std::size_t off = 0;
    std::size_t len = 1;
    for (std::size_t k = 0; k < order; ++k) {
        off += len;
        len *= dim;
    }
    return off;
}

inline std::size_t flat_size(std::size_t dim, std::size_t depth) {
    return level_offset(dim, depth + 1);
}

// The kernels below operate on the flat layout. They are the hot loops of
// prefix tables, Euler rough paths and Chen products.

/// x <- x (x) (1 + inc), inc a level-1 vector. Adds one strictly later index
/// to every iterated sum.
inline void mul_step(double* x, const double* inc, std::size_t dim, std::size_t depth) {
    for (std::size_t nu = depth; nu >= 1; --nu) {
        double* hi = x + level_offset(dim, nu);
        const double* lo = x + level_offset(dim, nu - 1);
        const std::size_t lo_len = level_offset(dim, nu) - level_offset(dim, nu - 1);
        for (std::size_t a = 0; a < lo_len; ++a) {
            const double la = lo[a];
            if (la == 0.0) continue;
            double* dst = hi + a * dim;
            for (std::size_t j = 0; j < dim; ++j) dst[j] += la * inc[j];
        }
    }
}

/// x <- x (x) (1 + dw + drift), drift a level-2 tensor (d*d, row-major).
inline void mul_euler_step(double* x, const double* dw, const double* drift, std::size_t dim,
                           std::size_t depth) {
    const std::size_t d2 = dim * dim;
    for (std::size_t nu = depth; nu >= 1; --nu) {
        double* hi = x + level_offset(dim, nu);
        const double* lo1 = x + level_offset(dim, nu - 1);
        const std::size_t len1 = level_offset(dim, nu) - level_offset(dim, nu - 1);
        for (std::size_t a = 0; a < len1; ++a) {
            const double la = lo1[a];
            if (la == 0.0) continue;
            double* dst = hi + a * dim;
            for (std::size_t j = 0; j < dim; ++j) dst[j] += la * dw[j];
        }
        if (nu >= 2 && drift != nullptr) {
            const double* lo2 = x + level_offset(dim, nu - 2);
            const std::size_t len2 = level_offset(dim, nu - 1) - level_offset(dim, nu - 2);
            for (std::size_t a = 0; a < len2; ++a) {
                const double la = lo2[a];
                if (la == 0.0) continue;
                double* dst = hi + a * d2;
                for (std::size_t j = 0; j < d2; ++j) dst[j] += la * drift[j];
            }
        }
    }
}

/// out = x (x) y in the truncated algebra. `out` must not alias x or y.
inline void chen_flat(const double* x, const double* y, double* out, std::size_t dim,
                      std::size_t depth) {
    for (std::size_t m = 0; m <= depth; ++m) {
        double* dst = out + level_offset(dim, m);
        const std::size_t len_m = level_offset(dim, m + 1) - level_offset(dim, m);
        for (std::size_t j = 0; j < len_m; ++j) dst[j] = 0.0;
        for (std::size_t k = 0; k <= m; ++k) {
            const double* xa = x + level_offset(dim, k);
            const double* yb = y + level_offset(dim, m - k);
            const std::size_t len_a = level_offset(dim, k + 1) - level_offset(dim, k);
            const std::size_t len_b = level_offset(dim, m - k + 1) - level_offset(dim, m - k);
            for (std::size_t a = 0; a < len_a; ++a) {
                const double va = xa[a];
                if (va == 0.0) continue;
                double* row = dst + a * len_b;
                for (std::size_t b = 0; b < len_b; ++b) row[b] += va * yb[b];
            }
        }
    }
}

/// out = x^{-1} for x with level 0 equal to 1. `out` must not alias x.
inline void inverse_flat(const double* x, double* out, std::size_t dim, std::size_t depth) {
    // inv^(m) = -sum_{k=1}^{m} x^(k) (x) inv^(m-k)
    out[0] = 1.0;
    for (std::size_t m = 1; m <= depth; ++m) {
        double* dst = out + level_offset(dim, m);
        const std::size_t len_m = level_offset(dim, m + 1) - level_offset(dim, m);
        for (std::size_t j = 0; j < len_m; ++j) dst[j] = 0.0;
        for (std::size_t k = 1; k <= m; ++k) {
            const double* xa = x + level_offset(dim, k);
            const double* ib = out + level_offset(dim, m - k);
            const std::size_t len_a = level_offset(dim, k + 1) - level_offset(dim, k);
            const std::size_t len_b = level_offset(dim, m - k + 1) - level_offset(dim, m - k);
            for (std::size_t a = 0; a < len_a; ++a) {
                const double va = xa[a];
                if (va == 0.0) continue;
                double* row = dst + a * len_b;
                for (std::size_t b = 0; b < len_b; ++b) row[b] -= va * ib[b];
            }
        }
    }
}

}  // namespace detail

/// One homogeneous level (R^d)^{(x) order}. Coefficients are stored densely
/// in row-major word order: word (i_1, ..., i_nu) with 0-based letters maps to
/// offset sum_k i_k d^(nu-k).
class TensorLevel {
public:
    TensorLevel() = default;

    TensorLevel(std::size_t dim, std::size_t order)
        : dim_(dim), order_(order), coeffs_(detail::checked_pow(dim, order), 0.0) {
        if (dim == 0) throw std::invalid_argument("TensorLevel: dim must be positive");
    }

    TensorLevel(std::size_t dim, std::size_t order, std::vector<double> coeffs)
        : dim_(dim), order_(order), coeffs_(std::move(coeffs)) {
        if (dim == 0) throw std::invalid_argument("TensorLevel: dim must be positive");
        if (coeffs_.size() != detail::checked_pow(dim, order)) {
            throw std::invalid_argument("TensorLevel: coefficient count must equal d^order");
        }
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t order() const noexcept { return order_; }
    [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }
    [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }
    [[nodiscard]] std::span<double> coeffs() noexcept { return coeffs_; }

    double& operator[](std::size_t i) { return coeffs_[i]; }
    double operator[](std::size_t i) const { return coeffs_[i]; }

    [[nodiscard]] std::size_t offset(std::span<const std::size_t> word) const {
        if (word.size() != order_) throw std::invalid_argument("TensorLevel: word length != order");
        std::size_t off = 0;
        for (std::size_t letter : word) {
            if (letter >= dim_) throw std::out_of_range("TensorLevel: letter out of range");
            off = off * dim_ + letter;
        }
        return off;
    }

    [[nodiscard]] std::vector<std::size_t> word(std::size_t offset) const {
        if (offset >= coeffs_.size()) throw std::out_of_range("TensorLevel: offset out of range");
        std::vector<std::size_t> w(order_);
        for (std::size_t k = order_; k-- > 0;) {
            w[k] = offset % dim_;
            offset /= dim_;
        }
        return w;
    }

    [[nodiscard]] double at(std::span<const std::size_t> word) const { return coeffs_[offset(word)]; }

    TensorLevel& operator+=(const TensorLevel& other) {
        require_same_shape(other);
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
        return *this;
    }
    TensorLevel& operator-=(const TensorLevel& other) {
        require_same_shape(other);
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
        return *this;
    }
    TensorLevel& operator*=(double c) {
        for (double& v : coeffs_) v *= c;
        return *this;
    }

    friend TensorLevel operator+(TensorLevel a, const TensorLevel& b) { return a += b; }
    friend TensorLevel operator-(TensorLevel a, const TensorLevel& b) { return a -= b; }
    friend TensorLevel operator*(TensorLevel a, double c) { return a *= c; }
    friend TensorLevel operator*(double c, TensorLevel a) { return a *= c; }

private:
    void require_same_shape(const TensorLevel& other) const {
        if (other.dim_ != dim_ || other.order_ != order_) {
            throw std::invalid_argument("TensorLevel: shape mismatch");
        }
    }

    std::size_t dim_ = 1;
    std::size_t order_ = 0;
    std::vector<double> coeffs_ = std::vector<double>(1, 0.0);
};

/// a (x) b, order k + m. Coefficient of the concatenated word (w1, w2) is a[w1] * b[w2].
[[nodiscard]] inline TensorLevel tensor_product(const TensorLevel& a, const TensorLevel& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("tensor_product: dimension mismatch");
    TensorLevel out(a.dim(), a.order() + b.order());
    const auto ca = a.coeffs();
    const auto cb = b.coeffs();
    for (std::size_t i = 0; i < ca.size(); ++i) {
        for (std::size_t j = 0; j < cb.size(); ++j) out[i * cb.size() + j] = ca[i] * cb[j];
    }
    return out;
}

/// Euclidean norm of the coefficient array. It is a cross norm:
/// |a (x) b| = |a| |b|.
[[nodiscard]] inline double level_norm(const TensorLevel& a) {
    double s = 0.0;
    for (double v : a.coeffs()) s += v * v;
    return std::sqrt(s);
}

/// Element of the truncated tensor algebra T^L(R^d): levels 0..L.
class TruncatedTensor {
public:
    TruncatedTensor() : levels_{TensorLevel(1, 0)} {}

    /// Zero element (level 0 included).
    TruncatedTensor(std::size_t dim, std::size_t depth) : dim_(dim), depth_(depth) {
        check_shape(dim, depth);
        levels_.reserve(depth + 1);
        for (std::size_t nu = 0; nu <= depth; ++nu) levels_.emplace_back(dim, nu);
    }

    [[nodiscard]] static TruncatedTensor identity(std::size_t dim, std::size_t depth) {
        TruncatedTensor t(dim, depth);
        t.levels_[0][0] = 1.0;
        return t;
    }

    [[nodiscard]] static TruncatedTensor from_levels(std::vector<TensorLevel> levels) {
        if (levels.empty()) throw std::invalid_argument("TruncatedTensor: no levels");
        const std::size_t dim = levels.front().dim();
        const std::size_t depth = levels.size() - 1;
        check_shape(dim, depth);
        for (std::size_t nu = 0; nu < levels.size(); ++nu) {
            if (levels[nu].dim() != dim || levels[nu].order() != nu) {
                throw std::invalid_argument("TruncatedTensor: level " + std::to_string(nu) +
                                            " has the wrong shape");
            }
        }
        TruncatedTensor t;
        t.dim_ = dim;
        t.depth_ = depth;
        t.levels_ = std::move(levels);
        return t;
    }

    [[nodiscard]] static TruncatedTensor from_flat(std::size_t dim, std::size_t depth,
                                                   std::span<const double> flat) {
        check_shape(dim, depth);
        if (flat.size() != detail::flat_size(dim, depth)) {
            throw std::invalid_argument("TruncatedTensor: flat buffer has the wrong size");
        }
        TruncatedTensor t(dim, depth);
        for (std::size_t nu = 0; nu <= depth; ++nu) {
            const std::size_t off = detail::level_offset(dim, nu);
            auto c = t.levels_[nu].coeffs();
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = flat[off + i];
        }
        return t;
    }

    [[nodiscard]] std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(detail::flat_size(dim_, depth_));
        for (const auto& lvl : levels_) out.insert(out.end(), lvl.coeffs().begin(), lvl.coeffs().end());
        return out;
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t depth() const noexcept { return depth_; }
    [[nodiscard]] const TensorLevel& level(std::size_t nu) const { return levels_.at(nu); }
    [[nodiscard]] TensorLevel& level(std::size_t nu) { return levels_.at(nu); }
    [[nodiscard]] const std::vector<TensorLevel>& levels() const noexcept { return levels_; }

    [[nodiscard]] bool is_group_like(double tol = 1e-12) const {
        return std::abs(levels_[0][0] - 1.0) <= tol;
    }

    /// Multiply level nu by c^nu (the dilation delta_c).
    TruncatedTensor& dilate(double c) {
        double f = 1.0;
        for (auto& lvl : levels_) {
            lvl *= f;
            f *= c;
        }
        return *this;
    }

private:
    static void check_shape(std::size_t dim, std::size_t depth) {
        if (dim == 0) throw std::invalid_argument("TruncatedTensor: dim must be positive");
        if (depth == 0 || depth > kMaxDepth) {
            throw std::invalid_argument("TruncatedTensor: depth must lie in 1.." +
                                        std::to_string(kMaxDepth));
        }
    }

    std::size_t dim_ = 1;
    std::size_t depth_ = 0;
    std::vector<TensorLevel> levels_;
};

/// Chen product: increment over [s,t] from increments over [s,u] and [u,t].
[[nodiscard]] inline TruncatedTensor chen_concat(const TruncatedTensor& x, const TruncatedTensor& y) {
    if (x.dim() != y.dim()) throw std::invalid_argument("chen_concat: dimension mismatch");
    if (x.depth() != y.depth()) throw std::invalid_argument("chen_concat: depth mismatch");
    if (!x.is_group_like() || !y.is_group_like()) {
        throw std::invalid_argument("chen_concat: inputs must have level 0 equal to 1");
    }
    const auto fx = x.flatten();
    const auto fy = y.flatten();
    std::vector<double> out(fx.size());
    detail::chen_flat(fx.data(), fy.data(), out.data(), x.dim(), x.depth());
    return TruncatedTensor::from_flat(x.dim(), x.depth(), out);
}

/// Group inverse of an element with level 0 equal to 1.
[[nodiscard]] inline TruncatedTensor inverse(const TruncatedTensor& x) {
    if (!x.is_group_like()) throw std::invalid_argument("inverse: level 0 must equal 1");
    const auto fx = x.flatten();
    std::vector<double> out(fx.size());
    detail::inverse_flat(fx.data(), out.data(), x.dim(), x.depth());
    return TruncatedTensor::from_flat(x.dim(), x.depth(), out);
}

/// Largest per-level Euclidean distance between two tensors of the same shape.
[[nodiscard]] inline double max_level_distance(const TruncatedTensor& a, const TruncatedTensor& b) {
    if (a.dim() != b.dim() || a.depth() != b.depth()) {
        throw std::invalid_argument("max_level_distance: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t nu = 0; nu <= a.depth(); ++nu) {
        worst = std::max(worst, level_norm(a.level(nu) - b.level(nu)));
    }
    return worst;
}

// JSON: {"dim": d, "depth": L, "levels": [[...], ...]} with flat row-major
// coefficient arrays, level 0 included.

inline void to_json(nlohmann::json& j, const TruncatedTensor& t) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& lvl : t.levels()) {
        levels.push_back(std::vector<double>(lvl.coeffs().begin(), lvl.coeffs().end()));
    }
    j = nlohmann::json{{"dim", t.dim()}, {"depth", t.depth()}, {"levels", std::move(levels)}};
}

inline void from_json(const nlohmann::json& j, TruncatedTensor& t) {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto depth = j.at("depth").get<std::size_t>();
    const auto& levels = j.at("levels");
    if (!levels.is_array() || levels.size() != depth + 1) {
        throw std::invalid_argument("tensor JSON: expected depth + 1 levels");
    }
    std::vector<TensorLevel> out;
    out.reserve(depth + 1);
    for (std::size_t nu = 0; nu <= depth; ++nu) {
        out.emplace_back(dim, nu, levels[nu].get<std::vector<double>>());
    }
    t = TruncatedTensor::from_levels(std::move(out));
}

}  // namespace roughlab
