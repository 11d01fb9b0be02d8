#pragma once

// Iterated sums and integrals of sampled paths, normalized as
// S_N^(nu)(s,t) = N^(-nu/2) Sigma^(nu)(sN, tN).

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "roughlab/path.hpp"
#include "roughlab/tensor_algebra.hpp"

namespace roughlab {

struct SignatureIncrement {
    double s = 0.0;
    double t = 0.0;
    TruncatedTensor tensor;
};

/// Unnormalized signatures of every prefix, stored flat. Entry k is the
/// signature over the first k cells, so entry 0 is the identity.
class PrefixSignature {
public:
    PrefixSignature() = default;

    PrefixSignature(const PathSample& xs, std::size_t depth)
        : dim_(xs.dim()), depth_(depth), steps_(xs.size()), stride_(detail::flat_size(xs.dim(), depth)),
          dt_(xs.dt()), time_scale_(xs.time_scale()) {
        if (depth == 0 || depth > kMaxDepth) throw std::invalid_argument("PrefixSignature: bad depth");
        data_.assign((steps_ + 1) * stride_, 0.0);
        data_[0] = 1.0;
        std::vector<double> inc(dim_);
        for (std::size_t k = 0; k < steps_; ++k) {
            double* cur = data_.data() + (k + 1) * stride_;
            std::copy_n(data_.data() + k * stride_, stride_, cur);
            const auto r = xs.row(k);
            for (std::size_t i = 0; i < dim_; ++i) inc[i] = r[i] * dt_;
            detail::mul_step(cur, inc.data(), dim_, depth_);
        }
    }

    /// Wraps an existing flat table of (steps + 1) group-like elements.
    [[nodiscard]] static PrefixSignature from_table(std::size_t dim, std::size_t depth, std::size_t steps, double dt,
                                                    double time_scale, std::vector<double> data) {
        PrefixSignature p;
        p.dim_ = dim;
        p.depth_ = depth;
        p.steps_ = steps;
        p.stride_ = detail::flat_size(dim, depth);
        p.dt_ = dt;
        p.time_scale_ = time_scale;
        if (data.size() != (steps + 1) * p.stride_) throw std::invalid_argument("PrefixSignature: table size mismatch");
        p.data_ = std::move(data);
        return p;
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t depth() const noexcept { return depth_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] double time_scale() const noexcept { return time_scale_; }

    [[nodiscard]] std::span<const double> flat(std::size_t k) const {
        if (k > steps_) throw std::out_of_range("PrefixSignature: index out of range");
        return {data_.data() + k * stride_, stride_};
    }

    [[nodiscard]] TruncatedTensor at(std::size_t k) const {
        return TruncatedTensor::from_flat(dim_, depth_, flat(k));
    }

    /// Unnormalized increment over cells [k0, k1), via prefix(k0)^{-1} (x) prefix(k1).
    [[nodiscard]] TruncatedTensor increment(std::size_t k0, std::size_t k1) const {
        if (k0 > k1 || k1 > steps_) throw std::invalid_argument("PrefixSignature: bad index window");
        std::vector<double> inv(stride_), out(stride_);
        detail::inverse_flat(flat(k0).data(), inv.data(), dim_, depth_);
        detail::chen_flat(inv.data(), flat(k1).data(), out.data(), dim_, depth_);
        return TruncatedTensor::from_flat(dim_, depth_, out);
    }

    /// Increment over [k0, k1) normalized by the stored time scale.
    [[nodiscard]] TruncatedTensor normalized_increment(std::size_t k0, std::size_t k1) const {
        return increment(k0, k1).dilate(1.0 / std::sqrt(time_scale_));
    }

    /// Level-1 increment (unnormalized) written to `out` (length d).
    void level1(std::size_t k0, std::size_t k1, double* out) const {
        const double* a = data_.data() + k0 * stride_ + 1;
        const double* b = data_.data() + k1 * stride_ + 1;
        for (std::size_t i = 0; i < dim_; ++i) out[i] = b[i] - a[i];
    }

    /// Level-2 increment (unnormalized) written to `out` (length d*d):
    /// P2(k1) - P2(k0) - P1(k0) (x) (P1(k1) - P1(k0)).
    void level2(std::size_t k0, std::size_t k1, double* out) const {
        if (depth_ < 2) throw std::logic_error("PrefixSignature: depth < 2");
        const double* a = data_.data() + k0 * stride_;
        const double* b = data_.data() + k1 * stride_;
        const std::size_t o2 = 1 + dim_;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                const std::size_t w = i * dim_ + j;
                out[w] = b[o2 + w] - a[o2 + w] - a[1 + i] * (b[1 + j] - a[1 + j]);
            }
        }
    }

private:
    std::size_t dim_ = 1;
    std::size_t depth_ = 1;
    std::size_t steps_ = 0;
    std::size_t stride_ = 0;
    double dt_ = 1.0;
    double time_scale_ = 1.0;
    std::vector<double> data_;
};

/// Prefix signatures Sigma(0,k), k = 0..n, of a discrete path.
[[nodiscard]] inline std::vector<TruncatedTensor> iterated_sum_prefix(const PathSample& xs, std::size_t depth) {
    if (xs.kind() != PathKind::discrete) throw std::invalid_argument("iterated_sum_prefix: path must be discrete");
    const PrefixSignature table(xs, depth);
    std::vector<TruncatedTensor> out;
    out.reserve(table.steps() + 1);
    for (std::size_t k = 0; k <= table.steps(); ++k) out.push_back(table.at(k));
    return out;
}

namespace detail {

// Product of step elements (1 + x_k w_k) over cells[lo, hi), combined as a
// balanced tree so rounding error grows with log n rather than n.
inline void window_product(const PathSample& xs, std::span<const WindowCell> cells, std::size_t depth,
                           double* out) {
    const std::size_t dim = xs.dim();
    const std::size_t size = flat_size(dim, depth);
    constexpr std::size_t kLeaf = 32;
    if (cells.size() <= kLeaf) {
        std::fill_n(out, size, 0.0);
        out[0] = 1.0;
        std::vector<double> inc(dim);
        for (const auto& c : cells) {
            const auto r = xs.row(c.index);
            for (std::size_t i = 0; i < dim; ++i) inc[i] = r[i] * c.weight;
            mul_step(out, inc.data(), dim, depth);
        }
        return;
    }
    const std::size_t mid = cells.size() / 2;
    std::vector<double> left(size), right(size);
    window_product(xs, cells.first(mid), depth, left.data());
    window_product(xs, cells.subspan(mid), depth, right.data());
    chen_flat(left.data(), right.data(), out, dim, depth);
}

}  // namespace detail

/// Unnormalized signature over the process-time window [u0, u1].
[[nodiscard]] inline TruncatedTensor window_signature(const PathSample& xs, double u0, double u1,
                                                      std::size_t depth) {
    const auto cells = window_cells(xs, u0, u1);
    std::vector<double> out(detail::flat_size(xs.dim(), depth));
    detail::window_product(xs, cells, depth, out.data());
    return TruncatedTensor::from_flat(xs.dim(), depth, out);
}

/// S_N(s,t): window [sN, tN] of the path, level nu scaled by N^(-nu/2).
[[nodiscard]] inline SignatureIncrement signature_increment(const PathSample& xs, double s, double t,
                                                            std::size_t depth, double n_scale) {
    if (!(n_scale > 0.0)) throw std::invalid_argument("signature_increment: N must be positive");
    if (s < 0.0 || t < s) throw std::invalid_argument("signature_increment: need 0 <= s <= t");
    auto tensor = window_signature(xs, s * n_scale, t * n_scale, depth);
    tensor.dilate(1.0 / std::sqrt(n_scale));
    return {s, t, std::move(tensor)};
}

[[nodiscard]] inline SignatureIncrement signature_increment(const PathSample& xs, double s, double t,
                                                            std::size_t depth) {
    return signature_increment(xs, s, t, depth, xs.time_scale());
}

/// Direct enumeration of strictly increasing index tuples over cells
/// [k0, k1). Unnormalized; used as an oracle for the recurrences.
[[nodiscard]] inline TruncatedTensor brute_force_signature(const PathSample& xs, std::size_t k0, std::size_t k1,
                                                           std::size_t depth) {
    if (xs.kind() != PathKind::discrete) throw std::invalid_argument("brute_force_signature: path must be discrete");
    if (k0 > k1 || k1 > xs.size()) throw std::invalid_argument("brute_force_signature: bad window");
    if (k1 - k0 > 14 || depth > 4) {
        throw std::invalid_argument("brute_force_signature: window > 14 or depth > 4 exceeds the guard");
    }
    const std::size_t d = xs.dim();
    auto out = TruncatedTensor::identity(d, depth);
    for (std::size_t nu = 1; nu <= depth; ++nu) {
        auto& lvl = out.level(nu);
        std::vector<std::size_t> idx(nu);
        std::vector<std::size_t> word(nu);
        // Odometer over k0 <= idx[0] < ... < idx[nu-1] < k1.
        if (k1 - k0 < nu) continue;
        for (std::size_t j = 0; j < nu; ++j) idx[j] = k0 + j;
        while (true) {
            for (std::size_t w = 0; w < lvl.size(); ++w) {
                std::size_t rem = w;
                double prod = 1.0;
                for (std::size_t j = nu; j-- > 0;) {
                    prod *= xs(idx[j], rem % d);
                    rem /= d;
                }
                lvl[w] += prod;
            }
            std::size_t j = nu;
            while (j > 0 && idx[j - 1] == k1 - (nu - j) - 1) --j;
            if (j == 0) break;
            ++idx[j - 1];
            for (std::size_t q = j; q < nu; ++q) idx[q] = idx[q - 1] + 1;
        }
    }
    return out;
}

}  // namespace roughlab
