#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace roughlab {

enum class PathKind { discrete, continuous_grid };

/// A finite d-dimensional series. Discrete paths have unit step; grid paths
/// hold a piecewise-constant integrand on [k dt, (k+1) dt). `time_scale` is
/// the N used when normalizing signatures.
class PathSample {
public:
    PathSample() = default;

    PathSample(std::size_t dim, std::vector<double> values, PathKind kind = PathKind::discrete,
               double dt = 1.0, double time_scale = 1.0)
        : dim_(dim), values_(std::move(values)), kind_(kind), dt_(dt), time_scale_(time_scale) {
        if (dim_ == 0) throw std::invalid_argument("PathSample: dim must be positive");
        if (values_.size() % dim_ != 0) {
            throw std::invalid_argument("PathSample: value count is not a multiple of dim");
        }
        if (kind_ == PathKind::discrete) dt_ = 1.0;
        if (!(dt_ > 0.0)) throw std::invalid_argument("PathSample: dt must be positive");
        if (!(time_scale_ > 0.0)) throw std::invalid_argument("PathSample: time scale must be positive");
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size() / dim_; }
    [[nodiscard]] PathKind kind() const noexcept { return kind_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] double time_scale() const noexcept { return time_scale_; }
    [[nodiscard]] double horizon() const noexcept { return static_cast<double>(size()) * dt_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    [[nodiscard]] std::span<const double> row(std::size_t k) const {
        if (k >= size()) throw std::out_of_range("PathSample: row index out of range");
        return {values_.data() + k * dim_, dim_};
    }
    [[nodiscard]] double operator()(std::size_t k, std::size_t i) const { return values_[k * dim_ + i]; }

    void set_time_scale(double n) {
        if (!(n > 0.0)) throw std::invalid_argument("PathSample: time scale must be positive");
        time_scale_ = n;
    }

private:
    std::size_t dim_ = 1;
    std::vector<double> values_;
    PathKind kind_ = PathKind::discrete;
    double dt_ = 1.0;
    double time_scale_ = 1.0;
};

/// Piecewise-constant embedding of a discrete series: xi(t) = x([t]) on a grid
/// with `substeps` cells per unit time.
[[nodiscard]] inline PathSample embed_continuous(const PathSample& xs, std::size_t substeps) {
    if (xs.kind() != PathKind::discrete) throw std::invalid_argument("embed_continuous: path must be discrete");
    if (substeps == 0) throw std::invalid_argument("embed_continuous: substeps must be positive");
    std::vector<double> out;
    out.reserve(xs.values().size() * substeps);
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto r = xs.row(k);
        for (std::size_t s = 0; s < substeps; ++s) out.insert(out.end(), r.begin(), r.end());
    }
    return {xs.dim(), std::move(out), PathKind::continuous_grid, 1.0 / static_cast<double>(substeps),
            xs.time_scale()};
}

/// Cell k of a window together with its overlap weight.
struct WindowCell {
    std::size_t index;
    double weight;
};

/// Cells covering the process-time window [u0, u1]. Discrete paths use the
/// floor convention [u0] <= k < [u1] with unit weights; grid paths use the
/// exact overlap of each cell with the window.
[[nodiscard]] inline std::vector<WindowCell> window_cells(const PathSample& xs, double u0, double u1) {
    if (!(u0 >= 0.0) || u1 < u0) throw std::invalid_argument("window: need 0 <= s <= t");
    std::vector<WindowCell> cells;
    if (xs.kind() == PathKind::discrete) {
        const auto a = static_cast<std::size_t>(std::floor(u0 + 1e-9));
        const auto b = static_cast<std::size_t>(std::floor(u1 + 1e-9));
        if (b > xs.size()) throw std::invalid_argument("window: extends past the end of the sample");
        cells.reserve(b > a ? b - a : 0);
        for (std::size_t k = a; k < b; ++k) cells.push_back({k, 1.0});
        return cells;
    }
    const double dt = xs.dt();
    const double horizon = xs.horizon();
    if (u1 > horizon * (1.0 + 1e-12) + 1e-12) {
        throw std::invalid_argument("window: extends past the end of the sample");
    }
    u1 = std::min(u1, horizon);
    if (u1 <= u0) return cells;
    auto first = static_cast<std::size_t>(std::floor(u0 / dt));
    auto last = static_cast<std::size_t>(std::ceil(u1 / dt));
    last = std::min(last, xs.size());
    for (std::size_t k = first; k < last; ++k) {
        const double lo = std::max(u0, static_cast<double>(k) * dt);
        const double hi = std::min(u1, static_cast<double>(k + 1) * dt);
        if (hi > lo) cells.push_back({k, hi - lo});
    }
    return cells;
}

}  // namespace roughlab
