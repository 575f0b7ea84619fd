#pragma once

// Uniform-grid trajectories.
//
// States are sampled at the nodes t_j = j*tau (N_t + 1 rows), ports and residuals
// at the midpoints t_{j+1/2} (N_t rows). All L2 pairings use the midpoint rule;
// node-sampled data enters a pairing through x_{j+1/2} = (x_j + x_{j+1}) / 2.

#include "prlm/error.hpp"
#include "prlm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace prlm {

class TimeGrid {
public:
    TimeGrid(double final_time, Index steps) : T_(final_time), steps_(steps) {
        detail::require(std::isfinite(final_time) && final_time > 0.0, ErrorCode::InvalidArgument,
                        "final time must be positive");
        detail::require(steps >= 1, ErrorCode::InvalidArgument, "step count must be >= 1");
    }

    double final_time() const { return T_; }
    Index steps() const { return steps_; }
    double tau() const { return T_ / static_cast<double>(steps_); }
    double node_time(Index j) const { return static_cast<double>(j) * tau(); }
    double mid_time(Index j) const { return (static_cast<double>(j) + 0.5) * tau(); }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
        return a.T_ == b.T_ && a.steps_ == b.steps_;
    }

private:
    double T_;
    Index steps_;
};

enum class Sampling { Node, Midpoint };

class GridTrajectory {
public:
    GridTrajectory(const TimeGrid& grid, Sampling sampling, Index dim)
        : grid_(grid), sampling_(sampling),
          values_(RowMatrix::Zero(sample_count(grid, sampling), dim)) {
        detail::require(dim >= 0, ErrorCode::DimensionMismatch, "negative dimension");
    }

    GridTrajectory(const TimeGrid& grid, Sampling sampling, RowMatrix values)
        : grid_(grid), sampling_(sampling), values_(std::move(values)) {
        detail::require(values_.rows() == sample_count(grid, sampling),
                        ErrorCode::DimensionMismatch, "row count does not match sampling");
    }

    static Index sample_count(const TimeGrid& grid, Sampling s) {
        return s == Sampling::Node ? grid.steps() + 1 : grid.steps();
    }

    const TimeGrid& grid() const { return grid_; }
    Sampling sampling() const { return sampling_; }
    Index dim() const { return values_.cols(); }
    Index samples() const { return values_.rows(); }
    double time(Index j) const {
        return sampling_ == Sampling::Node ? grid_.node_time(j) : grid_.mid_time(j);
    }

    const RowMatrix& values() const { return values_; }
    RowMatrix& values() { return values_; }

    auto row(Index j) { return values_.row(j); }
    auto row(Index j) const { return values_.row(j); }

private:
    TimeGrid grid_;
    Sampling sampling_;
    RowMatrix values_;
};

/// State trajectory (node-sampled) and internal input (midpoint-sampled).
struct TrajPair {
    GridTrajectory x;
    GridTrajectory u;
};

namespace detail {

inline void require_same_grid(const GridTrajectory& a, const GridTrajectory& b) {
    if (!(a.grid() == b.grid())) throw Error(ErrorCode::GridMismatch, "trajectories on different grids");
}

inline void require_weight(const Matrix& weight, Index dim) {
    if (weight.size() == 0) return;  // identity
    detail::require(weight.rows() == dim && weight.cols() == dim, ErrorCode::DimensionMismatch,
                    "weight size does not match trajectory dimension");
}

}  // namespace detail

/// Midpoint samples; node-sampled data is averaged over each step.
inline RowMatrix midpoint_values(const GridTrajectory& a) {
    if (a.sampling() == Sampling::Midpoint) return a.values();
    const Index nt = a.grid().steps();
    return 0.5 * (a.values().topRows(nt) + a.values().bottomRows(nt));
}

inline GridTrajectory to_midpoints(const GridTrajectory& a) {
    return GridTrajectory(a.grid(), Sampling::Midpoint, midpoint_values(a));
}

/// Per-step quadrature weights of the omega-weighted L2 norm.
///
/// The weight of step j is r^{j+1/2} with r = (1 - omega*tau) / (1 + omega*tau), the
/// implicit-midpoint propagator of exp(-2 omega t). It differs from exp(-2 omega t_{j+1/2})
/// by O(tau^2) and makes the discrete summation-by-parts estimate
///   sum_j r^{j+1/2} (a_{j+1} - a_j) >= omega * tau * sum_j r^{j+1/2} (a_j + a_{j+1})
/// hold exactly for a_0 = 0, a_j >= 0.
inline Vector omega_weights(const TimeGrid& grid, double omega) {
    if (!(omega >= 0.0)) throw Error(ErrorCode::NegativeOmega, "omega must be >= 0");
    const Index nt = grid.steps();
    if (omega == 0.0) return Vector::Ones(nt);
    const double a = omega * grid.tau();
    if (a >= 1.0) throw Error(ErrorCode::OmegaTooLarge, "omega * tau must be < 1");
    const double log_r = std::log1p(-a) - std::log1p(a);
    Vector w(nt);
    for (Index j = 0; j < nt; ++j) w(j) = std::exp((static_cast<double>(j) + 0.5) * log_r);
    return w;
}

/// tau * sum_j gamma_j <a_j, W b_j> over midpoint samples.
inline double weighted_inner(const GridTrajectory& a, const GridTrajectory& b, double omega,
                             const Matrix& weight = Matrix()) {
    detail::require_same_grid(a, b);
    detail::require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "dimension mismatch");
    detail::require_weight(weight, a.dim());
    const Vector gamma = omega_weights(a.grid(), omega);
    const RowMatrix am = midpoint_values(a);
    const RowMatrix bm = midpoint_values(b);
    double s = 0.0;
    if (weight.size() == 0) {
        for (Index j = 0; j < am.rows(); ++j) s += gamma(j) * am.row(j).dot(bm.row(j));
    } else {
        const RowMatrix bw = bm * weight.transpose();
        for (Index j = 0; j < am.rows(); ++j) s += gamma(j) * am.row(j).dot(bw.row(j));
    }
    return a.grid().tau() * s;
}

inline double l2_inner(const GridTrajectory& a, const GridTrajectory& b,
                       const Matrix& weight = Matrix()) {
    return weighted_inner(a, b, 0.0, weight);
}

inline double weighted_norm_sq(const GridTrajectory& a, double omega, const Matrix& weight = Matrix()) {
    return weighted_inner(a, a, omega, weight);
}

inline double weighted_norm(const GridTrajectory& a, double omega, const Matrix& weight = Matrix()) {
    return std::sqrt(std::max(0.0, weighted_norm_sq(a, omega, weight)));
}

inline double l2_norm(const GridTrajectory& a, const Matrix& weight = Matrix()) {
    return weighted_norm(a, 0.0, weight);
}

inline double sup_norm(const GridTrajectory& x, const Matrix& weight = Matrix()) {
    if (x.sampling() != Sampling::Node) {
        throw Error(ErrorCode::SamplingMismatch, "sup norm is taken over node samples");
    }
    detail::require_weight(weight, x.dim());
    double best = 0.0;
    for (Index j = 0; j < x.samples(); ++j) {
        const auto r = x.row(j);
        const double v = weight.size() == 0 ? r.squaredNorm() : r.dot(r * weight.transpose());
        best = std::max(best, v);
    }
    return std::sqrt(best);
}

inline GridTrajectory lincomb(double alpha, const GridTrajectory& a, double beta,
                              const GridTrajectory& b) {
    detail::require_same_grid(a, b);
    if (a.sampling() != b.sampling()) throw Error(ErrorCode::SamplingMismatch, "sampling differs");
    detail::require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "dimension mismatch");
    return GridTrajectory(a.grid(), a.sampling(), RowMatrix(alpha * a.values() + beta * b.values()));
}

/// CSV with header `t,v0,...,v{dim-1}`, one row per sample time, 17 significant digits.
inline void write_csv(std::ostream& os, const GridTrajectory& a) {
    os << "t";
    for (Index c = 0; c < a.dim(); ++c) os << ",v" << c;
    os << "\n";
    os << std::setprecision(17);
    for (Index j = 0; j < a.samples(); ++j) {
        os << a.time(j);
        for (Index c = 0; c < a.dim(); ++c) os << "," << a.values()(j, c);
        os << "\n";
    }
}

/// Inverse of write_csv; the grid and sampling must be supplied by the caller.
inline GridTrajectory read_csv(std::istream& is, const TimeGrid& grid, Sampling sampling) {
    std::string line;
    if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "missing CSV header");
    const Index dim = static_cast<Index>(std::count(line.begin(), line.end(), ','));
    std::vector<double> vals;
    Index rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Index col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col > 0) vals.push_back(std::stod(cell));
            ++col;
        }
        if (col != dim + 1) throw Error(ErrorCode::ParseError, "ragged CSV row", static_cast<std::size_t>(rows + 2));
        ++rows;
    }
    RowMatrix m(rows, dim);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < dim; ++c) m(r, c) = vals[static_cast<std::size_t>(r * dim + c)];
    return GridTrajectory(grid, sampling, std::move(m));
}

}  // namespace prlm
