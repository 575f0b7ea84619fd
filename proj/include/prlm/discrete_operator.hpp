#pragma once

// Time-discrete operators of the splitting.
//
// The Hilbert space is midpoint-sampled (x_{j+1/2}, u_{j+1/2}) with inner product
//   <a, b>_omega = tau * sum_j gamma_j (a_x^T H b_x + a_u^T b_u).
// A TrajPair enters through its midpoint average; its node row 0 is pinned to x0, so
// the map between node values and midpoint values is one-to-one.
//
// Implicit midpoint (Crank-Nicolson) discretization of
//   M(x, u) = ( x' - A x - B_ext v - B_int u ,  C_int x + D_21 v + D_22 u )
//   N(x, u) = ( 0, -N_c u ).

#include "prlm/error.hpp"
#include "prlm/linalg.hpp"
#include "prlm/system_node.hpp"
#include "prlm/trajectory.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace prlm {

/// Image of M (w: state residual, z: internal output); also the generic element of
/// the midpoint Hilbert space (shadow iterates live here).
struct OperatorImage {
    GridTrajectory w;
    GridTrajectory z;
};

class CoupledProblem {
public:
    /// Composes `components` block-diagonally and validates every certificate:
    /// dissipative node, monotone coupling, consistent data.
    CoupledProblem(std::vector<SystemNode> components, CouplingOperator coupling, TimeGrid grid,
                   Vector x0, GridTrajectory u_ext)
        : CoupledProblem(std::move(components), std::move(coupling), grid, std::move(x0),
                         std::move(u_ext), true) {}

    /// Same data, certificates skipped. Only for diagnostics on non-passive data.
    static CoupledProblem unchecked(std::vector<SystemNode> components, CouplingOperator coupling,
                                    TimeGrid grid, Vector x0, GridTrajectory u_ext) {
        return CoupledProblem(std::move(components), std::move(coupling), grid, std::move(x0),
                              std::move(u_ext), false);
    }

    const SystemNode& node() const { return node_; }
    const std::vector<SystemNode>& components() const { return components_; }
    const std::vector<ComponentOffsets>& offsets() const { return offsets_; }
    const CouplingOperator& coupling() const { return coupling_; }
    const TimeGrid& grid() const { return grid_; }
    const Vector& x0() const { return x0_; }
    const GridTrajectory& u_ext() const { return u_ext_; }

    Index n() const { return node_.n(); }
    Index m_ext() const { return node_.m_ext(); }
    Index m_int() const { return node_.m_int(); }

private:
    CoupledProblem(std::vector<SystemNode> components, CouplingOperator coupling, TimeGrid grid,
                   Vector x0, GridTrajectory u_ext, bool validate)
        : components_(std::move(components)),
          offsets_(component_offsets(components_)),
          node_(compose_diagonal(components_)),
          coupling_(std::move(coupling)),
          grid_(grid),
          x0_(std::move(x0)),
          u_ext_(std::move(u_ext)) {
        detail::require(coupling_.size() == node_.m_int(), ErrorCode::DimensionMismatch,
                        "coupling size must equal the internal port dimension");
        detail::require(x0_.size() == node_.n(), ErrorCode::DimensionMismatch,
                        "x0 dimension must equal the state dimension");
        detail::require(u_ext_.sampling() == Sampling::Midpoint, ErrorCode::SamplingMismatch,
                        "external input must be midpoint-sampled");
        detail::require(u_ext_.dim() == node_.m_ext(), ErrorCode::DimensionMismatch,
                        "external input dimension must equal m_ext");
        if (!(u_ext_.grid() == grid_)) throw Error(ErrorCode::GridMismatch, "external input grid");
        if (validate) {
            if (!check_dissipativity(node_).is_dissipative) {
                throw Error(ErrorCode::NotDissipative, "composed node fails the dissipativity check");
            }
            if (!check_coupling_monotone(coupling_)) {
                throw Error(ErrorCode::CouplingNotMonotone, "sym(N_c) is not negative semidefinite");
            }
        }
    }

    std::vector<SystemNode> components_;
    std::vector<ComponentOffsets> offsets_;
    SystemNode node_;
    CouplingOperator coupling_;
    TimeGrid grid_;
    Vector x0_;
    GridTrajectory u_ext_;
};

// ---------------------------------------------------------------------------
// Hilbert-space helpers

inline OperatorImage zero_image(const CoupledProblem& p) {
    return {GridTrajectory(p.grid(), Sampling::Midpoint, p.n()),
            GridTrajectory(p.grid(), Sampling::Midpoint, p.m_int())};
}

inline TrajPair zero_pair(const CoupledProblem& p) {
    TrajPair out{GridTrajectory(p.grid(), Sampling::Node, p.n()),
                 GridTrajectory(p.grid(), Sampling::Midpoint, p.m_int())};
    out.x.row(0) = p.x0().transpose();
    return out;
}

namespace detail {

inline void require_pair(const CoupledProblem& p, const TrajPair& q) {
    if (!(q.x.grid() == p.grid()) || !(q.u.grid() == p.grid())) {
        throw Error(ErrorCode::GridMismatch, "pair is not on the problem grid");
    }
    detail::require(q.x.sampling() == Sampling::Node && q.u.sampling() == Sampling::Midpoint,
                    ErrorCode::SamplingMismatch, "pair must be (node, midpoint) sampled");
    detail::require(q.x.dim() == p.n() && q.u.dim() == p.m_int(), ErrorCode::DimensionMismatch,
                    "pair dimensions do not match the problem");
}

inline void require_image(const CoupledProblem& p, const OperatorImage& q) {
    if (!(q.w.grid() == p.grid()) || !(q.z.grid() == p.grid())) {
        throw Error(ErrorCode::GridMismatch, "image is not on the problem grid");
    }
    detail::require(q.w.sampling() == Sampling::Midpoint && q.z.sampling() == Sampling::Midpoint,
                    ErrorCode::SamplingMismatch, "image must be midpoint sampled");
    detail::require(q.w.dim() == p.n() && q.z.dim() == p.m_int(), ErrorCode::DimensionMismatch,
                    "image dimensions do not match the problem");
}

}  // namespace detail

/// Copy of q with node row 0 replaced by the problem's initial state.
inline TrajPair pinned(const CoupledProblem& p, TrajPair q) {
    detail::require_pair(p, q);
    q.x.row(0) = p.x0().transpose();
    return q;
}

/// Midpoint representation of a pair (the vector the Hilbert space actually sees).
inline OperatorImage embed(const CoupledProblem& p, const TrajPair& q) {
    const TrajPair qp = pinned(p, q);
    return {to_midpoints(qp.x), qp.u};
}

inline OperatorImage lincomb(double alpha, const OperatorImage& a, double beta,
                             const OperatorImage& b) {
    return {lincomb(alpha, a.w, beta, b.w), lincomb(alpha, a.z, beta, b.z)};
}

inline double inner(const CoupledProblem& p, const OperatorImage& a, const OperatorImage& b,
                    double omega = 0.0) {
    return weighted_inner(a.w, b.w, omega, p.node().H()) + weighted_inner(a.z, b.z, omega);
}

inline double norm_sq(const CoupledProblem& p, const OperatorImage& a, double omega = 0.0) {
    return inner(p, a, a, omega);
}

inline double norm(const CoupledProblem& p, const OperatorImage& a, double omega = 0.0) {
    return std::sqrt(std::max(0.0, norm_sq(p, a, omega)));
}

// ---------------------------------------------------------------------------
// M_h

inline OperatorImage apply_M(const CoupledProblem& p, const TrajPair& q) {
    detail::require_pair(p, q);
    const SystemNode& nd = p.node();
    const Index nt = p.grid().steps();
    const double tau = p.grid().tau();
    const Matrix D21 = nd.D21(), D22 = nd.D22();
    OperatorImage out = zero_image(p);
    Vector x_prev = p.x0();
    for (Index j = 0; j < nt; ++j) {
        const Vector x_next = q.x.row(j + 1).transpose();
        const Vector xm = 0.5 * (x_prev + x_next);
        const Vector v = p.u_ext().row(j).transpose();
        const Vector u = q.u.row(j).transpose();
        out.w.row(j) = ((x_next - x_prev) / tau - nd.A() * xm - nd.B_ext() * v - nd.B_int() * u)
                           .transpose();
        out.z.row(j) = (nd.C_int() * xm + D21 * v + D22 * u).transpose();
        x_prev = x_next;
    }
    return out;
}

/// (I + lambda M_h) q, the shadow of q.
inline OperatorImage apply_I_plus_M(const CoupledProblem& p, double lambda, const TrajPair& q) {
    return lincomb(1.0, embed(p, q), lambda, apply_M(p, q));
}

/// Factorized (I + lambda M_h)^{-1}. The per-step system in (x_{j+1/2}, u_{j+1/2})
///   [(1 + 2 lambda/tau) I - lambda A    -lambda B_int     ] [x_m]   [w_j + lambda B_ext v_j + (2 lambda/tau) x_j]
///   [lambda C_int                       I + lambda D_22   ] [u  ] = [z_j - lambda D_21 v_j                       ]
/// is time-invariant, so it is factorized once.
class MResolvent {
public:
    MResolvent(const CoupledProblem& problem, double lambda) : p_(&problem), lambda_(lambda) {
        detail::require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument,
                        "lambda must be positive");
        const SystemNode& nd = problem.node();
        const Index n = nd.n(), mi = nd.m_int();
        const double c = 2.0 * lambda / problem.grid().tau();
        Matrix K(n + mi, n + mi);
        K.topLeftCorner(n, n) = (1.0 + c) * Matrix::Identity(n, n) - lambda * nd.A();
        K.topRightCorner(n, mi) = -lambda * nd.B_int();
        K.bottomLeftCorner(mi, n) = lambda * nd.C_int();
        K.bottomRightCorner(mi, mi) = Matrix::Identity(mi, mi) + lambda * nd.D22();
        if (!linalg::factorize(K, lu_)) {
            throw Error(ErrorCode::SingularStep, "resolvent step matrix is singular", 0);
        }
        Bv_ = lambda * nd.B_ext();
        Dv_ = lambda * nd.D21();
    }

    double lambda() const { return lambda_; }

    TrajPair operator()(const OperatorImage& rhs) const {
        const CoupledProblem& p = *p_;
        detail::require_image(p, rhs);
        const Index n = p.n(), mi = p.m_int(), nt = p.grid().steps();
        const double c = 2.0 * lambda_ / p.grid().tau();
        TrajPair out = zero_pair(p);
        Vector x = p.x0();
        Vector b(n + mi);
        for (Index j = 0; j < nt; ++j) {
            const Vector v = p.u_ext().row(j).transpose();
            b.head(n) = rhs.w.row(j).transpose() + Bv_ * v + c * x;
            b.tail(mi) = rhs.z.row(j).transpose() - Dv_ * v;
            const Vector s = n + mi > 0 ? Vector(lu_.solve(b)) : Vector(0);
            x = 2.0 * s.head(n) - x;
            if (!s.allFinite()) throw Error(ErrorCode::SingularStep, "non-finite resolvent step", j);
            out.x.row(j + 1) = x.transpose();
            out.u.row(j) = s.tail(mi).transpose();
        }
        return out;
    }

private:
    const CoupledProblem* p_;
    double lambda_;
    Eigen::PartialPivLU<Matrix> lu_;
    Matrix Bv_, Dv_;
};

inline TrajPair resolve_M(const CoupledProblem& p, double lambda, const OperatorImage& rhs) {
    return MResolvent(p, lambda)(rhs);
}

// ---------------------------------------------------------------------------
// N_h: pointwise in time, acts on the z-block only.

/// Factorized (I + lambda N)^{-1}(w, z) = (w, (I - lambda N_c)^{-1} z).
class NResolvent {
public:
    NResolvent(const CoupledProblem& problem, double lambda) : lambda_(lambda) {
        detail::require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument,
                        "lambda must be positive");
        const Index mi = problem.m_int();
        if (!linalg::factorize(Matrix::Identity(mi, mi) - lambda * problem.coupling().matrix(), lu_)) {
            throw Error(ErrorCode::SingularCoupling, "I - lambda N_c is singular");
        }
    }

    OperatorImage resolvent(const OperatorImage& q) const {
        OperatorImage out = q;
        if (q.z.dim() > 0) out.z.values() = lu_.solve(q.z.values().transpose()).transpose();
        return out;
    }

    /// (I - lambda N)(I + lambda N)^{-1} = 2 (I + lambda N)^{-1} - I.
    OperatorImage cayley(const OperatorImage& q) const {
        OperatorImage out = q;
        if (q.z.dim() > 0) {
            out.z.values() = 2.0 * lu_.solve(q.z.values().transpose()).transpose() - q.z.values();
        }
        return out;
    }

private:
    double lambda_;
    Eigen::PartialPivLU<Matrix> lu_;
};

inline OperatorImage apply_resolvent_N(const CoupledProblem& p, double lambda, const OperatorImage& q) {
    detail::require_image(p, q);
    return NResolvent(p, lambda).resolvent(q);
}

inline OperatorImage cayley_N(const CoupledProblem& p, double lambda, const OperatorImage& q) {
    detail::require_image(p, q);
    return NResolvent(p, lambda).cayley(q);
}

// ---------------------------------------------------------------------------
// Certificates

/// Random pair in the (pinned) domain of M_h; entries uniform in [-1, 1].
inline TrajPair random_pair(const CoupledProblem& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    TrajPair q = zero_pair(p);
    for (Index j = 1; j < q.x.samples(); ++j)
        for (Index c = 0; c < q.x.dim(); ++c) q.x.values()(j, c) = dist(rng);
    for (Index j = 0; j < q.u.samples(); ++j)
        for (Index c = 0; c < q.u.dim(); ++c) q.u.values()(j, c) = dist(rng);
    return q;
}

inline OperatorImage random_image(const CoupledProblem& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    OperatorImage q = zero_image(p);
    for (auto* t : {&q.w, &q.z})
        for (Index j = 0; j < t->samples(); ++j)
            for (Index c = 0; c < t->dim(); ++c) t->values()(j, c) = dist(rng);
    return q;
}

struct MonotonicityReport {
    /// Smallest relative slack of <dp, dMp> - |dx_N|_H^2 / 2 over all samples.
    double min_slack = 0.0;
    bool passed = false;
    Index samples = 0;
};

inline constexpr double kMonotonicityTol = 1e-12;

/// Slack of the discrete telescoping estimate for one pair, scaled by 1 + |dp| |dMp|.
inline double monotonicity_slack(const CoupledProblem& p, const TrajPair& a, const TrajPair& b) {
    const OperatorImage dp = lincomb(1.0, embed(p, a), -1.0, embed(p, b));
    const OperatorImage dm = lincomb(1.0, apply_M(p, a), -1.0, apply_M(p, b));
    const Index last = p.grid().steps();
    const Vector dx = (a.x.row(last) - b.x.row(last)).transpose();
    const double lhs = inner(p, dp, dm);
    const double rhs = 0.5 * dx.dot(p.node().H() * dx);
    return (lhs - rhs) / (1.0 + norm(p, dp) * norm(p, dm));
}

inline MonotonicityReport check_discrete_monotonicity(const CoupledProblem& p, Index n_samples,
                                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MonotonicityReport r;
    r.min_slack = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < n_samples; ++s) {
        const TrajPair a = random_pair(p, rng);
        const TrajPair b = random_pair(p, rng);
        r.min_slack = std::min(r.min_slack, monotonicity_slack(p, a, b));
    }
    r.samples = n_samples;
    r.passed = r.min_slack >= -kMonotonicityTol;
    return r;
}

// ---------------------------------------------------------------------------
// Plain node simulation and energy bookkeeping

/// Implicit midpoint solve of x' = A x + B [v; u] from x(0) = x0 with midpoint-sampled
/// inputs (all ports, external first). `forcing` (midpoint, dim n) is added to x' if given.
inline GridTrajectory simulate(const SystemNode& node, const Vector& x0, const GridTrajectory& ports,
                               const GridTrajectory* forcing = nullptr) {
    detail::require(ports.sampling() == Sampling::Midpoint, ErrorCode::SamplingMismatch,
                    "ports must be midpoint sampled");
    detail::require(ports.dim() == node.m() && x0.size() == node.n(), ErrorCode::DimensionMismatch,
                    "simulate: dimension mismatch");
    const TimeGrid& grid = ports.grid();
    const Index n = node.n(), nt = grid.steps();
    const double c = 2.0 / grid.tau();
    Eigen::PartialPivLU<Matrix> lu;
    if (!linalg::factorize(c * Matrix::Identity(n, n) - node.A(), lu)) {
        throw Error(ErrorCode::SingularStep, "midpoint step matrix is singular", 0);
    }
    const Matrix B = node.B();
    GridTrajectory x(grid, Sampling::Node, n);
    x.row(0) = x0.transpose();
    Vector xj = x0;
    for (Index j = 0; j < nt; ++j) {
        Vector rhs = c * xj + B * ports.row(j).transpose();
        if (forcing) rhs += forcing->row(j).transpose();
        const Vector xm = n > 0 ? Vector(lu.solve(rhs)) : Vector(0);
        xj = 2.0 * xm - xj;
        x.row(j + 1) = xj.transpose();
    }
    return x;
}

struct EnergyBalanceReport {
    /// |x_j|_H^2 - |x_0|_H^2 - 2 * (supplied energy up to t_j), j = 0..N_t.
    std::vector<double> residual;
    double max_violation = 0.0;
    bool passed = false;
};

/// Dissipation inequality |x_j|_H^2 <= |x_0|_H^2 + 2 tau sum_{i<j} <(v,u)_i, (yv,y)_i> along a
/// node trajectory, outputs taken from the node's output map at midpoints. An optional
/// state forcing f adds <x_{i+1/2}, H f_i> to the supply.
inline EnergyBalanceReport discrete_energy_balance(const SystemNode& node, const GridTrajectory& x,
                                                   const GridTrajectory& ports,
                                                   const GridTrajectory* forcing = nullptr) {
    detail::require(x.sampling() == Sampling::Node, ErrorCode::SamplingMismatch,
                    "state must be node sampled");
    detail::require(ports.sampling() == Sampling::Midpoint, ErrorCode::SamplingMismatch,
                    "ports must be midpoint sampled");
    detail::require_same_grid(x, ports);
    detail::require(x.dim() == node.n() && ports.dim() == node.m(), ErrorCode::DimensionMismatch,
                    "energy balance: dimension mismatch");
    const Matrix& H = node.H();
    const Matrix C = node.C();
    const double tau = x.grid().tau();
    const Index nt = x.grid().steps();
    const auto energy = [&](Index j) {
        const Vector xj = x.row(j).transpose();
        return xj.dot(H * xj);
    };
    EnergyBalanceReport r;
    r.residual.resize(static_cast<std::size_t>(nt + 1));
    const double e0 = energy(0);
    double supplied = 0.0;
    r.residual[0] = 0.0;
    r.max_violation = 0.0;
    for (Index j = 0; j < nt; ++j) {
        const Vector xm = 0.5 * (x.row(j) + x.row(j + 1)).transpose();
        const Vector v = ports.row(j).transpose();
        const Vector y = C * xm + node.D() * v;
        double power = v.dot(y);
        if (forcing) power += xm.dot(H * forcing->row(j).transpose());
        supplied += 2.0 * tau * power;
        const double res = energy(j + 1) - e0 - supplied;
        r.residual[static_cast<std::size_t>(j + 1)] = res;
        r.max_violation = std::max(r.max_violation, res);
    }
    r.passed = r.max_violation <= 1e-10 * (1.0 + e0);
    return r;
}

/// Per-component view of a pair: the component's state, all of its ports (external
/// then internal, with the problem's external input) and optional state forcing.
struct ComponentTrajectory {
    GridTrajectory x;
    GridTrajectory ports;
    GridTrajectory forcing;
};

inline ComponentTrajectory component_trajectory(const CoupledProblem& p, std::size_t i,
                                                const TrajPair& q,
                                                const GridTrajectory* forcing = nullptr) {
    const SystemNode& nd = p.components().at(i);
    const ComponentOffsets& o = p.offsets().at(i);
    const TimeGrid& g = p.grid();
    ComponentTrajectory out{
        GridTrajectory(g, Sampling::Node, RowMatrix(q.x.values().middleCols(o.state, nd.n()))),
        GridTrajectory(g, Sampling::Midpoint, nd.m()),
        GridTrajectory(g, Sampling::Midpoint, nd.n())};
    out.ports.values().leftCols(nd.m_ext()) = p.u_ext().values().middleCols(o.ext, nd.m_ext());
    out.ports.values().rightCols(nd.m_int()) = q.u.values().middleCols(o.intl, nd.m_int());
    if (forcing) out.forcing.values() = forcing->values().middleCols(o.state, nd.n());
    return out;
}

/// Dissipation inequality for every component of a pair that solves the node dynamics
/// (optionally driven by an extra state forcing).
inline std::vector<EnergyBalanceReport> component_energy_balance(
    const CoupledProblem& p, const TrajPair& q, const GridTrajectory* forcing = nullptr) {
    std::vector<EnergyBalanceReport> out;
    for (std::size_t i = 0; i < p.components().size(); ++i) {
        const ComponentTrajectory ct = component_trajectory(p, i, q, forcing);
        out.push_back(discrete_energy_balance(p.components()[i], ct.x, ct.ports,
                                              forcing ? &ct.forcing : nullptr));
    }
    return out;
}

/// State forcing f with x' = A x + B [v; u] + f for an iterate produced by the M-resolvent
/// from shadow (w, z): f = (w - x_{j+1/2}) / lambda.
inline GridTrajectory resolvent_forcing(const CoupledProblem& p, double lambda, const TrajPair& q,
                                        const OperatorImage& shadow) {
    const OperatorImage e = embed(p, q);
    return lincomb(1.0 / lambda, shadow.w, -1.0 / lambda, e.w);
}

}  // namespace prlm
