#pragma once

// Peaceman-Rachford / Lions-Mercier dynamic iteration
//
//   (x, u)_{k+1} = (I + lM)^{-1} (I - lN)(I + lN)^{-1} (I - lM) (x, u)_k
//
// run in shadow form: with s_k = (I + lM)(x, u)_k,
//   s_{k+1} = (I - lN)(I + lN)^{-1} (2 (x, u)_k - s_k),   (x, u)_{k+1} = (I + lM)^{-1} s_{k+1}.
//
// Against a fixed point (x, u) with shadow s, the monitored quantities are
//   D_k = |s - s_k|                                   non-increasing (plain and omega-weighted)
//   |(x, u) - (x, u)_k| <= D_k
//   |x - x_k|_{2,omega}^2 <= (D_k^2 - D_{k+1}^2)_omega / (4 l omega)
//   max_t |x(t) - x_k(t)|_H^2 <= exp(2 omega T) (D_k^2 - D_{k+1}^2)_omega / (2 l)
//   |yv - yv_k|_2^2 <= (D_k^2 - D_{k+1}^2) / (4 eps)       (eps from the PSOP margin)

#include "prlm/discrete_operator.hpp"
#include "prlm/reference_solver.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace prlm {

struct IterationState {
    Index k = 0;
    TrajPair pair;
    OperatorImage shadow;
    double lambda = 1.0;
    double omega = 0.0;
};

inline constexpr double kDefaultLambda = 1.0;
inline constexpr double kShadowTol = 1e-10;
inline constexpr double kBoundTol = 1e-8;

inline double default_omega(const TimeGrid& grid) { return 1.0 / (2.0 * grid.final_time()); }

/// Holds the two factorized resolvents for one (problem, lambda).
class Splitting {
public:
    Splitting(const CoupledProblem& problem, double lambda, double omega)
        : p_(&problem), lambda_(lambda), omega_(omega), RM_(problem, lambda), RN_(problem, lambda) {
        if (!(omega >= 0.0)) throw Error(ErrorCode::NegativeOmega, "omega must be >= 0");
        omega_weights(problem.grid(), omega);  // validates omega * tau < 1
    }

    const CoupledProblem& problem() const { return *p_; }
    double lambda() const { return lambda_; }
    double omega() const { return omega_; }
    const MResolvent& m_resolvent() const { return RM_; }
    const NResolvent& n_resolvent() const { return RN_; }

    IterationState make_state(Index k, TrajPair pair) const {
        OperatorImage shadow = apply_I_plus_M(*p_, lambda_, pair);
        return {k, std::move(pair), std::move(shadow), lambda_, omega_};
    }

    /// u_0 = 0 and the decoupled midpoint solve of x' = A x + B_ext v from x0.
    IterationState init_state() const {
        const CoupledProblem& p = *p_;
        GridTrajectory ports(p.grid(), Sampling::Midpoint, p.node().m());
        ports.values().leftCols(p.m_ext()) = p.u_ext().values();
        TrajPair pair{simulate(p.node(), p.x0(), ports),
                      GridTrajectory(p.grid(), Sampling::Midpoint, p.m_int())};
        return make_state(0, std::move(pair));
    }

    IterationState iterate(const IterationState& s) const {
        const OperatorImage reflected = lincomb(2.0, embed(*p_, s.pair), -1.0, s.shadow);
        OperatorImage shadow = RN_.cayley(reflected);
        TrajPair pair = RM_(shadow);
        return {s.k + 1, std::move(pair), std::move(shadow), lambda_, omega_};
    }

    /// The same step written as the resolvent composition of the iteration map.
    TrajPair iterate_resolvent_form(const TrajPair& q) const {
        const OperatorImage e = embed(*p_, q);
        const OperatorImage reflected_m = lincomb(1.0, e, -lambda_, apply_M(*p_, q));  // (I - lM) q
        return RM_(RN_.cayley(reflected_m));
    }

private:
    const CoupledProblem* p_;
    double lambda_;
    double omega_;
    MResolvent RM_;
    NResolvent RN_;
};

inline IterationState init_state(const CoupledProblem& p, double lambda, double omega) {
    return Splitting(p, lambda, omega).init_state();
}

inline IterationState iterate_once(const CoupledProblem& p, const IterationState& s) {
    return Splitting(p, s.lambda, s.omega).iterate(s);
}

/// Shadow consistency: |s_k - (I + lM)(x, u)_k| relative to 1 + |s_k|.
inline double shadow_defect(const CoupledProblem& p, const IterationState& s) {
    const OperatorImage d = lincomb(1.0, s.shadow, -1.0, apply_I_plus_M(p, s.lambda, s.pair));
    return norm(p, d) / (1.0 + norm(p, s.shadow));
}

// ---------------------------------------------------------------------------
// Error measurement against a fixed point

/// The fixed point with its shadow and outputs, computed once per (lambda).
struct ReferenceData {
    TrajPair pair;
    OperatorImage shadow;
    OperatorImage embedded;
    GridTrajectory yext;
};

/// External output C_ext x_m + D_11 v + D_12 u at the midpoints.
inline GridTrajectory external_output(const CoupledProblem& p, const TrajPair& q) {
    const SystemNode& nd = p.node();
    GridTrajectory y(p.grid(), Sampling::Midpoint, nd.m_ext());
    if (nd.m_ext() == 0) return y;
    const RowMatrix xm = midpoint_values(pinned(p, q).x);
    y.values() = xm * nd.C_ext().transpose() + p.u_ext().values() * nd.D11().transpose()
                 + q.u.values() * nd.D12().transpose();
    return y;
}

inline ReferenceData make_reference(const CoupledProblem& p, double lambda, TrajPair pair) {
    ReferenceData r{pair, apply_I_plus_M(p, lambda, pair), embed(p, pair), external_output(p, pair)};
    return r;
}

/// Squared error norms of one iterate.
struct IterateErrors {
    double dwz_sq = 0.0;     // |ds|_2^2
    double dwz_w_sq = 0.0;   // |ds|_{2,omega}^2
    double dxu_sq = 0.0;     // |d(x,u)|_2^2
    double dxu_w_sq = 0.0;   // |d(x,u)|_{2,omega}^2
    double dx_w_sq = 0.0;    // |dx|_{2,omega,H}^2
    double dx_sq = 0.0;      // |dx|_{2,H}^2
    double sup_sq = 0.0;     // max_j |dx_j|_H^2
    double yext_sq = 0.0;    // |d yv|_2^2
};

inline IterateErrors measure(const CoupledProblem& p, const IterationState& s, const ReferenceData& ref) {
    const double omega = s.omega;
    const OperatorImage ds = lincomb(1.0, ref.shadow, -1.0, s.shadow);
    const OperatorImage dp = lincomb(1.0, ref.embedded, -1.0, embed(p, s.pair));
    IterateErrors e;
    e.dwz_sq = norm_sq(p, ds);
    e.dwz_w_sq = norm_sq(p, ds, omega);
    e.dxu_sq = norm_sq(p, dp);
    e.dxu_w_sq = norm_sq(p, dp, omega);
    e.dx_sq = weighted_norm_sq(dp.w, 0.0, p.node().H());
    e.dx_w_sq = weighted_norm_sq(dp.w, omega, p.node().H());
    const GridTrajectory dx = lincomb(1.0, pinned(p, ref.pair).x, -1.0, pinned(p, s.pair).x);
    const double sup = sup_norm(dx, p.node().H());
    e.sup_sq = sup * sup;
    if (p.m_ext() > 0) {
        e.yext_sq = l2_inner(lincomb(1.0, ref.yext, -1.0, external_output(p, s.pair)),
                             lincomb(1.0, ref.yext, -1.0, external_output(p, s.pair)));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Checks

struct TheoremACheck {
    bool monotone_ok = true;
    bool domination_ok = true;
    /// min over plain / weighted norms of (D_{k-1} - D_k) / (1 + |s|)
    double monotone_slack = std::numeric_limits<double>::infinity();
    /// min over plain / weighted norms of (D_k - |d(x,u)_k|) / (1 + |s|)
    double domination_slack = std::numeric_limits<double>::infinity();
};

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // rhs - lhs
    bool ok = true;
    bool vacuous = false;
};

namespace detail {

inline TheoremACheck theorem_a(const IterateErrors* prev, const IterateErrors& cur, double scale) {
    TheoremACheck c;
    const double dw = std::sqrt(cur.dwz_sq), dww = std::sqrt(cur.dwz_w_sq);
    c.domination_slack = std::min(dw - std::sqrt(cur.dxu_sq), dww - std::sqrt(cur.dxu_w_sq)) / scale;
    if (prev) {
        c.monotone_slack = std::min(std::sqrt(prev->dwz_sq) - dw, std::sqrt(prev->dwz_w_sq) - dww) / scale;
    }
    c.monotone_ok = c.monotone_slack >= -kShadowTol;
    c.domination_ok = c.domination_slack >= -kShadowTol;
    return c;
}

inline BoundCheck bound(double lhs, double rhs) {
    BoundCheck b;
    b.lhs = lhs;
    b.rhs = rhs;
    b.slack = rhs - lhs;
    b.ok = b.slack >= -kBoundTol;
    return b;
}

inline BoundCheck theorem_b(const IterateErrors& k, const IterateErrors& k1, double lambda, double omega) {
    if (!(omega > 0.0)) throw Error(ErrorCode::OmegaZero, "the weighted L2 bound needs omega > 0");
    return bound(k.dx_w_sq, (k.dwz_w_sq - k1.dwz_w_sq) / (4.0 * lambda * omega));
}

inline BoundCheck theorem_c(const IterateErrors& k, const IterateErrors& k1, double lambda, double omega,
                            double T) {
    if (!(omega > 0.0)) throw Error(ErrorCode::OmegaZero, "the uniform bound needs omega > 0");
    return bound(k.sup_sq, std::exp(2.0 * omega * T) * (k.dwz_w_sq - k1.dwz_w_sq) / (2.0 * lambda));
}

inline BoundCheck psop(const IterateErrors& k, const IterateErrors& k1, double eps) {
    return bound(k.yext_sq, (k.dwz_sq - k1.dwz_sq) / (4.0 * eps));
}

}  // namespace detail

/// Shadow monotonicity (vs `previous`, if given) and domination of the iterate error by
/// the shadow error, in plain and omega-weighted norms.
inline TheoremACheck check_theorem_a(const CoupledProblem& p, const IterationState* previous,
                                     const IterationState& current, const TrajPair& reference) {
    const ReferenceData ref = make_reference(p, current.lambda, reference);
    const IterateErrors cur = measure(p, current, ref);
    const double scale = 1.0 + norm(p, ref.shadow);
    if (previous) {
        const IterateErrors prev = measure(p, *previous, ref);
        return detail::theorem_a(&prev, cur, scale);
    }
    return detail::theorem_a(nullptr, cur, scale);
}

inline BoundCheck check_theorem_b_bound(const CoupledProblem& p, const IterationState& k,
                                        const IterationState& k1, const TrajPair& reference) {
    if (!(k.omega > 0.0)) throw Error(ErrorCode::OmegaZero, "the weighted L2 bound needs omega > 0");
    const ReferenceData ref = make_reference(p, k.lambda, reference);
    return detail::theorem_b(measure(p, k, ref), measure(p, k1, ref), k.lambda, k.omega);
}

inline BoundCheck check_theorem_c_bound(const CoupledProblem& p, const IterationState& k,
                                        const IterationState& k1, const TrajPair& reference) {
    const ReferenceData ref = make_reference(p, k.lambda, reference);
    return detail::theorem_c(measure(p, k, ref), measure(p, k1, ref), k.lambda, k.omega,
                             p.grid().final_time());
}

inline BoundCheck check_psop_bound(const CoupledProblem& p, const IterationState& k,
                                   const IterationState& k1, const TrajPair& reference, double eps) {
    if (p.m_ext() == 0) {
        BoundCheck b;
        b.vacuous = true;
        return b;
    }
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::NotPSOP, "needs eps > 0");
    const ReferenceData ref = make_reference(p, k.lambda, reference);
    return detail::psop(measure(p, k, ref), measure(p, k1, ref), eps);
}

// ---------------------------------------------------------------------------
// Driver

struct StopCriteria {
    Index max_iter = 500;
    double tol_update = 1e-10;
};

enum class RunStatus { Converged, MaxIterations };

struct ConvergenceRow {
    Index k = 0;
    double dwz_l2 = std::numeric_limits<double>::quiet_NaN();
    double dwz_w = std::numeric_limits<double>::quiet_NaN();
    double dxu_l2 = std::numeric_limits<double>::quiet_NaN();
    double sup_err = std::numeric_limits<double>::quiet_NaN();
    double yext_err = std::numeric_limits<double>::quiet_NaN();
    double psop_bound = std::numeric_limits<double>::quiet_NaN();
    double update = std::numeric_limits<double>::quiet_NaN();
    bool monotone_ok = true;
    bool domination_ok = true;
    bool b_ok = true;
    bool c_ok = true;
    bool psop_ok = true;
    double monotone_slack = std::numeric_limits<double>::infinity();
    double domination_slack = std::numeric_limits<double>::infinity();
    double b_slack = std::numeric_limits<double>::infinity();
    double c_slack = std::numeric_limits<double>::infinity();
    double psop_slack = std::numeric_limits<double>::infinity();
};

struct ConvergenceReport {
    double lambda = kDefaultLambda;
    double omega = 0.0;
    RunStatus status = RunStatus::MaxIterations;
    Index iterations = 0;
    bool has_reference = false;
    /// b) and c) bounds need omega > 0; PSOP bound needs m_ext > 0 and eps > 0.
    bool b_checked = false;
    bool psop_checked = false;
    double psop_epsilon = 0.0;
    std::vector<ConvergenceRow> rows;
    std::optional<TrajPair> final_pair;

    bool all_ok() const {
        for (const auto& r : rows)
            if (!(r.monotone_ok && r.domination_ok && r.b_ok && r.c_ok && r.psop_ok)) return false;
        return true;
    }
};

inline const char* to_string(RunStatus s) {
    return s == RunStatus::Converged ? "converged" : "max_iter";
}

/// Run the iteration until |(x,u)_k - (x,u)_{k-1}|_2 <= tol_update or max_iter steps,
/// checking every inequality against `reference` when one is supplied. `observe` sees
/// every state, starting with the initial one.
inline ConvergenceReport run(const CoupledProblem& p, double lambda, double omega,
                             const StopCriteria& stop,
                             const std::optional<TrajPair>& reference = std::nullopt,
                             const std::function<void(const IterationState&)>& observe = {}) {
    detail::require(stop.max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be >= 1");
    detail::require(stop.tol_update >= 0.0, ErrorCode::InvalidArgument, "tol_update must be >= 0");
    const Splitting split(p, lambda, omega);

    ConvergenceReport rep;
    rep.lambda = lambda;
    rep.omega = omega;
    rep.has_reference = reference.has_value();
    rep.b_checked = rep.has_reference && omega > 0.0;
    if (rep.has_reference && p.m_ext() > 0) {
        const PsopEstimate est = estimate_psop_epsilon(p.node());
        rep.psop_epsilon = est.epsilon;
        rep.psop_checked = est.epsilon > 0.0 && std::isfinite(est.epsilon);
    }

    std::optional<ReferenceData> ref;
    double scale = 1.0;
    if (reference) {
        ref = make_reference(p, lambda, *reference);
        scale = 1.0 + norm(p, ref->shadow);
    }

    IterationState state = split.init_state();
    if (observe) observe(state);
    std::optional<IterateErrors> err;
    const auto fill_errors = [&](ConvergenceRow& row, const IterateErrors& e) {
        row.dwz_l2 = std::sqrt(e.dwz_sq);
        row.dwz_w = std::sqrt(e.dwz_w_sq);
        row.dxu_l2 = std::sqrt(e.dxu_sq);
        row.sup_err = std::sqrt(e.sup_sq);
        row.yext_err = std::sqrt(e.yext_sq);
    };

    ConvergenceRow row0;
    if (ref) {
        err = measure(p, state, *ref);
        fill_errors(row0, *err);
        const TheoremACheck a = detail::theorem_a(nullptr, *err, scale);
        row0.domination_ok = a.domination_ok;
        row0.domination_slack = a.domination_slack;
    }
    rep.rows.push_back(row0);
    rep.status = RunStatus::MaxIterations;

    for (Index k = 0; k < stop.max_iter; ++k) {
        IterationState next = split.iterate(state);
        if (observe) observe(next);
        const double update = norm(p, lincomb(1.0, embed(p, next.pair), -1.0, embed(p, state.pair)));

        ConvergenceRow row;
        row.k = next.k;
        row.update = update;
        if (ref) {
            const IterateErrors e1 = measure(p, next, *ref);
            ConvergenceRow& prev = rep.rows.back();
            // bounds for iterate k use D_k^2 - D_{k+1}^2
            if (rep.b_checked) {
                const BoundCheck b = detail::theorem_b(*err, e1, lambda, omega);
                prev.b_ok = b.ok;
                prev.b_slack = b.slack;
            }
            if (rep.b_checked) {
                const BoundCheck c = detail::theorem_c(*err, e1, lambda, omega, p.grid().final_time());
                prev.c_ok = c.ok;
                prev.c_slack = c.slack;
            }
            if (rep.psop_checked) {
                const BoundCheck ps = detail::psop(*err, e1, rep.psop_epsilon);
                prev.psop_bound = ps.rhs;
                prev.psop_ok = ps.ok;
                prev.psop_slack = ps.slack;
            }
            fill_errors(row, e1);
            const TheoremACheck a = detail::theorem_a(&*err, e1, scale);
            row.monotone_ok = a.monotone_ok;
            row.monotone_slack = a.monotone_slack;
            row.domination_ok = a.domination_ok;
            row.domination_slack = a.domination_slack;
            err = e1;
        }
        rep.rows.push_back(row);
        state = std::move(next);
        if (update <= stop.tol_update) {
            rep.status = RunStatus::Converged;
            break;
        }
    }
    rep.iterations = state.k;
    rep.final_pair.emplace(state.pair);
    return rep;
}

/// CSV columns: k,dwz_l2,dwz_w,dxu_l2,sup_err,yext_err,psop_bound,monotone_ok,domination_ok,b_ok,c_ok,psop_ok
inline void write_csv(std::ostream& os, const ConvergenceReport& rep) {
    os << "k,dwz_l2,dwz_w,dxu_l2,sup_err,yext_err,psop_bound,monotone_ok,domination_ok,b_ok,c_ok,psop_ok\n";
    os << std::setprecision(17);
    for (const auto& r : rep.rows) {
        os << r.k << ',' << r.dwz_l2 << ',' << r.dwz_w << ',' << r.dxu_l2 << ',' << r.sup_err << ','
           << r.yext_err << ',' << r.psop_bound << ',' << int(r.monotone_ok) << ','
           << int(r.domination_ok) << ',' << int(r.b_ok) << ',' << int(r.c_ok) << ','
           << int(r.psop_ok) << '\n';
    }
}

}  // namespace prlm
