#pragma once

// Monolithic solve of the closed loop M(x, u) + N(x, u) = 0 with the same implicit
// midpoint discretization as M_h, so that it is exactly the fixed point of the splitting.

#include "prlm/discrete_operator.hpp"

namespace prlm {

/// Per step, in (x_{j+1/2}, u_{j+1/2}):
///   [2/tau I - A    -B_int       ] [x_m]   [B_ext v_j + (2/tau) x_j]
///   [C_int          D_22 - N_c   ] [u  ] = [-D_21 v_j              ]
inline TrajPair solve_monolithic(const CoupledProblem& p) {
    const SystemNode& nd = p.node();
    const Index n = nd.n(), mi = nd.m_int(), nt = p.grid().steps();
    const double c = 2.0 / p.grid().tau();
    Matrix K(n + mi, n + mi);
    K.topLeftCorner(n, n) = c * Matrix::Identity(n, n) - nd.A();
    K.topRightCorner(n, mi) = -nd.B_int();
    K.bottomLeftCorner(mi, n) = nd.C_int();
    K.bottomRightCorner(mi, mi) = nd.D22() - p.coupling().matrix();
    Eigen::PartialPivLU<Matrix> lu;
    if (!linalg::factorize(K, lu)) {
        throw Error(ErrorCode::SingularClosedLoop, "closed-loop step matrix is singular", 0);
    }
    const Matrix D21 = nd.D21();
    TrajPair out = zero_pair(p);
    Vector x = p.x0();
    Vector b(n + mi);
    for (Index j = 0; j < nt; ++j) {
        const Vector v = p.u_ext().row(j).transpose();
        b.head(n) = nd.B_ext() * v + c * x;
        b.tail(mi) = -D21 * v;
        const Vector s = n + mi > 0 ? Vector(lu.solve(b)) : Vector(0);
        if (!s.allFinite()) throw Error(ErrorCode::SingularClosedLoop, "non-finite closed-loop step", j);
        x = 2.0 * s.head(n) - x;
        out.x.row(j + 1) = x.transpose();
        out.u.row(j) = s.tail(mi).transpose();
    }
    return out;
}

/// N_h q = (0, -N_c u).
inline OperatorImage apply_N(const CoupledProblem& p, const TrajPair& q) {
    OperatorImage out = zero_image(p);
    if (p.m_int() > 0) out.z.values() = -q.u.values() * p.coupling().matrix().transpose();
    return out;
}

/// |M_h q + N_h q| / (1 + |M_h q| + |N_h q|).
inline double closed_loop_residual(const CoupledProblem& p, const TrajPair& q) {
    const OperatorImage m = apply_M(p, q);
    const OperatorImage nq = apply_N(p, q);
    return norm(p, lincomb(1.0, m, 1.0, nq)) / (1.0 + norm(p, m) + norm(p, nq));
}

}  // namespace prlm
