#pragma once

// Finite-dimensional passive system nodes
//
//   x' = A x + B_ext v + B_int u
//   [yv; y] = [C_ext; C_int] x + D [v; u]
//
// with an explicit energy weight H (state inner product <x, z>_H = x^T H z).
// The node is passive when the symmetric part of
//
//   [ H A      H B_ext   H B_int ]
//   [ -C_ext   -D_11     -D_12   ]
//   [ -C_int   -D_21     -D_22   ]
//
// is negative semidefinite.

#include "prlm/error.hpp"
#include "prlm/linalg.hpp"

#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace prlm {

/// Raw blocks handed to assemble_node. Any block left empty (size 0) is read as
/// the zero block of the shape implied by n, m_ext and m_int.
struct NodeBlocks {
    Index n = 0;
    Index m_ext = 0;
    Index m_int = 0;
    Matrix A;
    Matrix B_ext;
    Matrix B_int;
    Matrix C_ext;
    Matrix C_int;
    Matrix D;
};

class SystemNode;
SystemNode assemble_node(const NodeBlocks& blocks, const Matrix& H);

class SystemNode {
public:
    Index n() const { return A_.rows(); }
    Index m_ext() const { return B_ext_.cols(); }
    Index m_int() const { return B_int_.cols(); }
    Index m() const { return m_ext() + m_int(); }

    const Matrix& A() const { return A_; }
    const Matrix& B_ext() const { return B_ext_; }
    const Matrix& B_int() const { return B_int_; }
    const Matrix& C_ext() const { return C_ext_; }
    const Matrix& C_int() const { return C_int_; }
    const Matrix& D() const { return D_; }
    const Matrix& H() const { return H_; }

    Matrix D11() const { return D_.topLeftCorner(m_ext(), m_ext()); }
    Matrix D12() const { return D_.topRightCorner(m_ext(), m_int()); }
    Matrix D21() const { return D_.bottomLeftCorner(m_int(), m_ext()); }
    Matrix D22() const { return D_.bottomRightCorner(m_int(), m_int()); }

    /// [B_ext B_int]
    Matrix B() const {
        Matrix b(n(), m());
        b << B_ext_, B_int_;
        return b;
    }
    /// [C_ext; C_int]
    Matrix C() const {
        Matrix c(m(), n());
        c << C_ext_, C_int_;
        return c;
    }

private:
    friend SystemNode assemble_node(const NodeBlocks&, const Matrix&);
    SystemNode() = default;

    Matrix A_, B_ext_, B_int_, C_ext_, C_int_, D_, H_;
};

namespace detail {

inline Matrix shaped(const Matrix& m, Index rows, Index cols, const char* name) {
    if (m.size() == 0) return Matrix::Zero(rows, cols);
    if (m.rows() != rows || m.cols() != cols) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(name) + " is " + std::to_string(m.rows()) + "x"
                        + std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x"
                        + std::to_string(cols));
    }
    return m;
}

}  // namespace detail

/// Validate dimensions and the energy weight, returning an immutable node.
inline SystemNode assemble_node(const NodeBlocks& b, const Matrix& H) {
    detail::require(b.n >= 0 && b.m_ext >= 0 && b.m_int >= 0, ErrorCode::DimensionMismatch,
                    "negative dimension");
    const Index n = b.n, me = b.m_ext, mi = b.m_int;
    SystemNode node;
    node.A_ = detail::shaped(b.A, n, n, "A");
    node.B_ext_ = detail::shaped(b.B_ext, n, me, "B_ext");
    node.B_int_ = detail::shaped(b.B_int, n, mi, "B_int");
    node.C_ext_ = detail::shaped(b.C_ext, me, n, "C_ext");
    node.C_int_ = detail::shaped(b.C_int, mi, n, "C_int");
    node.D_ = detail::shaped(b.D, me + mi, me + mi, "D");

    if (H.rows() != n || H.cols() != n) {
        throw Error(ErrorCode::DimensionMismatch, "H must be " + std::to_string(n) + "x"
                                                      + std::to_string(n));
    }
    if (n > 0) {
        const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
        if (!H.allFinite() || (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw Error(ErrorCode::WeightNotSPD, "H is not symmetric");
        }
        const Matrix Hs = linalg::sym_part(H);
        if (!(linalg::min_sym_eigenvalue(Hs) > 0.0)) {
            throw Error(ErrorCode::WeightNotSPD, "H is not positive definite");
        }
        node.H_ = Hs;
    } else {
        node.H_ = Matrix(0, 0);
    }
    const auto finite = [](const Matrix& m) { return m.size() == 0 || m.allFinite(); };
    if (!finite(node.A_) || !finite(node.B_ext_) || !finite(node.B_int_) || !finite(node.C_ext_)
        || !finite(node.C_int_) || !finite(node.D_)) {
        throw Error(ErrorCode::BadParams, "non-finite entry in node blocks");
    }
    return node;
}

/// Symmetric part W of the H-weighted node matrix shown at the top of this file,
/// ordered (x, v, u).
inline Matrix dissipation_matrix(const SystemNode& node) {
    const Index n = node.n(), m = node.m();
    Matrix S(n + m, n + m);
    S.topLeftCorner(n, n) = node.H() * node.A();
    S.topRightCorner(n, m) = node.H() * node.B();
    S.bottomLeftCorner(m, n) = -node.C();
    S.bottomRightCorner(m, m) = -node.D();
    return linalg::sym_part(S);
}

struct DissipativityReport {
    double max_sym_eig = 0.0;
    bool is_dissipative = false;
    /// Distance of the largest eigenvalue below zero (negative when violated).
    double margin = 0.0;
};

inline constexpr double kDissipativityTol = 1e-10;

inline DissipativityReport check_dissipativity(const SystemNode& node,
                                               double tol = kDissipativityTol) {
    DissipativityReport r;
    r.max_sym_eig = linalg::max_sym_eigenvalue(dissipation_matrix(node));
    r.is_dissipative = r.max_sym_eig <= tol;
    r.margin = -r.max_sym_eig;
    return r;
}

/// Interconnection y = N_c u between the internal ports.
class CouplingOperator {
public:
    CouplingOperator() = default;
    explicit CouplingOperator(Matrix Nc) : Nc_(std::move(Nc)) {
        detail::require(Nc_.rows() == Nc_.cols(), ErrorCode::DimensionMismatch,
                        "coupling matrix must be square");
    }

    const Matrix& matrix() const { return Nc_; }
    Index size() const { return Nc_.rows(); }

private:
    Matrix Nc_ = Matrix(0, 0);
};

/// True iff the largest eigenvalue of sym(N_c) is at most tol.
inline bool check_coupling_monotone(const CouplingOperator& coupling,
                                    double tol = kDissipativityTol) {
    return linalg::max_sym_eigenvalue(linalg::sym_part(coupling.matrix())) <= tol;
}

struct PsopEstimate {
    /// Largest feasible epsilon; +inf when the node has no external output.
    double epsilon = 0.0;
    bool vacuous = false;
};

/// Largest eps >= 0 with W + eps G^T G <= 0, G = [C_ext D_11 D_12], by bisection.
inline PsopEstimate estimate_psop_epsilon(const SystemNode& node,
                                          double tol = kDissipativityTol) {
    const Matrix W = dissipation_matrix(node);
    if (linalg::max_sym_eigenvalue(W) > tol) {
        throw Error(ErrorCode::NotDissipative, "PSOP estimate needs a dissipative node");
    }
    PsopEstimate est;
    if (node.m_ext() == 0) {
        est.epsilon = std::numeric_limits<double>::infinity();
        est.vacuous = true;
        return est;
    }
    const Index n = node.n(), me = node.m_ext(), mi = node.m_int();
    Matrix G = Matrix::Zero(me, n + me + mi);
    G.leftCols(n) = node.C_ext();
    G.middleCols(n, me) = node.D11();
    G.rightCols(mi) = node.D12();
    const Matrix GtG = G.transpose() * G;

    const double gtg_norm = linalg::sym_norm2(GtG);
    if (gtg_norm == 0.0) {
        // external output identically zero: any eps works
        est.epsilon = std::numeric_limits<double>::infinity();
        est.vacuous = true;
        return est;
    }
    // smallest nonzero eigenvalue of G^T G (restricted to range of G)
    Eigen::SelfAdjointEigenSolver<Matrix> es(GtG, Eigen::EigenvaluesOnly);
    double sigma_min = gtg_norm;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()(i);
        if (ev > 1e-12 * gtg_norm) sigma_min = std::min(sigma_min, ev);
    }
    const double w_norm = linalg::sym_norm2(W);
    const double feas_tol = 1e-12 * std::max(1.0, w_norm);
    const auto feasible = [&](double eps) {
        return linalg::max_sym_eigenvalue(W + eps * GtG) <= feas_tol;
    };

    double lo = 0.0;
    double hi = 2.0 * std::max(w_norm, feas_tol) / sigma_min;
    for (int it = 0; it < 60 && feasible(hi); ++it) hi *= 2.0;  // round-off at the bracket edge
    for (int it = 0; it < 200 && hi - lo > 1e-6 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    // anything the feasibility tolerance alone can absorb is not a real margin
    est.epsilon = lo <= 64.0 * feas_tol / gtg_norm ? 0.0 : lo;
    return est;
}

/// C (sI - A)^{-1} B + D over all ports (external first).
inline Eigen::MatrixXcd transfer_function(const SystemNode& node, std::complex<double> s) {
    using CMatrix = Eigen::MatrixXcd;
    const Index n = node.n();
    const CMatrix D = node.D().cast<std::complex<double>>();
    if (n == 0) return D;
    const CMatrix K = s * CMatrix::Identity(n, n) - node.A().cast<std::complex<double>>();
    Eigen::PartialPivLU<CMatrix> lu(K);
    const double rc = lu.rcond();
    if (!std::isfinite(rc) || rc < 1e-14) {
        throw Error(ErrorCode::SingularResolvent, "s is (numerically) an eigenvalue of A");
    }
    return node.C().cast<std::complex<double>>() * lu.solve(node.B().cast<std::complex<double>>())
           + D;
}

/// Where each component sits inside a block-diagonal composition.
struct ComponentOffsets {
    Index state = 0;
    Index ext = 0;
    Index intl = 0;
};

inline std::vector<ComponentOffsets> component_offsets(std::span<const SystemNode> nodes) {
    std::vector<ComponentOffsets> out;
    ComponentOffsets at;
    for (const auto& nd : nodes) {
        out.push_back(at);
        at.state += nd.n();
        at.ext += nd.m_ext();
        at.intl += nd.m_int();
    }
    return out;
}

/// Block-diagonal composition; external ports of all nodes come first, then internal ones.
inline SystemNode compose_diagonal(std::span<const SystemNode> nodes) {
    if (nodes.empty()) throw Error(ErrorCode::EmptyList, "compose_diagonal needs at least one node");
    const auto off = component_offsets(nodes);
    Index n = 0, me = 0, mi = 0;
    for (const auto& nd : nodes) {
        n += nd.n();
        me += nd.m_ext();
        mi += nd.m_int();
    }
    NodeBlocks b{n, me, mi, Matrix::Zero(n, n), Matrix::Zero(n, me), Matrix::Zero(n, mi),
                 Matrix::Zero(me, n), Matrix::Zero(mi, n), Matrix::Zero(me + mi, me + mi)};
    Matrix H = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        const auto& o = off[i];
        linalg::put(b.A, o.state, o.state, nd.A());
        linalg::put(H, o.state, o.state, nd.H());
        linalg::put(b.B_ext, o.state, o.ext, nd.B_ext());
        linalg::put(b.B_int, o.state, o.intl, nd.B_int());
        linalg::put(b.C_ext, o.ext, o.state, nd.C_ext());
        linalg::put(b.C_int, o.intl, o.state, nd.C_int());
        linalg::put(b.D, o.ext, o.ext, nd.D11());
        linalg::put(b.D, o.ext, me + o.intl, nd.D12());
        linalg::put(b.D, me + o.intl, o.ext, nd.D21());
        linalg::put(b.D, me + o.intl, me + o.intl, nd.D22());
    }
    return assemble_node(b, H);
}

inline SystemNode compose_diagonal(std::initializer_list<SystemNode> nodes) {
    const std::vector<SystemNode> v(nodes);
    return compose_diagonal(std::span<const SystemNode>(v));
}

}  // namespace prlm
