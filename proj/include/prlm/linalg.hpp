#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace prlm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace linalg {

inline Matrix sym_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Largest eigenvalue of a symmetric matrix; -inf for an empty matrix.
inline double max_sym_eigenvalue(const Matrix& s) {
    if (s.rows() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline double min_sym_eigenvalue(const Matrix& s) {
    if (s.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Spectral norm of a symmetric matrix.
inline double sym_norm2(const Matrix& s) {
    if (s.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Place `block` at (row, col) of `target`.
inline void put(Matrix& target, Index row, Index col, const Matrix& block) {
    if (block.size() == 0) return;
    target.block(row, col, block.rows(), block.cols()) = block;
}

inline Matrix block_diag(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    put(out, 0, 0, a);
    put(out, a.rows(), a.cols(), b);
    return out;
}

/// LU factorization that refuses (near-)singular matrices.
/// Returns false when the reciprocal condition estimate drops below `rcond_min`.
inline bool factorize(const Matrix& m, Eigen::PartialPivLU<Matrix>& lu, double rcond_min = 1e-14) {
    if (m.rows() == 0) {
        lu = Eigen::PartialPivLU<Matrix>(m);
        return true;
    }
    if (!m.allFinite()) return false;
    lu.compute(m);
    const double rc = lu.rcond();
    return std::isfinite(rc) && rc >= rcond_min;
}

}  // namespace linalg
}  // namespace prlm
