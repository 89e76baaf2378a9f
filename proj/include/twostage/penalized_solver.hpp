#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "twostage/dataset.hpp"

namespace twostage {

// Raised when (X^T X + Lambda) is numerically singular or a downdate hits a
// degenerate pivot.
class SingularSystemError : public std::runtime_error {
  public:
    explicit SingularSystemError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void check_penalty(const MatrixXd& x, const VectorXd& penalty) {
    if (penalty.size() != x.cols())
        throw std::invalid_argument("penalty length must equal the number of columns");
    for (Index j = 0; j < penalty.size(); ++j)
        if (!(penalty(j) >= 0.0) || !std::isfinite(penalty(j)))
            throw std::invalid_argument("penalty entries must be finite and non-negative");
}

// Cholesky of G with an explicit relative pivot floor: any pivot below
// 1e-12 * max(diag(G)) is treated as singular rather than silently solved.
inline Eigen::LLT<MatrixXd> checked_llt(const MatrixXd& g) {
    Eigen::LLT<MatrixXd> llt(g);
    const double max_diag = g.diagonal().maxCoeff();
    const double floor = 1e-12 * max_diag;
    if (llt.info() != Eigen::Success)
        throw SingularSystemError("penalized system is not positive definite");
    const auto& l = llt.matrixLLT();
    for (Index k = 0; k < g.rows(); ++k) {
        const double pivot = l(k, k) * l(k, k);
        if (!(pivot > floor))
            throw SingularSystemError("penalized system pivot below tolerance at column " +
                                      std::to_string(k));
    }
    return llt;
}

inline MatrixXd penalized_gram(const MatrixXd& x, const VectorXd& penalty) {
    MatrixXd g = x.transpose() * x;
    g.diagonal() += penalty;
    return g;
}

}  // namespace detail

// Minimizer of 0.5*||X b - y||^2 + 0.5*sum_j penalty_j b_j^2, i.e. the
// solution of (X^T X + diag(penalty)) b = X^T y.
inline VectorXd solve_penalized(const MatrixXd& x, const VectorXd& y, const VectorXd& penalty) {
    if (x.rows() != y.size())
        throw std::invalid_argument("solve_penalized: x rows must match y length");
    detail::check_penalty(x, penalty);
    const MatrixXd g = detail::penalized_gram(x, penalty);
    return detail::checked_llt(g).solve(x.transpose() * y);
}

// Factored state of one penalized least-squares system, reused across the
// per-variable downdates and permutation refits.
struct PenalizedSystemCache {
    MatrixXd gram_inverse;  // (X^T X + Lambda)^{-1}
    VectorXd xty;           // X^T y
    MatrixXd design;        // X
    VectorXd response;      // y
    VectorXd penalty;       // diag(Lambda)

    Index q() const { return design.cols(); }
    Index n() const { return design.rows(); }

    VectorXd beta() const { return gram_inverse * xty; }

    double rss() const {
        return (response - design * beta()).squaredNorm();
    }
};

inline PenalizedSystemCache gram_inverse(const MatrixXd& x, const VectorXd& y,
                                         const VectorXd& penalty) {
    if (x.rows() != y.size())
        throw std::invalid_argument("gram_inverse: x rows must match y length");
    detail::check_penalty(x, penalty);
    const MatrixXd g = detail::penalized_gram(x, penalty);
    auto llt = detail::checked_llt(g);
    MatrixXd m = llt.solve(MatrixXd::Identity(g.rows(), g.cols()));
    m = ((m + m.transpose()) * 0.5).eval();
    return PenalizedSystemCache{std::move(m), x.transpose() * y, x, y, penalty};
}

// Inverse and solution of the system with one column removed, obtained from
// the full inverse by a Schur-complement downdate instead of refactoring.
struct DowndatedCache {
    Index removed_index = -1;
    MatrixXd gram_inverse_minus_j;
    VectorXd beta_minus_j;
    MatrixXd design_minus_j;
    VectorXd xty_minus_j;

    Index q_minus() const { return design_minus_j.cols(); }
};

inline DowndatedCache inverse_downdate(const PenalizedSystemCache& cache, Index j) {
    const Index q = cache.q();
    if (j < 0 || j >= q)
        throw std::invalid_argument("inverse_downdate: column index out of range");
    const MatrixXd& m = cache.gram_inverse;
    const double m_jj = m(j, j);
    if (!(m_jj > 1e-300))
        throw SingularSystemError("inverse_downdate: degenerate pivot M_jj");

    DowndatedCache down;
    down.removed_index = j;
    down.gram_inverse_minus_j.resize(q - 1, q - 1);
    down.xty_minus_j.resize(q - 1);
    down.design_minus_j.resize(cache.n(), q - 1);

    VectorXd m_col(q - 1);
    Index r = 0;
    for (Index k = 0; k < q; ++k) {
        if (k == j) continue;
        m_col(r) = m(k, j);
        down.xty_minus_j(r) = cache.xty(k);
        down.design_minus_j.col(r) = cache.design.col(k);
        ++r;
    }
    r = 0;
    for (Index k = 0; k < q; ++k) {
        if (k == j) continue;
        Index c = 0;
        for (Index l = 0; l < q; ++l) {
            if (l == j) continue;
            down.gram_inverse_minus_j(r, c) = m(k, l);
            ++c;
        }
        ++r;
    }
    down.gram_inverse_minus_j.noalias() -= m_col * (m_col.transpose() / m_jj);
    down.beta_minus_j = down.gram_inverse_minus_j * down.xty_minus_j;
    return down;
}

// Coefficients of the penalized fit in which the removed column is replaced
// by `xj_perm`, computed in O(q^2 + q n) from the downdated inverse. The
// returned vector is in the original column order of the full system, with
// the replacement column's coefficient at `removed_index`.
inline VectorXd permuted_refit(const DowndatedCache& down, const VectorXd& xj_perm,
                               const VectorXd& y, double lam_jj) {
    const Index qm = down.q_minus();
    if (xj_perm.size() != down.design_minus_j.rows() || y.size() != xj_perm.size())
        throw std::invalid_argument("permuted_refit: dimension mismatch");
    if (!(lam_jj >= 0.0))
        throw std::invalid_argument("permuted_refit: penalty entry must be non-negative");

    const VectorXd u = down.design_minus_j.transpose() * xj_perm;
    const VectorXd w = down.gram_inverse_minus_j * u;
    const double a = xj_perm.squaredNorm() + lam_jj - u.dot(w);
    if (!(a > 0.0))
        throw SingularSystemError("permuted_refit: non-positive Schur complement");

    const double s = xj_perm.dot(y) - w.dot(down.xty_minus_j);
    const double coef_j = s / a;

    VectorXd out(qm + 1);
    Index r = 0;
    for (Index k = 0; k < qm + 1; ++k) {
        if (k == down.removed_index) {
            out(k) = coef_j;
        } else {
            out(k) = down.beta_minus_j(r) - coef_j * w(r);
            ++r;
        }
    }
    return out;
}

}  // namespace twostage
