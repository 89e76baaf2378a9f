#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "twostage/dataset.hpp"
#include "twostage/rng.hpp"

namespace twostage {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Largest penalty with an all-zero solution: ||X^T y||_inf. Computed with the
// same per-column dot product as the coordinate sweeps, so a fit at exactly
// this value stays at zero instead of waking a coefficient by one ulp.
inline double lambda_max(const MatrixXd& x, const VectorXd& y) {
    if (x.rows() != y.size())
        throw std::invalid_argument("lambda_max: x rows must match y length");
    double lmax = 0.0;
    for (Index j = 0; j < x.cols(); ++j) lmax = std::max(lmax, std::abs(x.col(j).dot(y)));
    return lmax;
}

// Geometric grid from lam_hi down to lam_hi * ratio, `count` points. A single
// point keeps just lam_hi.
inline std::vector<double> lambda_grid(double lam_hi, int count, double ratio) {
    if (!(lam_hi > 0.0)) throw std::invalid_argument("lambda_grid: lam_hi must be positive");
    if (count < 1) throw std::invalid_argument("lambda_grid: count must be at least 1");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("lambda_grid: ratio must lie in (0,1)");
    if (count == 1) return {lam_hi};
    std::vector<double> grid(count);
    const double step = std::log(ratio) / (count - 1);
    for (int k = 0; k < count; ++k) grid[k] = lam_hi * std::exp(step * k);
    return grid;
}

struct LassoOptions {
    double tol = 1e-7;           // sweep stops when max |delta beta| < tol * max(1, ||beta||_inf)
    long max_sweeps = 100000;
    bool track_objective = false;
};

// Optimality tolerance certified for converged fits: active coordinates solve
// x_j'(y - X b) = lambda sign(b_j) within kKktTol * max(1, lambda), inactive
// ones satisfy |x_j'(y - X b)| <= lambda * (1 + kKktTol).
inline constexpr double kKktTol = 1e-6;

struct LassoFit {
    double lambda = 0.0;
    VectorXd beta;
    std::vector<Index> support;  // sorted indices of exact nonzeros
    long n_iters = 0;            // coordinate sweeps performed
    bool converged = false;
    std::vector<double> objective_trace;  // filled only when requested
};

namespace detail {

struct CdWorkspace {
    VectorXd colsq;  // squared column norms of x
};

inline CdWorkspace make_workspace(const MatrixXd& x) {
    CdWorkspace ws;
    ws.colsq = x.colwise().squaredNorm();
    return ws;
}

// One pass of cyclic coordinate updates over `indices`; returns max |delta|.
template <typename IndexRange>
inline double cd_sweep(const MatrixXd& x, const CdWorkspace& ws, double lambda,
                       VectorXd& beta, VectorXd& resid, const IndexRange& indices) {
    double max_delta = 0.0;
    for (Index j : indices) {
        const double cs = ws.colsq(j);
        if (cs <= 0.0) continue;
        const double old = beta(j);
        const double z = x.col(j).dot(resid) + cs * old;
        const double bj = soft_threshold(z, lambda) / cs;
        const double delta = bj - old;
        if (delta != 0.0) {
            resid -= x.col(j) * delta;
            beta(j) = bj;
            max_delta = std::max(max_delta, std::abs(delta));
        }
    }
    return max_delta;
}

inline double lasso_objective(const VectorXd& resid, const VectorXd& beta, double lambda) {
    return 0.5 * resid.squaredNorm() + lambda * beta.lpNorm<1>();
}

// Coordinate descent with an active-set strategy: full pass to pick up
// violators, then passes restricted to the current support until stable,
// repeated until a full pass changes nothing. A fit only counts as converged
// once the subgradient conditions hold at kKktTol, so a stalled sweep cannot
// stop short of optimality.
inline LassoFit lasso_cd(const MatrixXd& x, const VectorXd& y, double lambda,
                         const VectorXd* warm, const LassoOptions& opts,
                         const CdWorkspace& ws) {
    const Index p = x.cols();
    LassoFit fit;
    fit.lambda = lambda;
    fit.beta = warm ? *warm : VectorXd::Zero(p);
    VectorXd resid = y - x * fit.beta;

    std::vector<Index> all(p);
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<Index> active;

    const auto tol_scale = [&]() {
        const double bmax = fit.beta.size() ? fit.beta.cwiseAbs().maxCoeff() : 0.0;
        return opts.tol * std::max(1.0, bmax);
    };
    const auto record = [&]() {
        if (opts.track_objective)
            fit.objective_trace.push_back(lasso_objective(resid, fit.beta, lambda));
    };
    const auto kkt_ok = [&]() {
        const double tol_active = kKktTol * std::max(1.0, lambda);
        const double bound_inactive = lambda > 0.0 ? lambda * (1.0 + kKktTol) : tol_active;
        for (Index j = 0; j < p; ++j) {
            const double g = x.col(j).dot(resid);
            if (fit.beta(j) != 0.0) {
                const double sign = fit.beta(j) > 0.0 ? 1.0 : -1.0;
                if (std::abs(g - lambda * sign) > tol_active) return false;
            } else if (std::abs(g) > bound_inactive) {
                return false;
            }
        }
        return true;
    };

    bool converged = false;
    long sweeps = 0;
    while (sweeps < opts.max_sweeps) {
        const double full_delta = cd_sweep(x, ws, lambda, fit.beta, resid, all);
        ++sweeps;
        record();
        if (full_delta < tol_scale()) {
            if (kkt_ok()) {
                converged = true;
                break;
            }
            continue;
        }
        active.clear();
        for (Index j = 0; j < p; ++j)
            if (fit.beta(j) != 0.0) active.push_back(j);
        while (sweeps < opts.max_sweeps) {
            const double d = cd_sweep(x, ws, lambda, fit.beta, resid, active);
            ++sweeps;
            record();
            if (d < tol_scale()) break;
        }
    }
    fit.converged = converged;
    fit.n_iters = sweeps;
    for (Index j = 0; j < p; ++j)
        if (fit.beta(j) != 0.0) fit.support.push_back(j);
    return fit;
}

}  // namespace detail

inline LassoFit lasso_fit(const MatrixXd& x, const VectorXd& y, double lambda,
                          const VectorXd* warm = nullptr, const LassoOptions& opts = {}) {
    if (x.rows() != y.size())
        throw std::invalid_argument("lasso_fit: x rows must match y length");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lasso_fit: lambda must be finite and non-negative");
    if (warm && warm->size() != x.cols())
        throw std::invalid_argument("lasso_fit: warm start has wrong length");
    const auto ws = detail::make_workspace(x);
    return detail::lasso_cd(x, y, lambda, warm, opts, ws);
}

struct RegularizationPath {
    std::vector<double> lambdas;  // strictly decreasing
    std::vector<LassoFit> fits;
};

// Warm-started fits over a strictly decreasing grid.
inline RegularizationPath lasso_path(const MatrixXd& x, const VectorXd& y,
                                     const std::vector<double>& lambdas,
                                     const LassoOptions& opts = {}) {
    if (lambdas.empty()) throw std::invalid_argument("lasso_path: empty grid");
    for (std::size_t k = 1; k < lambdas.size(); ++k)
        if (!(lambdas[k] < lambdas[k - 1]))
            throw std::invalid_argument("lasso_path: grid must be strictly decreasing");
    const auto ws = detail::make_workspace(x);
    RegularizationPath path;
    path.lambdas = lambdas;
    path.fits.reserve(lambdas.size());
    const VectorXd* warm = nullptr;
    for (double lam : lambdas) {
        path.fits.push_back(detail::lasso_cd(x, y, lam, warm, opts, ws));
        warm = &path.fits.back().beta;
    }
    return path;
}

enum class CvRule { min, one_se };

struct CvSelection {
    double chosen_lambda = 0.0;
    std::size_t chosen_index = 0;
    CvRule rule = CvRule::min;
    std::vector<double> mean_errors;  // one per grid point
    std::vector<double> std_errors;
    std::vector<int> fold_assignment;
};

// Shuffled round-robin assignment into near-equal folds (sizes differ by <= 1).
inline std::vector<int> make_folds(Index n, int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
    if (n < n_folds) throw std::invalid_argument("make_folds: more folds than observations");
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    auto eng = make_engine(seed);
    std::shuffle(order.begin(), order.end(), eng);
    std::vector<int> fold(n);
    for (Index i = 0; i < n; ++i) fold[order[i]] = static_cast<int>(i % n_folds);
    return fold;
}

namespace detail {

template <typename FoldFitEval>
inline void for_each_fold(const MatrixXd& x, const VectorXd& y, const std::vector<int>& fold,
                          int n_folds, FoldFitEval&& body) {
    const Index n = x.rows();
    for (int f = 0; f < n_folds; ++f) {
        std::vector<Index> tr, te;
        for (Index i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(i);
        if (te.empty() || tr.empty())
            throw std::invalid_argument("cross-validation fold with zero observations");
        MatrixXd xtr(static_cast<Index>(tr.size()), x.cols());
        VectorXd ytr(static_cast<Index>(tr.size()));
        MatrixXd xte(static_cast<Index>(te.size()), x.cols());
        VectorXd yte(static_cast<Index>(te.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
            xtr.row(static_cast<Index>(i)) = x.row(tr[i]);
            ytr(static_cast<Index>(i)) = y(tr[i]);
        }
        for (std::size_t i = 0; i < te.size(); ++i) {
            xte.row(static_cast<Index>(i)) = x.row(te[i]);
            yte(static_cast<Index>(i)) = y(te[i]);
        }
        body(f, xtr, ytr, xte, yte);
    }
}

inline std::size_t pick_min_index(const std::vector<double>& means) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < means.size(); ++k)
        if (means[k] < means[best]) best = k;
    return best;
}

}  // namespace detail

// K-fold selection of lambda by held-out mean squared error of the penalized
// estimator. Grids are decreasing, so index 0 is the largest lambda; ties and
// the one-SE rule both resolve toward larger lambda.
inline CvSelection cv_select(const MatrixXd& x, const VectorXd& y,
                             const std::vector<double>& lambdas, int n_folds, CvRule rule,
                             std::uint64_t seed, const LassoOptions& opts = {}) {
    if (lambdas.empty()) throw std::invalid_argument("cv_select: empty grid");
    CvSelection sel;
    sel.rule = rule;
    sel.fold_assignment = make_folds(x.rows(), n_folds, seed);
    const std::size_t m = lambdas.size();
    std::vector<std::vector<double>> fold_mse(m);
    detail::for_each_fold(x, y, sel.fold_assignment, n_folds,
                          [&](int, const MatrixXd& xtr, const VectorXd& ytr, const MatrixXd& xte,
                              const VectorXd& yte) {
                              const auto path = lasso_path(xtr, ytr, lambdas, opts);
                              for (std::size_t k = 0; k < m; ++k) {
                                  const double mse =
                                      (yte - xte * path.fits[k].beta).squaredNorm() / yte.size();
                                  fold_mse[k].push_back(mse);
                              }
                          });
    sel.mean_errors.resize(m);
    sel.std_errors.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& v = fold_mse[k];
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double ss = 0.0;
        for (double e : v) ss += (e - mean) * (e - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
        sel.mean_errors[k] = mean;
        sel.std_errors[k] = sd / std::sqrt(static_cast<double>(v.size()));
    }
    const std::size_t min_idx = detail::pick_min_index(sel.mean_errors);
    if (rule == CvRule::min) {
        sel.chosen_index = min_idx;
    } else {
        const double cutoff = sel.mean_errors[min_idx] + sel.std_errors[min_idx];
        std::size_t k = 0;
        while (k < m && sel.mean_errors[k] > cutoff) ++k;
        sel.chosen_index = k;
    }
    sel.chosen_lambda = lambdas[sel.chosen_index];
    return sel;
}

// Default grid density: a coarser floor when p > n, where the path saturates
// early, and a finer one otherwise.
inline double default_grid_ratio(Index n, Index p) { return p > n ? 1e-3 : 1e-4; }

inline std::vector<double> default_lambda_grid(const MatrixXd& x, const VectorXd& y,
                                               int count = 100, double ratio = 0.0) {
    if (ratio == 0.0) ratio = default_grid_ratio(x.rows(), x.cols());
    return lambda_grid(lambda_max(x, y), count, ratio);
}

}  // namespace twostage
