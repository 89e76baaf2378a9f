#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "twostage/dataset.hpp"
#include "twostage/lasso.hpp"
#include "twostage/second_stage.hpp"

namespace twostage {

// Estimators compared by the `estimate` command: the plain lasso, three serial
// two-stage pipelines refitting on the screened support, and the jointly
// cross-validated lasso-then-adaptive-ridge pipeline.
enum class EstimationMethod {
    lasso,           // L
    lasso_ols,       // L+O
    lasso_ridge,     // L+R
    lasso_adaptive,  // L+A
    joint_adaptive,  // L&A
};

inline const char* estimation_method_name(EstimationMethod m) {
    switch (m) {
        case EstimationMethod::lasso: return "L";
        case EstimationMethod::lasso_ols: return "L+O";
        case EstimationMethod::lasso_ridge: return "L+R";
        case EstimationMethod::lasso_adaptive: return "L+A";
        case EstimationMethod::joint_adaptive: return "L&A";
    }
    throw std::logic_error("estimation_method_name: unknown method");
}

inline EstimationMethod parse_estimation_method(const std::string& name) {
    if (name == "L") return EstimationMethod::lasso;
    if (name == "L+O") return EstimationMethod::lasso_ols;
    if (name == "L+R") return EstimationMethod::lasso_ridge;
    if (name == "L+A") return EstimationMethod::lasso_adaptive;
    if (name == "L&A") return EstimationMethod::joint_adaptive;
    throw std::invalid_argument("unknown estimation method: " + name);
}

inline FitKind second_stage_kind(EstimationMethod m) {
    switch (m) {
        case EstimationMethod::lasso_ols: return FitKind::ols;
        case EstimationMethod::lasso_ridge: return FitKind::ridge;
        case EstimationMethod::lasso_adaptive:
        case EstimationMethod::joint_adaptive: return FitKind::adaptive_ridge;
        case EstimationMethod::lasso: break;
    }
    throw std::logic_error("second_stage_kind: method has no second stage");
}

struct EstimationConfig {
    EstimationMethod method = EstimationMethod::lasso;
    int folds = 10;
    int lambda_count = 0;  // 0 picks the method default: 100, or 50 for L&A
    double lambda_ratio = 0.0;  // 0 picks default_grid_ratio(n, p)
    int mu_count = 25;
    double mu_lo = 1e-4;
    double mu_hi = 1e4;
    std::vector<double> lambda_grid_override;  // empty means data-driven grid
    std::vector<double> mu_grid_override;
    CvRule rule = CvRule::min;
    std::uint64_t seed = 0;
    LassoOptions lasso;
};

// One evaluated grid cell; mu is absent for cells of the lasso stage.
struct CvCell {
    double lambda = 0.0;
    std::optional<double> mu;
    double mean_error = 0.0;
};

struct EstimationResult {
    EstimationMethod method = EstimationMethod::lasso;
    VectorXd beta;  // full length p, zero off the screened support
    double chosen_lambda = 0.0;
    std::optional<double> chosen_mu;
    std::vector<Index> support;
    std::vector<CvCell> cv_table;
    bool empty_support = false;
};

// Squared prediction error of a linear rule under the population design
// covariance: (beta_hat - beta_star)' Sigma (beta_hat - beta_star).
inline double prediction_error(const VectorXd& beta_hat, const VectorXd& beta_star,
                               const MatrixXd& sigma_matrix) {
    if (beta_hat.size() != beta_star.size() || sigma_matrix.rows() != beta_hat.size() ||
        sigma_matrix.cols() != beta_hat.size())
        throw std::invalid_argument("prediction_error: dimension mismatch");
    const VectorXd d = beta_hat - beta_star;
    return d.dot(sigma_matrix * d);
}

namespace detail {

inline MatrixXd take_columns(const MatrixXd& x, const std::vector<Index>& cols) {
    MatrixXd out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
    return out;
}

// Held-out errors of the second stage over a mu grid, given one training-fold
// screening fit. An empty support scores the null prediction; a singular
// refit system scores infinity so the grid search never selects it.
inline std::vector<double> second_stage_fold_errors(const MatrixXd& xtr, const VectorXd& ytr,
                                                    const MatrixXd& xte, const VectorXd& yte,
                                                    const LassoFit& fit,
                                                    const std::vector<double>& mu_grid,
                                                    FitKind kind) {
    const double null_error = yte.squaredNorm() / yte.size();
    if (fit.support.empty()) return std::vector<double>(mu_grid.size(), null_error);
    const AdaptiveWeights w = adaptive_weights(fit);
    const MatrixXd xs = take_columns(xtr, w.support);
    const MatrixXd gram = xs.transpose() * xs;
    const VectorXd xty = xs.transpose() * ytr;
    const MatrixXd xte_s = take_columns(xte, w.support);
    std::vector<double> errors(mu_grid.size());
    for (std::size_t k = 0; k < mu_grid.size(); ++k) {
        MatrixXd g = gram;
        g.diagonal() += cleaning_penalty(w, mu_grid[k], kind);
        try {
            const VectorXd beta_s = checked_llt(g).solve(xty);
            errors[k] = (yte - xte_s * beta_s).squaredNorm() / yte.size();
        } catch (const SingularSystemError&) {
            errors[k] = std::numeric_limits<double>::infinity();
        }
    }
    return errors;
}

inline std::vector<double> estimation_lambda_grid(const MatrixXd& x, const VectorXd& y,
                                                  const EstimationConfig& cfg) {
    if (!cfg.lambda_grid_override.empty()) return cfg.lambda_grid_override;
    int count = cfg.lambda_count;
    if (count == 0) count = cfg.method == EstimationMethod::joint_adaptive ? 50 : 100;
    return default_lambda_grid(x, y, count, cfg.lambda_ratio);
}

inline std::vector<double> estimation_mu_grid(Index n, const EstimationConfig& cfg) {
    if (!cfg.mu_grid_override.empty()) {
        for (double mu : cfg.mu_grid_override)
            if (!(std::isfinite(mu) && mu >= 0.0))
                throw std::invalid_argument("mu grid entries must be finite and non-negative");
        return cfg.mu_grid_override;
    }
    return make_mu_grid(n, cfg.mu_count, cfg.mu_lo, cfg.mu_hi);
}

// Lasso solution at the last grid point, warm-started through the whole head
// of the grid so it agrees bitwise with the corresponding path iterate.
inline LassoFit fit_at_grid_point(const MatrixXd& x, const VectorXd& y,
                                  const std::vector<double>& grid, std::size_t index,
                                  const LassoOptions& opts) {
    const std::vector<double> head(grid.begin(), grid.begin() + static_cast<long>(index) + 1);
    auto path = lasso_path(x, y, head, opts);
    return std::move(path.fits.back());
}

}  // namespace detail

inline EstimationResult plain_lasso(const MatrixXd& x, const VectorXd& y,
                                    const EstimationConfig& cfg) {
    const auto grid = detail::estimation_lambda_grid(x, y, cfg);
    const auto sel = cv_select(x, y, grid, cfg.folds, cfg.rule, cfg.seed, cfg.lasso);
    EstimationResult res;
    res.method = EstimationMethod::lasso;
    res.chosen_lambda = sel.chosen_lambda;
    for (std::size_t k = 0; k < grid.size(); ++k)
        res.cv_table.push_back({grid[k], std::nullopt, sel.mean_errors[k]});
    const LassoFit fit = detail::fit_at_grid_point(x, y, grid, sel.chosen_index, cfg.lasso);
    res.beta = fit.beta;
    res.support = fit.support;
    res.empty_support = fit.support.empty();
    return res;
}

inline EstimationResult serial_two_stage(const MatrixXd& x, const VectorXd& y,
                                         const EstimationConfig& cfg) {
    const FitKind kind = second_stage_kind(cfg.method);
    if (cfg.method == EstimationMethod::joint_adaptive)
        throw std::invalid_argument("serial_two_stage: use joint_two_stage for L&A");

    const auto grid = detail::estimation_lambda_grid(x, y, cfg);
    const auto sel = cv_select(x, y, grid, cfg.folds, cfg.rule, cfg.seed, cfg.lasso);
    EstimationResult res;
    res.method = cfg.method;
    res.chosen_lambda = sel.chosen_lambda;
    for (std::size_t k = 0; k < grid.size(); ++k)
        res.cv_table.push_back({grid[k], std::nullopt, sel.mean_errors[k]});

    const LassoFit fit = detail::fit_at_grid_point(x, y, grid, sel.chosen_index, cfg.lasso);
    if (fit.support.empty()) {
        res.beta = VectorXd::Zero(x.cols());
        res.empty_support = true;
        return res;
    }
    const AdaptiveWeights w = adaptive_weights(fit);
    res.support = w.support;

    double mu = 0.0;
    if (cfg.method != EstimationMethod::lasso_ols) {
        // The whole serial process is cross-validated with lambda held fixed:
        // each fold rescreens on its training part before the ridge refit.
        const auto mu_grid = detail::estimation_mu_grid(x.rows(), cfg);
        std::vector<double> mean_errors(mu_grid.size(), 0.0);
        detail::for_each_fold(
            x, y, sel.fold_assignment, cfg.folds,
            [&](int, const MatrixXd& xtr, const VectorXd& ytr, const MatrixXd& xte,
                const VectorXd& yte) {
                const LassoFit fold_fit =
                    detail::fit_at_grid_point(xtr, ytr, grid, sel.chosen_index, cfg.lasso);
                const auto errors = detail::second_stage_fold_errors(xtr, ytr, xte, yte,
                                                                     fold_fit, mu_grid, kind);
                for (std::size_t k = 0; k < mu_grid.size(); ++k) mean_errors[k] += errors[k];
            });
        std::size_t best = 0;
        for (std::size_t k = 0; k < mu_grid.size(); ++k) {
            mean_errors[k] /= cfg.folds;
            res.cv_table.push_back({sel.chosen_lambda, mu_grid[k], mean_errors[k]});
            if (mean_errors[k] < mean_errors[best]) best = k;
        }
        mu = mu_grid[best];
    }
    res.chosen_mu = mu;
    res.beta = second_stage_fit(x, y, w, mu, kind).beta;
    return res;
}

inline EstimationResult joint_two_stage(const MatrixXd& x, const VectorXd& y,
                                        const EstimationConfig& cfg) {
    if (cfg.method != EstimationMethod::joint_adaptive)
        throw std::invalid_argument("joint_two_stage: method must be L&A");
    const FitKind kind = FitKind::adaptive_ridge;

    const auto grid = detail::estimation_lambda_grid(x, y, cfg);
    const auto mu_grid = detail::estimation_mu_grid(x.rows(), cfg);
    const auto fold = make_folds(x.rows(), cfg.folds, cfg.seed);

    std::vector<std::vector<double>> errors(grid.size(),
                                            std::vector<double>(mu_grid.size(), 0.0));
    detail::for_each_fold(x, y, fold, cfg.folds,
                          [&](int, const MatrixXd& xtr, const VectorXd& ytr, const MatrixXd& xte,
                              const VectorXd& yte) {
                              const auto path = lasso_path(xtr, ytr, grid, cfg.lasso);
                              for (std::size_t li = 0; li < grid.size(); ++li) {
                                  const auto cell = detail::second_stage_fold_errors(
                                      xtr, ytr, xte, yte, path.fits[li], mu_grid, kind);
                                  for (std::size_t mi = 0; mi < mu_grid.size(); ++mi)
                                      errors[li][mi] += cell[mi];
                              }
                          });

    EstimationResult res;
    res.method = cfg.method;
    std::size_t best_l = 0, best_m = 0;
    for (std::size_t li = 0; li < grid.size(); ++li)
        for (std::size_t mi = 0; mi < mu_grid.size(); ++mi) {
            errors[li][mi] /= cfg.folds;
            res.cv_table.push_back({grid[li], mu_grid[mi], errors[li][mi]});
            if (errors[li][mi] < errors[best_l][best_m]) {
                best_l = li;
                best_m = mi;
            }
        }
    res.chosen_lambda = grid[best_l];
    res.chosen_mu = mu_grid[best_m];

    const LassoFit fit = detail::fit_at_grid_point(x, y, grid, best_l, cfg.lasso);
    if (fit.support.empty()) {
        res.beta = VectorXd::Zero(x.cols());
        res.empty_support = true;
        return res;
    }
    const AdaptiveWeights w = adaptive_weights(fit);
    res.support = w.support;
    res.beta = second_stage_fit(x, y, w, *res.chosen_mu, kind).beta;
    return res;
}

inline EstimationResult estimate(const MatrixXd& x, const VectorXd& y,
                                 const EstimationConfig& cfg) {
    switch (cfg.method) {
        case EstimationMethod::lasso: return plain_lasso(x, y, cfg);
        case EstimationMethod::lasso_ols:
        case EstimationMethod::lasso_ridge:
        case EstimationMethod::lasso_adaptive: return serial_two_stage(x, y, cfg);
        case EstimationMethod::joint_adaptive: return joint_two_stage(x, y, cfg);
    }
    throw std::logic_error("estimate: unknown method");
}

inline EstimationResult estimate(const Dataset& data, const EstimationConfig& cfg) {
    check_dataset(data);
    return estimate(data.x, data.y, cfg);
}

}  // namespace twostage
