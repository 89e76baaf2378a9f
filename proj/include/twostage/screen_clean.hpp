#pragma once

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "twostage/dataset.hpp"
#include "twostage/lasso.hpp"
#include "twostage/penalized_solver.hpp"
#include "twostage/rng.hpp"
#include "twostage/second_stage.hpp"
#include "twostage/stats.hpp"

namespace twostage {

class DegenerateDfError : public std::runtime_error {
  public:
    explicit DegenerateDfError(const std::string& what) : std::runtime_error(what) {}
};

struct SplitData {
    Dataset d1;  // screening/tuning half, ceil(n/2) rows
    Dataset d2;  // cleaning half
    std::vector<Index> d1_rows;
    std::vector<Index> d2_rows;
};

// Seeded permutation split into halves of size ceil(n/2) and floor(n/2).
inline SplitData split_half(const Dataset& data, std::uint64_t seed) {
    check_dataset(data);
    const Index n = data.n();
    if (n < 2) throw std::invalid_argument("split_half: need at least 2 observations");
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    auto eng = make_engine(seed);
    std::shuffle(order.begin(), order.end(), eng);
    const Index n1 = (n + 1) / 2;
    SplitData split;
    split.d1_rows.assign(order.begin(), order.begin() + n1);
    split.d2_rows.assign(order.begin() + n1, order.end());
    std::sort(split.d1_rows.begin(), split.d1_rows.end());
    std::sort(split.d2_rows.begin(), split.d2_rows.end());
    split.d1 = data.rows(split.d1_rows);
    split.d2 = data.rows(split.d2_rows);
    return split;
}

struct ScreenResult {
    double chosen_lambda = 0.0;
    AdaptiveWeights weights;  // support and transferred penalties
    VectorXd beta_screen;     // full-length first-stage coefficients
    CvSelection cv;

    const std::vector<Index>& support() const { return weights.support; }
    bool empty() const { return weights.support.empty(); }
};

// First stage: cross-validated lasso on the screening half. No cap is applied
// to the selected support size.
inline ScreenResult screen(const Dataset& d1, int folds, int lambda_count, double lambda_ratio,
                           CvRule rule, std::uint64_t seed, const LassoOptions& opts = {}) {
    check_dataset(d1);
    const auto grid = default_lambda_grid(d1.x, d1.y, lambda_count, lambda_ratio);
    ScreenResult sr;
    sr.cv = cv_select(d1.x, d1.y, grid, folds, rule, seed, opts);
    sr.chosen_lambda = sr.cv.chosen_lambda;
    const std::vector<double> head(grid.begin(),
                                   grid.begin() + static_cast<long>(sr.cv.chosen_index) + 1);
    const auto path = lasso_path(d1.x, d1.y, head, opts);
    const LassoFit& final_fit = path.fits.back();
    sr.weights = adaptive_weights(final_fit);
    sr.beta_screen = final_fit.beta;
    return sr;
}

// Cross-validated ridge strength with the screened weights frozen: folds refit
// only the penalized least-squares coefficients, never the support or weights.
inline double select_mu(const Dataset& d, const AdaptiveWeights& w, int folds,
                        const std::vector<double>& mu_grid, FitKind kind, std::uint64_t seed,
                        std::vector<double>* mean_errors_out = nullptr) {
    check_dataset(d);
    if (w.support.empty()) throw EmptySupportError("select_mu: screened support is empty");
    if (mu_grid.empty()) throw std::invalid_argument("select_mu: empty mu grid");
    const MatrixXd xs = d.columns(w.support);
    const auto fold = make_folds(d.n(), folds, seed);
    std::vector<double> mean_errors(mu_grid.size(), 0.0);
    detail::for_each_fold(xs, d.y, fold, folds,
                          [&](int, const MatrixXd& xtr, const VectorXd& ytr, const MatrixXd& xte,
                              const VectorXd& yte) {
                              for (std::size_t m = 0; m < mu_grid.size(); ++m) {
                                  const VectorXd beta = solve_penalized(
                                      xtr, ytr, cleaning_penalty(w, mu_grid[m], kind));
                                  mean_errors[m] +=
                                      (yte - xte * beta).squaredNorm() / yte.size();
                              }
                          });
    for (auto& e : mean_errors) e /= folds;
    std::size_t best = 0;
    for (std::size_t m = 1; m < mu_grid.size(); ++m)
        if (mean_errors[m] < mean_errors[best]) best = m;
    if (mean_errors_out) *mean_errors_out = mean_errors;
    return mu_grid[best];
}

// Relative fit improvement of the larger model, Eq-style: (rss0 - rss1)/rss1.
inline double f_statistic(double rss0, double rss1) {
    if (!(rss1 > 0.0)) throw std::invalid_argument("f_statistic: rss1 must be positive");
    return (rss0 - rss1) / rss1;
}

struct PermutationFResult {
    double f_observed = 0.0;
    double pvalue = 1.0;
};

// Permutation null for one tested column of an already-factored system. The
// reduced model (rss0) is fixed across permutations; each draw replaces the
// tested column with a row permutation of itself and refits through the
// downdated inverse in O(q^2 + qn). The observed statistic goes through the
// same refit path, so a permutation-invariant column ties exactly.
inline PermutationFResult permutation_f_core(const PenalizedSystemCache& cache, Index k,
                                             int b_permutations, std::mt19937_64& eng,
                                             std::vector<double>* f_perm = nullptr) {
    if (b_permutations < 1)
        throw std::invalid_argument("permutation_f_core: need at least one permutation");
    const Index n = cache.n();
    const auto down = inverse_downdate(cache, k);
    const VectorXd resid0 = cache.response - down.design_minus_j * down.beta_minus_j;
    const double rss0 = resid0.squaredNorm();

    VectorXd rest(down.q_minus());
    const auto refit_f = [&](const VectorXd& col) {
        const VectorXd beta = permuted_refit(down, col, cache.response, cache.penalty(k));
        Index r = 0;
        for (Index c = 0; c < beta.size(); ++c)
            if (c != k) rest(r++) = beta(c);
        const VectorXd resid =
            cache.response - down.design_minus_j * rest - col * beta(k);
        return f_statistic(rss0, resid.squaredNorm());
    };

    PermutationFResult result;
    result.f_observed = refit_f(cache.design.col(k));

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    VectorXd xb(n);
    long count = 0;
    if (f_perm) f_perm->reserve(b_permutations);
    for (int b = 0; b < b_permutations; ++b) {
        std::shuffle(perm.begin(), perm.end(), eng);
        for (Index i = 0; i < n; ++i) xb(i) = cache.design(perm[i], k);
        const double f_b = refit_f(xb);
        if (f_b >= result.f_observed) ++count;
        if (f_perm) f_perm->push_back(f_b);
    }
    result.pvalue = static_cast<double>(1 + count) / static_cast<double>(b_permutations + 1);
    return result;
}

// Standalone permutation test for global variable j within the screened set.
inline PermutationFResult permutation_f_test(const Dataset& d2, const AdaptiveWeights& w,
                                             double mu, Index j, int b_permutations,
                                             std::uint64_t seed,
                                             FitKind kind = FitKind::adaptive_ridge) {
    const auto it = std::find(w.support.begin(), w.support.end(), j);
    if (it == w.support.end())
        throw std::invalid_argument("permutation_f_test: variable not in screened support");
    const Index k = static_cast<Index>(it - w.support.begin());
    const MatrixXd xs = d2.columns(w.support);
    const auto cache = gram_inverse(xs, d2.y, cleaning_penalty(w, mu, kind));
    auto eng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(j)));
    return permutation_f_core(cache, k, b_permutations, eng);
}

struct CleanResult {
    std::map<Index, double> pvalues;
    std::map<Index, double> adjusted;
    std::vector<Index> discoveries;  // sorted global indices
    std::map<Index, double> f_observed;
    double mu = 0.0;
    int b_permutations = 0;
};

// Second stage: permutation F-test for every screened variable on the cleaning
// half, sharing one factored system across variables, followed by
// Benjamini-Hochberg selection at level alpha.
inline CleanResult clean(const Dataset& d2, const ScreenResult& sr, double mu,
                         int b_permutations, double alpha, std::uint64_t seed,
                         FitKind kind = FitKind::adaptive_ridge) {
    check_dataset(d2);
    if (sr.empty()) throw EmptySupportError("clean: screened support is empty");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("clean: alpha must lie in (0,1)");
    const auto& support = sr.support();
    const MatrixXd xs = d2.columns(support);
    const auto cache = gram_inverse(xs, d2.y, cleaning_penalty(sr.weights, mu, kind));

    CleanResult result;
    result.mu = mu;
    result.b_permutations = b_permutations;
    std::vector<double> pvals(support.size());
    for (std::size_t k = 0; k < support.size(); ++k) {
        const Index j = support[k];
        auto eng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(j)));
        const auto r = permutation_f_core(cache, static_cast<Index>(k), b_permutations, eng);
        pvals[k] = r.pvalue;
        result.pvalues[j] = r.pvalue;
        result.f_observed[j] = r.f_observed;
    }
    const auto adj = bh_adjust(pvals);
    for (std::size_t k = 0; k < support.size(); ++k) {
        result.adjusted[support[k]] = adj[k];
        if (adj[k] <= alpha) result.discoveries.push_back(support[k]);
    }
    return result;
}

// Effective degrees of freedom of the penalized fit, trace of the hat matrix
// X (X^T X + Lambda)^{-1} X^T.
inline double model_degrees_of_freedom(const PenalizedSystemCache& cache) {
    double df = static_cast<double>(cache.q());
    for (Index k = 0; k < cache.q(); ++k)
        df -= cache.gram_inverse(k, k) * cache.penalty(k);
    return df;
}

namespace detail {

inline double residual_df(const PenalizedSystemCache& cache) {
    const double df1 = model_degrees_of_freedom(cache);
    const double nu = static_cast<double>(cache.n()) - df1;
    if (!(nu > 0.0))
        throw DegenerateDfError("standard test: residual degrees of freedom non-positive");
    return nu;
}

}  // namespace detail

// Parametric reference with effective degrees of freedom: the partial
// statistic ((rss0 - rss1)/ddf) / (rss1/(n - df1)) is referred to
// F(ddf, n - df1), where df1 and df0 are the hat-matrix traces of the larger
// and smaller penalized models and ddf = df1 - df0. With zero penalties
// ddf = 1 and this is the classical partial F-test. A column whose removal
// frees no effective parameter (ddf ~ 0, only possible under collinearity)
// is untestable and gets p-value 1.
inline std::vector<double> standard_f_pvalues(const PenalizedSystemCache& cache) {
    const double nu = detail::residual_df(cache);
    const double df1 = static_cast<double>(cache.n()) - nu;
    const double rss1 = cache.rss();
    std::vector<double> out(cache.q());
    for (Index k = 0; k < cache.q(); ++k) {
        const auto down = inverse_downdate(cache, k);
        const double rss0 =
            (cache.response - down.design_minus_j * down.beta_minus_j).squaredNorm();
        double df0 = static_cast<double>(down.q_minus());
        Index m = 0;
        for (Index c = 0; c < cache.q(); ++c) {
            if (c == k) continue;
            df0 -= down.gram_inverse_minus_j(m, m) * cache.penalty(c);
            ++m;
        }
        const double ddf = df1 - df0;
        const double f = f_statistic(rss0, rss1);
        if (f <= 0.0 || !(ddf > 1e-12)) {
            out[k] = 1.0;
            continue;
        }
        boost::math::fisher_f dist(ddf, nu);
        out[k] = boost::math::cdf(boost::math::complement(dist, f * nu / ddf));
    }
    return out;
}

// Two-sided t-tests with the sandwich covariance of the penalized estimator,
// sigma^2 M X^T X M, and trace-based residual degrees of freedom.
inline std::vector<double> standard_t_pvalues(const PenalizedSystemCache& cache) {
    const double nu = detail::residual_df(cache);
    const double sigma2 = cache.rss() / nu;
    const MatrixXd gram = cache.design.transpose() * cache.design;
    const MatrixXd mgm = cache.gram_inverse * gram * cache.gram_inverse;
    const VectorXd beta = cache.beta();
    boost::math::students_t dist(nu);
    std::vector<double> out(cache.q());
    for (Index k = 0; k < cache.q(); ++k) {
        const double var = sigma2 * mgm(k, k);
        if (!(var > 0.0)) {
            out[k] = 1.0;
            continue;
        }
        const double t = beta(k) / std::sqrt(var);
        out[k] = t == 0.0 ? 1.0
                          : 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
    return out;
}

namespace detail {

inline PenalizedSystemCache cleaning_cache(const Dataset& d2, const ScreenResult& sr, double mu,
                                           FitKind kind) {
    if (sr.empty()) throw EmptySupportError("standard test: screened support is empty");
    return gram_inverse(d2.columns(sr.support()), d2.y, cleaning_penalty(sr.weights, mu, kind));
}

inline Index support_position(const ScreenResult& sr, Index j) {
    const auto& s = sr.support();
    const auto it = std::find(s.begin(), s.end(), j);
    if (it == s.end())
        throw std::invalid_argument("standard test: variable not in screened support");
    return static_cast<Index>(it - s.begin());
}

}  // namespace detail

inline double standard_f_pvalue(const Dataset& d2, const ScreenResult& sr, double mu, Index j,
                                FitKind kind = FitKind::adaptive_ridge) {
    const auto cache = detail::cleaning_cache(d2, sr, mu, kind);
    return standard_f_pvalues(cache)[detail::support_position(sr, j)];
}

inline double standard_t_pvalue(const Dataset& d2, const ScreenResult& sr, double mu, Index j,
                                FitKind kind = FitKind::adaptive_ridge) {
    const auto cache = detail::cleaning_cache(d2, sr, mu, kind);
    return standard_t_pvalues(cache)[detail::support_position(sr, j)];
}

// Per-variable simple-regression two-sided t-tests on the full dataset, with
// an intercept; constant columns get p-value 1 and are flagged.
inline std::vector<double> univariate_pvalues(const Dataset& data,
                                              std::vector<Index>* degenerate = nullptr) {
    check_dataset(data);
    const Index n = data.n();
    if (n < 3) throw std::invalid_argument("univariate_pvalues: need at least 3 observations");
    const double my = data.y.mean();
    const VectorXd yc = data.y.array() - my;
    const double syy = yc.squaredNorm();
    boost::math::students_t dist(static_cast<double>(n - 2));
    std::vector<double> out(data.p());
    for (Index j = 0; j < data.p(); ++j) {
        const VectorXd xc = data.x.col(j).array() - data.x.col(j).mean();
        const double sxx = xc.squaredNorm();
        if (sxx <= 1e-24 * std::max(1e-300, data.x.col(j).squaredNorm())) {
            out[j] = 1.0;
            if (degenerate) degenerate->push_back(j);
            continue;
        }
        const double sxy = xc.dot(yc);
        const double b = sxy / sxx;
        const double rss = std::max(0.0, syy - b * sxy);
        if (rss <= 0.0) {
            out[j] = b == 0.0 ? 1.0 : 0.0;
            continue;
        }
        const double se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
        const double t = b / se;
        out[j] = t == 0.0 ? 1.0
                          : 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
    return out;
}

struct ScreenCleanConfig {
    int folds = 10;
    int lambda_count = 100;
    double lambda_ratio = 0.0;  // 0 selects the shape-based default
    CvRule rule = CvRule::min;
    int mu_count = 25;
    double mu_lo = 1e-4;
    double mu_hi = 1e4;
    std::optional<double> fixed_mu;
    int b_permutations = 1000;
    double alpha = 0.05;
    FitKind kind = FitKind::adaptive_ridge;
    bool mu_on_d2 = false;  // tune the ridge strength on the cleaning half instead
    std::uint64_t seed = 0;
    LassoOptions lasso;
};

struct ScreenCleanResult {
    SplitData split;
    ScreenResult screen;
    double mu = std::numeric_limits<double>::quiet_NaN();
    CleanResult clean;
    bool empty_support = false;
};

namespace stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t screen = 2;
inline constexpr std::uint64_t mu = 3;
inline constexpr std::uint64_t clean = 4;
}  // namespace stream

// Ridge strength for the cleaning model: zero for OLS, the fixed override if
// set, otherwise cross-validated on the tuning half with frozen weights.
inline double choose_cleaning_mu(const SplitData& split, const ScreenResult& sr,
                                 const ScreenCleanConfig& cfg) {
    if (cfg.kind == FitKind::ols) return 0.0;
    if (cfg.fixed_mu) return *cfg.fixed_mu;
    const Dataset& tune = cfg.mu_on_d2 ? split.d2 : split.d1;
    const auto grid = make_mu_grid(tune.n(), cfg.mu_count, cfg.mu_lo, cfg.mu_hi);
    return select_mu(tune, sr.weights, cfg.folds, grid, cfg.kind,
                     derive_seed(cfg.seed, stream::mu));
}

inline ScreenCleanResult screen_and_clean(const Dataset& data, const ScreenCleanConfig& cfg) {
    ScreenCleanResult result;
    result.split = split_half(data, derive_seed(cfg.seed, stream::split));
    result.screen = screen(result.split.d1, cfg.folds, cfg.lambda_count, cfg.lambda_ratio,
                           cfg.rule, derive_seed(cfg.seed, stream::screen), cfg.lasso);
    if (result.screen.empty()) {
        result.empty_support = true;
        return result;
    }
    result.mu = choose_cleaning_mu(result.split, result.screen, cfg);
    result.clean = clean(result.split.d2, result.screen, result.mu, cfg.b_permutations,
                         cfg.alpha, derive_seed(cfg.seed, stream::clean), cfg.kind);
    return result;
}

}  // namespace twostage
