#pragma once

#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>

#include "twostage/estimation.hpp"
#include "twostage/screen_clean.hpp"
#include "twostage/simulation.hpp"
#include "twostage/stats.hpp"

namespace twostage {

// Everything the replicate driver can run: the five estimators plus the
// inference pipelines (screen-and-clean with three cleaning fits, the two
// parametric calibrations of the adaptive-ridge cleaner, and the univariate
// baseline that skips screening entirely).
enum class Method {
    lasso,
    lasso_ols,
    lasso_ridge,
    lasso_adaptive,
    joint_adaptive,
    sc_ar,
    sc_ridge,
    sc_ols,
    sc_ar_f,
    sc_ar_t,
    univar,
};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::lasso: return "L";
        case Method::lasso_ols: return "L+O";
        case Method::lasso_ridge: return "L+R";
        case Method::lasso_adaptive: return "L+A";
        case Method::joint_adaptive: return "L&A";
        case Method::sc_ar: return "sc-ar";
        case Method::sc_ridge: return "sc-ridge";
        case Method::sc_ols: return "sc-ols";
        case Method::sc_ar_f: return "sc-ar-f";
        case Method::sc_ar_t: return "sc-ar-t";
        case Method::univar: return "univar";
    }
    throw std::logic_error("method_name: unknown method");
}

inline Method parse_method(const std::string& name) {
    for (auto m : {Method::lasso, Method::lasso_ols, Method::lasso_ridge, Method::lasso_adaptive,
                   Method::joint_adaptive, Method::sc_ar, Method::sc_ridge, Method::sc_ols,
                   Method::sc_ar_f, Method::sc_ar_t, Method::univar})
        if (name == method_name(m)) return m;
    throw std::invalid_argument("unknown method: " + name);
}

inline bool is_estimation_method(Method m) {
    switch (m) {
        case Method::lasso:
        case Method::lasso_ols:
        case Method::lasso_ridge:
        case Method::lasso_adaptive:
        case Method::joint_adaptive: return true;
        default: return false;
    }
}

inline bool uses_screen_clean(Method m) {
    switch (m) {
        case Method::sc_ar:
        case Method::sc_ridge:
        case Method::sc_ols:
        case Method::sc_ar_f:
        case Method::sc_ar_t: return true;
        default: return false;
    }
}

inline EstimationMethod to_estimation_method(Method m) {
    switch (m) {
        case Method::lasso: return EstimationMethod::lasso;
        case Method::lasso_ols: return EstimationMethod::lasso_ols;
        case Method::lasso_ridge: return EstimationMethod::lasso_ridge;
        case Method::lasso_adaptive: return EstimationMethod::lasso_adaptive;
        case Method::joint_adaptive: return EstimationMethod::joint_adaptive;
        default: break;
    }
    throw std::logic_error("to_estimation_method: not an estimation method");
}

inline FitKind cleaning_kind(Method m) {
    switch (m) {
        case Method::sc_ar:
        case Method::sc_ar_f:
        case Method::sc_ar_t: return FitKind::adaptive_ridge;
        case Method::sc_ridge: return FitKind::ridge;
        case Method::sc_ols: return FitKind::ols;
        default: break;
    }
    throw std::logic_error("cleaning_kind: not a screen-and-clean method");
}

struct ExperimentConfig {
    DesignSpec design;  // per-replicate data seeds override the spec's seed
    std::vector<Method> methods{Method::sc_ar};
    int replicates = 1;
    double alpha = 0.05;
    int b_permutations = 1000;
    int folds = 10;
    int lambda_count = 0;  // 0 picks the per-pipeline default
    double lambda_ratio = 0.0;
    int mu_count = 25;
    double mu_lo = 1e-4;
    double mu_hi = 1e4;
    CvRule rule = CvRule::min;
    std::optional<double> fixed_mu;
    bool mu_on_d2 = false;
    bool fixed_truth = false;  // draw S* and beta* once, redraw X and noise per replicate
    bool standardize = false;  // center y, center and unit-scale columns before fitting
    int threads = 1;
    std::uint64_t seed = 0;
    LassoOptions lasso;
};

struct ReplicateOutcome {
    int replicate = 0;
    Method method = Method::sc_ar;
    bool failed = false;
    std::string error;
    bool empty_support = false;

    double chosen_lambda = std::numeric_limits<double>::quiet_NaN();
    double chosen_mu = std::numeric_limits<double>::quiet_NaN();
    double prediction_error = std::numeric_limits<double>::quiet_NaN();

    double fdp = std::numeric_limits<double>::quiet_NaN();
    double sen = std::numeric_limits<double>::quiet_NaN();
    long n_screened = 0;
    long n_discoveries = 0;
    long nulls_tested = 0;
    long null_raw_rejections = 0;  // raw-level rejections among tested nulls
    std::vector<Index> discoveries;
    std::vector<Index> ranking;  // tested variables by ascending p-value
};

struct MethodSummary {
    Method method = Method::sc_ar;
    long completed = 0;
    long failed = 0;
    double mean_prediction_error = std::numeric_limits<double>::quiet_NaN();
    double sd_prediction_error = std::numeric_limits<double>::quiet_NaN();
    double mean_fdp = std::numeric_limits<double>::quiet_NaN();
    double sd_fdp = std::numeric_limits<double>::quiet_NaN();
    double mean_sen = std::numeric_limits<double>::quiet_NaN();
    double sd_sen = std::numeric_limits<double>::quiet_NaN();
    double mean_screened = std::numeric_limits<double>::quiet_NaN();
    double mean_discoveries = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> pooled_fpr;  // raw tests at alpha, pooled over screened nulls
    SenFdrCurve curve;                 // empty for estimation methods
};

struct ExperimentResult {
    std::vector<ReplicateOutcome> rows;              // replicate-major, methods in config order
    std::vector<std::vector<Index>> truth_supports;  // indexed by replicate
    std::vector<MethodSummary> summaries;
};

namespace stream {
inline constexpr std::uint64_t truth = 9;
inline constexpr std::uint64_t data = 10;
inline constexpr std::uint64_t estimation = 11;
inline constexpr std::uint64_t inference = 12;
}  // namespace stream

namespace detail {

inline void fill_inference_metrics(ReplicateOutcome& row,
                                   const std::vector<std::pair<Index, double>>& pvalues,
                                   const std::vector<Index>& discoveries,
                                   const std::vector<Index>& truth, Index p, double alpha) {
    row.n_screened = static_cast<long>(pvalues.size());
    row.n_discoveries = static_cast<long>(discoveries.size());
    row.discoveries = discoveries;
    std::tie(row.fdp, row.sen) = fdp_sen(confusion(discoveries, truth, p));
    std::vector<char> relevant(p, 0);
    for (Index j : truth) relevant[j] = 1;
    for (const auto& [j, pv] : pvalues) {
        if (relevant[j]) continue;
        ++row.nulls_tested;
        if (pv <= alpha) ++row.null_raw_rejections;
    }
    std::vector<std::pair<double, Index>> order;
    order.reserve(pvalues.size());
    for (const auto& [j, pv] : pvalues) order.emplace_back(pv, j);
    std::stable_sort(order.begin(), order.end());
    row.ranking.reserve(order.size());
    for (const auto& [pv, j] : order) row.ranking.push_back(j);
}

inline ReplicateOutcome run_estimation_method(Method m, const SimulatedDataset& sim,
                                              const ExperimentConfig& cfg, std::uint64_t est_seed,
                                              const VectorXd* column_scale) {
    ReplicateOutcome row;
    row.method = m;
    EstimationConfig ecfg;
    ecfg.method = to_estimation_method(m);
    ecfg.folds = cfg.folds;
    ecfg.lambda_count = cfg.lambda_count;
    ecfg.lambda_ratio = cfg.lambda_ratio;
    ecfg.mu_count = cfg.mu_count;
    ecfg.mu_lo = cfg.mu_lo;
    ecfg.mu_hi = cfg.mu_hi;
    ecfg.rule = cfg.rule;
    ecfg.seed = est_seed;
    ecfg.lasso = cfg.lasso;
    const EstimationResult res = estimate(sim.data, ecfg);
    row.empty_support = res.empty_support;
    row.chosen_lambda = res.chosen_lambda;
    if (res.chosen_mu) row.chosen_mu = *res.chosen_mu;
    VectorXd beta = res.beta;
    if (column_scale) beta = beta.cwiseQuotient(*column_scale);
    row.prediction_error = prediction_error(beta, sim.beta_star, sim.sigma_matrix);
    return row;
}

inline ReplicateOutcome run_univariate(const SimulatedDataset& sim, double alpha) {
    ReplicateOutcome row;
    row.method = Method::univar;
    const auto pvals = univariate_pvalues(sim.data);
    const auto adjusted = bh_adjust(pvals);
    std::vector<std::pair<Index, double>> tested;
    std::vector<Index> discoveries;
    for (Index j = 0; j < sim.data.p(); ++j) {
        tested.emplace_back(j, pvals[static_cast<std::size_t>(j)]);
        if (adjusted[static_cast<std::size_t>(j)] <= alpha) discoveries.push_back(j);
    }
    fill_inference_metrics(row, tested, discoveries, sim.support_star, sim.data.p(), alpha);
    return row;
}

// Runs every screen-and-clean variant on one replicate, sharing the split and
// the screening fit; the ridge strength is memoized per cleaning kind. The
// seed bookkeeping mirrors screen_and_clean so each row reproduces what a
// standalone call with the same seed would return.
inline void run_screen_clean_methods(const std::vector<Method>& methods,
                                     const SimulatedDataset& sim, const ExperimentConfig& cfg,
                                     std::uint64_t sc_seed,
                                     std::vector<ReplicateOutcome>& rows) {
    ScreenCleanConfig base;
    base.folds = cfg.folds;
    base.lambda_count = cfg.lambda_count == 0 ? 100 : cfg.lambda_count;
    base.lambda_ratio = cfg.lambda_ratio;
    base.rule = cfg.rule;
    base.mu_count = cfg.mu_count;
    base.mu_lo = cfg.mu_lo;
    base.mu_hi = cfg.mu_hi;
    base.fixed_mu = cfg.fixed_mu;
    base.b_permutations = cfg.b_permutations;
    base.alpha = cfg.alpha;
    base.mu_on_d2 = cfg.mu_on_d2;
    base.seed = sc_seed;
    base.lasso = cfg.lasso;

    const SplitData split = split_half(sim.data, derive_seed(sc_seed, stream::split));
    const ScreenResult sr =
        screen(split.d1, base.folds, base.lambda_count, base.lambda_ratio, base.rule,
               derive_seed(sc_seed, stream::screen), base.lasso);

    std::optional<double> mu_by_kind[3];
    const auto mu_for = [&](FitKind kind) {
        auto& slot = mu_by_kind[static_cast<int>(kind)];
        if (!slot) {
            ScreenCleanConfig kcfg = base;
            kcfg.kind = kind;
            slot = choose_cleaning_mu(split, sr, kcfg);
        }
        return *slot;
    };

    for (Method m : methods) {
        ReplicateOutcome row;
        row.method = m;
        try {
            if (sr.empty()) {
                row.empty_support = true;
                row.chosen_lambda = sr.chosen_lambda;
                detail::fill_inference_metrics(row, {}, {}, sim.support_star, sim.data.p(),
                                               cfg.alpha);
                rows.push_back(std::move(row));
                continue;
            }
            const FitKind kind = cleaning_kind(m);
            const double mu = mu_for(kind);
            row.chosen_lambda = sr.chosen_lambda;
            row.chosen_mu = mu;
            std::vector<std::pair<Index, double>> tested;
            std::vector<Index> discoveries;
            if (m == Method::sc_ar_f || m == Method::sc_ar_t) {
                const auto cache = cleaning_cache(split.d2, sr, mu, kind);
                const auto pvals = m == Method::sc_ar_f ? standard_f_pvalues(cache)
                                                        : standard_t_pvalues(cache);
                const auto adjusted = bh_adjust(pvals);
                for (std::size_t k = 0; k < sr.support().size(); ++k) {
                    tested.emplace_back(sr.support()[k], pvals[k]);
                    if (adjusted[k] <= cfg.alpha) discoveries.push_back(sr.support()[k]);
                }
            } else {
                const CleanResult cr = clean(split.d2, sr, mu, cfg.b_permutations, cfg.alpha,
                                             derive_seed(sc_seed, stream::clean), kind);
                for (Index j : sr.support()) tested.emplace_back(j, cr.pvalues.at(j));
                discoveries = cr.discoveries;
            }
            detail::fill_inference_metrics(row, tested, discoveries, sim.support_star,
                                           sim.data.p(), cfg.alpha);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
}

inline void summarize_method(Method m, const ExperimentResult& partial, Index p,
                             MethodSummary& out) {
    out.method = m;
    std::vector<double> pes, fdps, sens;
    std::vector<std::pair<long, long>> fpr_pairs;
    std::vector<std::vector<Index>> rankings, truths;
    double screened = 0.0, discovered = 0.0;
    for (const auto& row : partial.rows) {
        if (row.method != m) continue;
        if (row.failed) {
            ++out.failed;
            continue;
        }
        ++out.completed;
        if (is_estimation_method(m)) {
            pes.push_back(row.prediction_error);
        } else {
            fdps.push_back(row.fdp);
            sens.push_back(row.sen);
            screened += static_cast<double>(row.n_screened);
            discovered += static_cast<double>(row.n_discoveries);
            fpr_pairs.emplace_back(row.nulls_tested, row.null_raw_rejections);
            rankings.push_back(row.ranking);
            truths.push_back(partial.truth_supports[static_cast<std::size_t>(row.replicate)]);
        }
    }
    const auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
        if (v.empty()) return;
        mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double ss = 0.0;
        for (double e : v) ss += (e - mean) * (e - mean);
        sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
    };
    mean_sd(pes, out.mean_prediction_error, out.sd_prediction_error);
    mean_sd(fdps, out.mean_fdp, out.sd_fdp);
    mean_sd(sens, out.mean_sen, out.sd_sen);
    if (!is_estimation_method(m) && out.completed > 0) {
        out.mean_screened = screened / out.completed;
        out.mean_discoveries = discovered / out.completed;
        out.pooled_fpr = fpr_over_screened(fpr_pairs);
        out.curve = sen_fdr_curve(rankings, truths, p);
    }
}

}  // namespace detail

inline void check_experiment_config(const ExperimentConfig& cfg) {
    check_design_spec(cfg.design);
    if (cfg.replicates < 1) throw std::invalid_argument("experiment: replicates must be >= 1");
    if (cfg.methods.empty()) throw std::invalid_argument("experiment: no methods configured");
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        for (std::size_t k = i + 1; k < cfg.methods.size(); ++k)
            if (cfg.methods[i] == cfg.methods[k])
                throw std::invalid_argument(std::string("experiment: duplicate method ") +
                                            method_name(cfg.methods[i]));
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw std::invalid_argument("experiment: alpha must lie in (0, 1)");
    if (cfg.b_permutations < 1)
        throw std::invalid_argument("experiment: permutations must be >= 1");
    if (cfg.threads < 1) throw std::invalid_argument("experiment: threads must be >= 1");
}

// Replicate driver. Each replicate owns seeds derived from (master seed,
// replicate index), so results are invariant to scheduling and thread count;
// rows are assembled in replicate-major order after all workers finish.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    check_experiment_config(cfg);

    std::vector<Index> truth_support;
    VectorXd truth_beta;
    if (cfg.fixed_truth) {
        auto eng = make_engine(derive_seed(cfg.seed, stream::truth));
        truth_support = place_support(cfg.design, eng);
        truth_beta = draw_beta(truth_support, cfg.design.beta_law, cfg.design.p, eng);
    }

    std::vector<Method> estimation_methods, sc_methods;
    bool want_univar = false;
    for (Method m : cfg.methods) {
        if (is_estimation_method(m)) estimation_methods.push_back(m);
        else if (uses_screen_clean(m)) sc_methods.push_back(m);
        else want_univar = true;
    }

    std::vector<std::vector<ReplicateOutcome>> rep_rows(cfg.replicates);
    std::vector<std::vector<Index>> truths(cfg.replicates);

    const auto run_replicate = [&](int r) {
        DesignSpec spec = cfg.design;
        spec.seed = derive_seed(cfg.seed, stream::data, static_cast<std::uint64_t>(r));
        const std::uint64_t est_seed =
            derive_seed(cfg.seed, stream::estimation, static_cast<std::uint64_t>(r));
        const std::uint64_t sc_seed =
            derive_seed(cfg.seed, stream::inference, static_cast<std::uint64_t>(r));

        std::vector<ReplicateOutcome> rows;
        SimulatedDataset sim;
        try {
            sim = cfg.fixed_truth ? simulate_with_truth(spec, truth_support, truth_beta)
                                  : simulate(spec);
        } catch (const std::exception& e) {
            for (Method m : cfg.methods) {
                ReplicateOutcome row;
                row.method = m;
                row.failed = true;
                row.error = e.what();
                rows.push_back(std::move(row));
            }
            for (auto& row : rows) row.replicate = r;
            rep_rows[static_cast<std::size_t>(r)] = std::move(rows);
            return;
        }
        truths[static_cast<std::size_t>(r)] = sim.support_star;
        Standardization standardization;
        if (cfg.standardize) standardization = standardize_dataset(sim.data);
        const VectorXd* column_scale = cfg.standardize ? &standardization.column_scale : nullptr;

        for (Method m : cfg.methods) {
            if (is_estimation_method(m)) {
                ReplicateOutcome row;
                try {
                    row = detail::run_estimation_method(m, sim, cfg, est_seed, column_scale);
                } catch (const std::exception& e) {
                    row = ReplicateOutcome{};
                    row.method = m;
                    row.failed = true;
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            } else if (m == Method::univar) {
                ReplicateOutcome row;
                try {
                    row = detail::run_univariate(sim, cfg.alpha);
                } catch (const std::exception& e) {
                    row = ReplicateOutcome{};
                    row.method = m;
                    row.failed = true;
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
        }
        if (!sc_methods.empty()) {
            try {
                detail::run_screen_clean_methods(sc_methods, sim, cfg, sc_seed, rows);
            } catch (const std::exception& e) {
                for (Method m : sc_methods) {
                    ReplicateOutcome row;
                    row.method = m;
                    row.failed = true;
                    row.error = e.what();
                    rows.push_back(std::move(row));
                }
            }
        }
        for (auto& row : rows) row.replicate = r;
        rep_rows[static_cast<std::size_t>(r)] = std::move(rows);
    };

    if (cfg.threads == 1 || cfg.replicates == 1) {
        for (int r = 0; r < cfg.replicates; ++r) run_replicate(r);
    } else {
        std::atomic<int> next{0};
        const auto worker = [&] {
            for (int r = next.fetch_add(1); r < cfg.replicates; r = next.fetch_add(1))
                run_replicate(r);
        };
        std::vector<std::thread> pool;
        const int n_workers = std::min(cfg.threads, cfg.replicates);
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ExperimentResult result;
    result.truth_supports = std::move(truths);
    for (auto& rows : rep_rows)
        for (auto& row : rows) result.rows.push_back(std::move(row));

    // Method rows within a replicate come out grouped, not in config order;
    // restore the configured order for stable downstream files.
    const auto method_rank = [&](Method m) {
        for (std::size_t k = 0; k < cfg.methods.size(); ++k)
            if (cfg.methods[k] == m) return k;
        return cfg.methods.size();
    };
    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [&](const ReplicateOutcome& a, const ReplicateOutcome& b) {
                         if (a.replicate != b.replicate) return a.replicate < b.replicate;
                         return method_rank(a.method) < method_rank(b.method);
                     });

    for (Method m : cfg.methods) {
        MethodSummary summary;
        detail::summarize_method(m, result, cfg.design.p, summary);
        result.summaries.push_back(std::move(summary));
    }
    return result;
}

}  // namespace twostage
