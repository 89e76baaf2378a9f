#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "twostage/config.hpp"
#include "twostage/csv.hpp"
#include "twostage/experiment.hpp"
#include "twostage/runner.hpp"

using namespace twostage;

namespace {

// Every criterion prints exactly one line; the boolean feeds a REQUIRE so the
// suite fails loudly as well.
bool report(int number, const std::string& label, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << label;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    return pass;
}

std::string pct(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * x);
    return buf;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

MatrixXd random_matrix(Index n, Index p, std::mt19937_64& eng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return MatrixXd::NullaryExpr(n, p, [&](Index, Index) { return normal(eng); });
}

VectorXd random_vector(Index n, std::mt19937_64& eng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return VectorXd::NullaryExpr(n, [&](Index) { return normal(eng); });
}

// Inference benchmark shared by the calibration, FDR, and sensitivity
// criteria: n=150, p=100, ten relevant variables, rho=0.5, SNR=4, 500
// permutations per test, 300 replicates.
const ExperimentResult& desk_run(Design design) {
    static std::map<Design, ExperimentResult> cache;
    const auto it = cache.find(design);
    if (it != cache.end()) return it->second;

    ExperimentConfig cfg;
    cfg.design.design = design;
    cfg.design.n = 150;
    cfg.design.p = 100;
    cfg.design.s_star = 10;
    cfg.design.rho = 0.5;
    cfg.design.snr = 4.0;
    cfg.replicates = 300;
    cfg.b_permutations = 500;
    cfg.alpha = 0.05;
    switch (design) {
        case Design::ind:
            cfg.methods = {Method::sc_ar, Method::sc_ols, Method::sc_ridge};
            cfg.seed = 601;
            break;
        case Design::block:
            cfg.methods = {Method::sc_ar, Method::sc_ar_f, Method::sc_ols, Method::sc_ridge,
                           Method::univar};
            cfg.seed = 602;
            break;
        case Design::group:
            cfg.methods = {Method::univar};
            cfg.seed = 603;
            break;
        default:
            throw std::logic_error("desk_run: unsupported design");
    }
    return cache.emplace(design, run_experiment(cfg)).first->second;
}

const MethodSummary& summary_for(const ExperimentResult& result, Method m) {
    for (const auto& s : result.summaries)
        if (s.method == m) return s;
    throw std::logic_error("summary_for: method not present");
}

// Full per-permutation re-solves, sharing the seeded permutation stream with
// the cached path so the two F sequences are comparable draw by draw.
std::vector<double> naive_f_sequence(const MatrixXd& xs, const VectorXd& y,
                                     const VectorXd& penalty, Index k, int b_count,
                                     std::mt19937_64& eng, double* f_obs_out) {
    const Index n = xs.rows(), q = xs.cols();
    MatrixXd xr(n, q - 1);
    VectorXd lamr(q - 1);
    Index c = 0;
    for (Index l = 0; l < q; ++l) {
        if (l == k) continue;
        xr.col(c) = xs.col(l);
        lamr(c) = penalty(l);
        ++c;
    }
    const VectorXd beta0 = solve_penalized(xr, y, lamr);
    const double rss0 = (y - xr * beta0).squaredNorm();

    const auto f_of = [&](const MatrixXd& design) {
        const VectorXd beta = solve_penalized(design, y, penalty);
        const double rss1 = (y - design * beta).squaredNorm();
        return (rss0 - rss1) / rss1;
    };
    if (f_obs_out) *f_obs_out = f_of(xs);

    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    MatrixXd design = xs;
    std::vector<double> fs;
    fs.reserve(b_count);
    for (int b = 0; b < b_count; ++b) {
        std::shuffle(perm.begin(), perm.end(), eng);
        for (Index i = 0; i < n; ++i) design(i, k) = xs(perm[i], k);
        fs.push_back(f_of(design));
    }
    return fs;
}

// Largest scaled violation of the subgradient optimality conditions: active
// coordinates must satisfy x_j'(y - X beta) = lambda * sign(beta_j) within
// tol * max(1, lambda), inactive ones |x_j'(y - X beta)| <= lambda * (1 + tol).
double kkt_violation_scaled(const MatrixXd& x, const VectorXd& y, const LassoFit& fit) {
    const VectorXd grad = x.transpose() * (y - x * fit.beta);
    double worst = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
        if (fit.beta(j) != 0.0) {
            const double sign = fit.beta(j) > 0.0 ? 1.0 : -1.0;
            worst = std::max(worst,
                             std::abs(grad(j) - fit.lambda * sign) / std::max(1.0, fit.lambda));
        } else {
            worst = std::max(worst, (std::abs(grad(j)) - fit.lambda) / fit.lambda);
        }
    }
    return worst;
}

// Textbook step-up rule: reject the k smallest p-values for the largest k
// with p_(k) <= alpha * k / m.
std::vector<char> step_up_rejections(const std::vector<double>& pvalues, double alpha) {
    const std::size_t m = pvalues.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    std::size_t cutoff = 0;
    for (std::size_t r = 0; r < m; ++r)
        if (pvalues[order[r]] <= alpha * static_cast<double>(r + 1) / static_cast<double>(m))
            cutoff = r + 1;
    std::vector<char> reject(m, 0);
    for (std::size_t r = 0; r < cutoff; ++r) reject[order[r]] = 1;
    return reject;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("twostage_acceptance_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("acceptance 01: permutation cleaning holds its level") {
    const auto& ind = summary_for(desk_run(Design::ind), Method::sc_ar);
    const auto& block = summary_for(desk_run(Design::block), Method::sc_ar);
    REQUIRE(ind.pooled_fpr.has_value());
    REQUIRE(block.pooled_fpr.has_value());
    const bool pass = *ind.pooled_fpr >= 0.03 && *ind.pooled_fpr <= 0.07 &&
                      *block.pooled_fpr >= 0.03 && *block.pooled_fpr <= 0.07;
    REQUIRE(report(1, "permutation-test FPR on screened nulls within [3%, 7%]", pass,
                   "IND " + pct(*ind.pooled_fpr) + ", BLOCK " + pct(*block.pooled_fpr)));
}

TEST_CASE("acceptance 02: parametric F test is miscalibrated under correlation") {
    const auto& f = summary_for(desk_run(Design::block), Method::sc_ar_f);
    REQUIRE(f.pooled_fpr.has_value());
    const bool pass = *f.pooled_fpr > 0.07;
    REQUIRE(report(2, "standard F-test FPR exceeds 7% on BLOCK", pass,
                   "BLOCK " + pct(*f.pooled_fpr)));
}

TEST_CASE("acceptance 03: adaptive-ridge cleaning controls FDR") {
    const auto& ind = summary_for(desk_run(Design::ind), Method::sc_ar);
    const auto& block = summary_for(desk_run(Design::block), Method::sc_ar);
    const bool pass = ind.mean_fdp <= 0.075 && block.mean_fdp <= 0.075;
    REQUIRE(report(3, "adaptive-ridge cleaning FDR at or below 7.5%", pass,
                   "IND " + pct(ind.mean_fdp) + ", BLOCK " + pct(block.mean_fdp)));
}

TEST_CASE("acceptance 04: adaptive-ridge cleaning is the most sensitive cleaner") {
    const auto& ind = desk_run(Design::ind);
    const auto& block = desk_run(Design::block);
    const double ar_i = summary_for(ind, Method::sc_ar).mean_sen;
    const double ols_i = summary_for(ind, Method::sc_ols).mean_sen;
    const double ridge_i = summary_for(ind, Method::sc_ridge).mean_sen;
    const double ar_b = summary_for(block, Method::sc_ar).mean_sen;
    const double ols_b = summary_for(block, Method::sc_ols).mean_sen;
    const double ridge_b = summary_for(block, Method::sc_ridge).mean_sen;
    const bool pass = ar_i > ols_i + 0.05 && ar_b > ols_b + 0.05 && ar_i >= ridge_i &&
                      ar_b >= ridge_b;
    REQUIRE(report(4, "SEN: adaptive-ridge beats OLS by 5 points and is at least ridge", pass,
                   "IND ar/ridge/ols " + pct(ar_i) + "/" + pct(ridge_i) + "/" + pct(ols_i) +
                       ", BLOCK " + pct(ar_b) + "/" + pct(ridge_b) + "/" + pct(ols_b)));
}

TEST_CASE("acceptance 05: univariate baseline overfires on BLOCK and saturates on GROUP") {
    const auto& block = summary_for(desk_run(Design::block), Method::univar);
    const auto& group = summary_for(desk_run(Design::group), Method::univar);
    const bool pass = block.mean_fdp > 0.20 && group.mean_sen > 0.90;
    REQUIRE(report(5, "univariate FDR above 20% on BLOCK and SEN above 90% on GROUP", pass,
                   "BLOCK FDR " + pct(block.mean_fdp) + ", GROUP SEN " + pct(group.mean_sen)));
}

TEST_CASE("acceptance 06: unit-strength weighted ridge refit reproduces the first stage") {
    auto eng = make_engine(606);
    std::uniform_int_distribution<Index> ndist(40, 80), pdist(10, 150);
    LassoOptions opts;
    opts.tol = 1e-10;
    double worst = 0.0;
    int done = 0;
    while (done < 50) {
        const Index n = ndist(eng), p = pdist(eng);
        const MatrixXd x = random_matrix(n, p, eng);
        VectorXd beta_true = VectorXd::Zero(p);
        for (Index j = 0; j < std::min<Index>(4, p); ++j) beta_true(j) = (j % 2 ? -1.0 : 1.0);
        const VectorXd y = x * beta_true + 0.5 * random_vector(n, eng);

        LassoFit fit;
        for (double frac : {0.3, 0.1, 0.02}) {
            fit = lasso_fit(x, y, frac * lambda_max(x, y), nullptr, opts);
            if (!fit.support.empty()) break;
        }
        if (fit.support.empty()) continue;
        REQUIRE(fit.converged);

        const auto refit = second_stage_fit(x, y, adaptive_weights(fit), 1.0,
                                            FitKind::adaptive_ridge);
        for (Index j : fit.support)
            worst = std::max(worst, std::abs(refit.beta(j) - fit.beta(j)) / std::abs(fit.beta(j)));
        ++done;
    }
    const bool pass = worst <= 1e-4;
    REQUIRE(report(6, "mu=1 adaptive-ridge refit matches lasso coefficients within 1e-4", pass,
                   "worst relative deviation " + num(worst) + " over 50 problems"));
}

TEST_CASE("acceptance 07: cached permutation F sequence equals naive re-solves") {
    auto eng = make_engine(607);
    std::uniform_int_distribution<Index> ndist(30, 80), qdist(2, 10);
    std::uniform_real_distribution<double> wdist(0.0, 4.0);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const Index n = ndist(eng), q = qdist(eng);
        const MatrixXd xs = random_matrix(n, q, eng);
        const VectorXd y = xs * random_vector(q, eng) + random_vector(n, eng);
        const VectorXd penalty = VectorXd::NullaryExpr(q, [&](Index) { return wdist(eng); });
        const auto cache = gram_inverse(xs, y, penalty);
        for (Index k = 0; k < q; ++k) {
            const std::uint64_t seed = derive_seed(607, static_cast<std::uint64_t>(inst),
                                                   static_cast<std::uint64_t>(k));
            auto eng_fast = make_engine(seed);
            std::vector<double> f_fast;
            const auto res = permutation_f_core(cache, k, 50, eng_fast, &f_fast);

            auto eng_naive = make_engine(seed);
            double f_obs_naive = 0.0;
            const auto f_naive = naive_f_sequence(xs, y, penalty, k, 50, eng_naive, &f_obs_naive);

            const auto rel = [](double a, double b) {
                return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
            };
            worst = std::max(worst, rel(res.f_observed, f_obs_naive));
            REQUIRE(f_fast.size() == f_naive.size());
            for (std::size_t b = 0; b < f_naive.size(); ++b)
                worst = std::max(worst, rel(f_fast[b], f_naive[b]));
        }
    }
    const bool pass = worst <= 1e-8;
    REQUIRE(report(7, "cached and naive permutation F values agree within 1e-8", pass,
                   "worst relative deviation " + num(worst) + " over 20 instances"));
}

TEST_CASE("acceptance 08: cached permutation path is at least five times faster") {
    const Index n = 125, q = 30;
    const int b_count = 1000;
    auto eng = make_engine(608);
    const MatrixXd xs = random_matrix(n, q, eng);
    const VectorXd y = xs * random_vector(q, eng) + random_vector(n, eng);
    std::uniform_real_distribution<double> wdist(0.5, 5.0);
    const VectorXd penalty = VectorXd::NullaryExpr(q, [&](Index) { return wdist(eng); });

    const auto t0 = std::chrono::steady_clock::now();
    double sink_fast = 0.0;
    const auto cache = gram_inverse(xs, y, penalty);
    for (Index k = 0; k < q; ++k) {
        auto e = make_engine(derive_seed(608, static_cast<std::uint64_t>(k)));
        sink_fast += permutation_f_core(cache, k, b_count, e).pvalue;
    }
    const auto t1 = std::chrono::steady_clock::now();
    double sink_naive = 0.0;
    for (Index k = 0; k < q; ++k) {
        auto e = make_engine(derive_seed(608, static_cast<std::uint64_t>(k)));
        const auto fs = naive_f_sequence(xs, y, penalty, k, b_count, e, nullptr);
        sink_naive += fs.back();
    }
    const auto t2 = std::chrono::steady_clock::now();
    REQUIRE(std::isfinite(sink_fast));
    REQUIRE(std::isfinite(sink_naive));

    const double fast_s = std::chrono::duration<double>(t1 - t0).count();
    const double naive_s = std::chrono::duration<double>(t2 - t1).count();
    const double speedup = naive_s / fast_s;
    const bool pass = speedup >= 5.0;
    REQUIRE(report(8, "cached permutation path speedup at least 5x at q=30, n=125, B=1000", pass,
                   "cached " + num(fast_s) + "s, naive " + num(naive_s) + "s, " + num(speedup) +
                       "x"));
}

TEST_CASE("acceptance 09: coordinate descent is optimal and matches the orthonormal closed form") {
    auto eng = make_engine(609);
    std::uniform_int_distribution<Index> ndist(20, 60), pdist(5, 120);
    std::uniform_real_distribution<double> fdist(0.05, 0.9);
    double worst_kkt = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = ndist(eng), p = pdist(eng);
        const MatrixXd x = random_matrix(n, p, eng);
        VectorXd beta_true = VectorXd::Zero(p);
        for (Index j = 0; j < std::min<Index>(5, p); ++j) beta_true(j) = 1.0;
        const VectorXd y = x * beta_true + 0.5 * random_vector(n, eng);
        const double lambda = fdist(eng) * lambda_max(x, y);
        const auto fit = lasso_fit(x, y, lambda);
        REQUIRE(fit.converged);
        worst_kkt = std::max(worst_kkt, kkt_violation_scaled(x, y, fit));
    }

    std::uniform_int_distribution<Index> odist(30, 100);
    double worst_ortho = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const Index n = odist(eng);
        const Index p = std::uniform_int_distribution<Index>(5, std::min<Index>(40, n))(eng);
        const Eigen::HouseholderQR<MatrixXd> qr(random_matrix(n, p, eng));
        const MatrixXd x = qr.householderQ() * MatrixXd::Identity(n, p);
        const VectorXd y = random_vector(n, eng);
        const double lambda = 0.4 * lambda_max(x, y);
        const auto fit = lasso_fit(x, y, lambda);
        REQUIRE(fit.converged);
        for (Index j = 0; j < p; ++j) {
            const double closed = soft_threshold(x.col(j).dot(y), lambda);
            worst_ortho = std::max(worst_ortho, std::abs(fit.beta(j) - closed));
        }
    }
    const bool pass = worst_kkt < 1e-6 && worst_ortho < 1e-8;
    REQUIRE(report(9, "KKT residual below 1e-6 on 200 problems; orthonormal fits within 1e-8",
                   pass,
                   "worst KKT " + num(worst_kkt) + ", worst orthonormal " + num(worst_ortho)));
}

TEST_CASE("acceptance 10: second-stage refits pay off at high SNR and not for OLS at low SNR") {
    ExperimentConfig cfg;
    cfg.design.design = Design::ind;
    cfg.design.n = 150;
    cfg.design.p = 100;
    cfg.design.s_star = 20;
    cfg.design.snr = 32.0;
    cfg.methods = {Method::lasso, Method::lasso_ols, Method::lasso_ridge, Method::lasso_adaptive,
                   Method::joint_adaptive};
    cfg.replicates = 100;
    cfg.seed = 610;
    const ExperimentResult high = run_experiment(cfg);

    cfg.design.snr = 4.0;
    cfg.methods = {Method::lasso, Method::lasso_ols};
    cfg.seed = 611;
    const ExperimentResult low = run_experiment(cfg);

    const double l_hi = summary_for(high, Method::lasso).mean_prediction_error;
    const double lo_hi = summary_for(high, Method::lasso_ols).mean_prediction_error;
    const double lr_hi = summary_for(high, Method::lasso_ridge).mean_prediction_error;
    const double la_hi = summary_for(high, Method::lasso_adaptive).mean_prediction_error;
    const double ja_hi = summary_for(high, Method::joint_adaptive).mean_prediction_error;
    const double l_lo = summary_for(low, Method::lasso).mean_prediction_error;
    const double lo_lo = summary_for(low, Method::lasso_ols).mean_prediction_error;

    const bool pass = lo_hi < l_hi && lr_hi < l_hi && la_hi < l_hi && ja_hi <= la_hi &&
                      l_lo <= lo_lo;
    REQUIRE(report(10, "refits beat plain lasso at SNR=32; OLS refit does not win at SNR=4", pass,
                   "SNR32 L/L+O/L+R/L+A/L&A " + num(l_hi) + "/" + num(lo_hi) + "/" + num(lr_hi) +
                       "/" + num(la_hi) + "/" + num(ja_hi) + "; SNR4 L/L+O " + num(l_lo) + "/" +
                       num(lo_lo)));
}

TEST_CASE("acceptance 11: multiple-testing kernels match independent oracles") {
    auto eng = make_engine(611);
    std::uniform_int_distribution<std::size_t> mdist(1, 40);
    std::uniform_real_distribution<double> udist(0.0, 1.0), adist(0.01, 0.3);
    bool bh_ok = true;
    for (int rep = 0; rep < 1000 && bh_ok; ++rep) {
        const std::size_t m = mdist(eng);
        std::vector<double> pvals(m);
        for (auto& p : pvals) p = udist(eng);
        const double alpha = adist(eng);
        const auto adjusted = bh_adjust(pvals);
        const auto oracle = step_up_rejections(pvals, alpha);
        for (std::size_t i = 0; i < m; ++i)
            if ((adjusted[i] <= alpha) != (oracle[i] != 0)) bh_ok = false;
    }

    // Duplicated p-values: the boundary pair is rejected or kept as a unit.
    const std::vector<double> tied{0.01, 0.01, 0.03, 0.03, 0.9};
    const auto tied_adj = bh_adjust(tied);
    const auto tied_oracle = step_up_rejections(tied, 0.05);
    for (std::size_t i = 0; i < tied.size(); ++i)
        if ((tied_adj[i] <= 0.05) != (tied_oracle[i] != 0)) bh_ok = false;

    const auto fs1 = fdp_sen(confusion({0, 1, 2}, {1, 2, 4}, 6));
    const auto fs2 = fdp_sen(confusion({}, {1, 2}, 5));
    const auto fs3 = fdp_sen(confusion({0, 3}, {}, 5));
    const bool fdp_ok = fs1.first == 1.0 / 3.0 && fs1.second == 2.0 / 3.0 && fs2.first == 0.0 &&
                        fs2.second == 0.0 && fs3.first == 1.0 && fs3.second == 0.0;

    const bool pass = bh_ok && fdp_ok;
    REQUIRE(report(11, "BH matches a step-up oracle on 1000 vectors; fdp/sen match hand values",
                   pass,
                   std::string(bh_ok ? "BH ok" : "BH mismatch") + ", " +
                       (fdp_ok ? "metrics ok" : "metrics mismatch")));
}

TEST_CASE("acceptance 12: every command is byte-deterministic, independent of threads") {
    bool pass = true;
    std::string detail = "all files identical";

    const auto check = [&](const std::string& what, const std::filesystem::path& a,
                           const std::filesystem::path& b, const char* file) {
        if (read_bytes(a / file) != read_bytes(b / file)) {
            pass = false;
            detail = what + "/" + file + " differs";
        }
    };

    RunConfig sim;
    sim.command = Command::simulate;
    sim.design.n = 60;
    sim.design.p = 24;
    sim.design.s_star = 4;
    sim.design.snr = 8.0;
    sim.seed = 612;
    const auto sim_a = fresh_dir("sim_a"), sim_b = fresh_dir("sim_b");
    sim.out_dir = sim_a.string();
    REQUIRE(run(sim) == 0);
    sim.out_dir = sim_b.string();
    REQUIRE(run(sim) == 0);
    for (const char* f : {"dataset.csv", "dataset_meta.csv"}) check("simulate", sim_a, sim_b, f);

    RunConfig sc = sim;
    sc.command = Command::screen_clean;
    sc.b_permutations = 199;
    const auto sc_a = fresh_dir("sc_a"), sc_b = fresh_dir("sc_b");
    sc.out_dir = sc_a.string();
    REQUIRE(run(sc) == 0);
    sc.out_dir = sc_b.string();
    REQUIRE(run(sc) == 0);
    check("screen-clean", sc_a, sc_b, "discoveries.csv");

    const char* result_files[] = {"estimation.csv", "inference.csv", "curve.csv", "summary.csv",
                                  "failures.csv"};

    RunConfig est = sim;
    est.command = Command::estimate;
    est.methods = {Method::lasso_adaptive};
    est.folds = 5;
    const auto est_a = fresh_dir("est_a"), est_b = fresh_dir("est_b");
    est.out_dir = est_a.string();
    REQUIRE(run(est) == 0);
    est.out_dir = est_b.string();
    REQUIRE(run(est) == 0);
    for (const char* f : result_files) check("estimate", est_a, est_b, f);

    RunConfig exp = sim;
    exp.command = Command::experiment;
    exp.methods = {Method::lasso_adaptive, Method::sc_ar, Method::univar};
    exp.replicates = 4;
    exp.b_permutations = 199;
    exp.folds = 5;
    const auto exp_a = fresh_dir("exp_a"), exp_b = fresh_dir("exp_b"), exp_c = fresh_dir("exp_c");
    exp.out_dir = exp_a.string();
    exp.threads = 1;
    REQUIRE(run(exp) == 0);
    exp.out_dir = exp_b.string();
    exp.threads = 3;
    REQUIRE(run(exp) == 0);
    exp.out_dir = exp_c.string();
    exp.threads = 1;
    REQUIRE(run(exp) == 0);
    for (const char* f : result_files) {
        check("experiment threads 1 vs 3", exp_a, exp_b, f);
        check("experiment rerun", exp_a, exp_c, f);
    }
    for (const char* f : {"dataset.csv", "dataset_meta.csv"}) {
        check("experiment threads 1 vs 3", exp_a, exp_b, f);
        check("experiment rerun", exp_a, exp_c, f);
    }

    REQUIRE(report(12, "reruns of every command are byte-identical across thread counts", pass,
                   detail));
}
