#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <system_error>

#include "twostage/config.hpp"
#include "twostage/csv.hpp"

namespace twostage {

namespace detail {

// Collects output files so a failed write leaves no partial results behind.
class OutputWriter {
  public:
    explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
        guarded(name, [&](const std::string& p) { write_csv(p, header, rows); });
    }

    void write_dataset(const std::string& name, const Dataset& d) {
        guarded(name, [&](const std::string& p) { write_dataset_csv(p, d); });
    }

  private:
    template <typename Fn>
    void guarded(const std::string& name, Fn&& fn) {
        const std::string p = path(name);
        try {
            fn(p);
        } catch (...) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
            for (const auto& w : written_) std::filesystem::remove(w, ec);
            throw;
        }
        written_.push_back(p);
    }

    std::filesystem::path dir_;
    std::vector<std::string> written_;
};

// The dataset the experiment pipeline draws for its first replicate.
inline SimulatedDataset replicate_zero_dataset(const RunConfig& cfg) {
    DesignSpec spec = cfg.design;
    spec.seed = derive_seed(cfg.seed, stream::data, 0);
    if (cfg.fixed_truth) {
        auto eng = make_engine(derive_seed(cfg.seed, stream::truth));
        const auto support = place_support(cfg.design, eng);
        const VectorXd beta_star = draw_beta(support, cfg.design.beta_law, cfg.design.p, eng);
        return simulate_with_truth(spec, support, beta_star);
    }
    return simulate(spec);
}

inline ExperimentConfig to_experiment_config(const RunConfig& cfg) {
    ExperimentConfig ecfg;
    ecfg.design = cfg.design;
    ecfg.methods = cfg.methods;
    ecfg.replicates = cfg.replicates;
    ecfg.alpha = cfg.alpha;
    ecfg.b_permutations = cfg.b_permutations;
    ecfg.folds = cfg.folds;
    ecfg.rule = cfg.rule;
    ecfg.fixed_truth = cfg.fixed_truth;
    ecfg.standardize = cfg.standardize;
    ecfg.threads = cfg.threads;
    ecfg.seed = cfg.seed;
    return ecfg;
}

inline void write_dataset_files(const SimulatedDataset& sim, OutputWriter& out) {
    out.write_dataset("dataset.csv", sim.data);
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"sigma_noise", "", format_csv_double(sim.sigma_noise)});
    for (Index j : sim.support_star)
        rows.push_back({"beta_star", std::to_string(j + 1), format_csv_double(sim.beta_star(j))});
    out.write("dataset_meta.csv", {"key", "variable", "value"}, rows);
}

inline std::vector<std::string> estimation_row(const ReplicateOutcome& row) {
    return {std::to_string(row.replicate),
            method_name(row.method),
            format_csv_double(row.chosen_lambda),
            format_csv_double(row.chosen_mu),
            format_csv_double(row.prediction_error),
            row.empty_support ? "1" : "0"};
}

inline std::vector<std::string> inference_row(const ReplicateOutcome& row) {
    return {std::to_string(row.replicate),
            method_name(row.method),
            format_csv_double(row.fdp),
            format_csv_double(row.sen),
            std::to_string(row.n_screened),
            std::to_string(row.n_discoveries),
            std::to_string(row.nulls_tested),
            std::to_string(row.null_raw_rejections)};
}

inline void write_result_files(const ExperimentResult& result, OutputWriter& out) {
    std::vector<std::vector<std::string>> estimation, inference, curve, summary, failures;
    for (const auto& row : result.rows) {
        if (row.failed) {
            failures.push_back({std::to_string(row.replicate), method_name(row.method), row.error});
        } else if (is_estimation_method(row.method)) {
            estimation.push_back(estimation_row(row));
        } else {
            inference.push_back(inference_row(row));
        }
    }
    for (const auto& s : result.summaries) {
        for (std::size_t k = 0; k < s.curve.mean_fdr.size(); ++k)
            curve.push_back({method_name(s.method), std::to_string(k + 1),
                             format_csv_double(s.curve.mean_fdr[k]),
                             format_csv_double(s.curve.mean_sen[k])});
        summary.push_back({method_name(s.method), std::to_string(s.completed),
                           std::to_string(s.failed), format_csv_double(s.mean_prediction_error),
                           format_csv_double(s.sd_prediction_error), format_csv_double(s.mean_fdp),
                           format_csv_double(s.sd_fdp), format_csv_double(s.mean_sen),
                           format_csv_double(s.sd_sen), format_csv_double(s.mean_screened),
                           format_csv_double(s.mean_discoveries),
                           s.pooled_fpr ? format_csv_double(*s.pooled_fpr) : ""});
    }
    out.write("estimation.csv",
              {"replicate", "method", "chosen_lambda", "chosen_mu", "prediction_error",
               "empty_support"},
              estimation);
    out.write("inference.csv",
              {"replicate", "method", "fdp", "sen", "n_screened", "n_discoveries", "nulls_tested",
               "null_raw_rejections"},
              inference);
    out.write("curve.csv", {"method", "rank", "mean_fdr", "mean_sen"}, curve);
    out.write("summary.csv",
              {"method", "completed", "failed", "mean_prediction_error", "sd_prediction_error",
               "mean_fdp", "sd_fdp", "mean_sen", "sd_sen", "mean_screened", "mean_discoveries",
               "pooled_fpr"},
              summary);
    out.write("failures.csv", {"replicate", "method", "error"}, failures);
}

inline int failure_exit(const ExperimentResult& result) {
    for (const auto& row : result.rows)
        if (row.failed) return 2;
    return 0;
}

inline int run_simulate(const RunConfig& cfg, OutputWriter& out) {
    const SimulatedDataset sim = replicate_zero_dataset(cfg);
    write_dataset_files(sim, out);
    std::cout << "simulated n=" << sim.data.n() << " p=" << sim.data.p() << " |S*|="
              << sim.support_star.size() << " -> " << out.path("dataset.csv") << "\n";
    return 0;
}

inline int run_estimate(const RunConfig& cfg, OutputWriter& out) {
    ExperimentConfig ecfg = to_experiment_config(cfg);
    ecfg.replicates = 1;
    const ExperimentResult result = run_experiment(ecfg);
    write_result_files(result, out);
    for (const auto& row : result.rows) {
        std::cout << method_name(row.method) << ": ";
        if (row.failed)
            std::cout << "failed (" << row.error << ")\n";
        else
            std::cout << "prediction_error=" << row.prediction_error
                      << " lambda=" << row.chosen_lambda << "\n";
    }
    return failure_exit(result);
}

inline int run_screen_clean(const RunConfig& cfg, OutputWriter& out) {
    Dataset data = cfg.data_path.empty() ? replicate_zero_dataset(cfg).data
                                         : read_dataset_csv(cfg.data_path);
    if (cfg.standardize) standardize_dataset(data);
    ScreenCleanConfig scfg;
    scfg.folds = cfg.folds;
    scfg.rule = cfg.rule;
    scfg.b_permutations = cfg.b_permutations;
    scfg.alpha = cfg.alpha;
    scfg.seed = derive_seed(cfg.seed, stream::inference, 0);
    const ScreenCleanResult res = screen_and_clean(data, scfg);

    std::vector<std::vector<std::string>> rows;
    for (const auto& [j, pv] : res.clean.pvalues) {
        const bool discovered = std::binary_search(res.clean.discoveries.begin(),
                                                   res.clean.discoveries.end(), j);
        rows.push_back({std::to_string(j + 1), format_csv_double(res.clean.f_observed.at(j)),
                        format_csv_double(pv), format_csv_double(res.clean.adjusted.at(j)),
                        discovered ? "1" : "0"});
    }
    out.write("discoveries.csv", {"variable", "f_observed", "pvalue", "adjusted", "discovered"},
              rows);
    std::cout << "screened=" << res.screen.support().size()
              << " discoveries=" << res.clean.discoveries.size() << " mu=" << res.mu << " -> "
              << out.path("discoveries.csv") << "\n";
    return 0;
}

inline int run_full_experiment(const RunConfig& cfg, OutputWriter& out) {
    const ExperimentResult result = run_experiment(to_experiment_config(cfg));
    write_dataset_files(replicate_zero_dataset(cfg), out);
    write_result_files(result, out);
    for (const auto& s : result.summaries)
        std::cout << method_name(s.method) << ": completed=" << s.completed
                  << " failed=" << s.failed << "\n";
    std::cout << "results in " << out.path("") << "\n";
    return failure_exit(result);
}

}  // namespace detail

// Executes one command and writes its CSV outputs under cfg.out_dir. Returns 0
// on success and 2 when some replicates recorded failures; unrecoverable
// errors propagate as exceptions.
inline int run(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    detail::OutputWriter out{std::filesystem::path(cfg.out_dir)};
    switch (cfg.command) {
        case Command::simulate: return detail::run_simulate(cfg, out);
        case Command::estimate: return detail::run_estimate(cfg, out);
        case Command::screen_clean: return detail::run_screen_clean(cfg, out);
        case Command::experiment: return detail::run_full_experiment(cfg, out);
    }
    throw std::logic_error("run: unknown command");
}

}  // namespace twostage
