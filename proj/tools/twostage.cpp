#include <array>
#include <exception>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "twostage/runner.hpp"

namespace {

struct CommandArgs {
    twostage::Command command = twostage::Command::simulate;
    CLI::App* app = nullptr;
    CLI::Option* standardize_opt = nullptr;
    CLI::Option* fixed_truth_opt = nullptr;
    std::optional<std::string> config;
    twostage::CliOverrides flags;
};

void add_common_options(CommandArgs& c) {
    c.app->add_option("--config", c.config, "configuration file");
    c.app->add_option("--seed", c.flags.seed, "master seed");
    c.app->add_option("--out", c.flags.out, "output directory");
    c.app->add_option("--threads", c.flags.threads, "worker threads");
    c.app->add_option("--design", c.flags.design, "design: IND, BLOCK, GROUP, TOEP-");
    c.app->add_option("--n", c.flags.n, "sample size");
    c.app->add_option("--p", c.flags.p, "number of predictors");
    c.app->add_option("--s-star", c.flags.s_star, "true support size");
    c.app->add_option("--rho", c.flags.rho, "within-block correlation");
    c.app->add_option("--snr", c.flags.snr, "signal-to-noise ratio");
    c.app->add_option("--block-size", c.flags.block_size, "correlated block width");
    c.app->add_option("--beta-law", c.flags.beta_law, "coefficient law: uniform or signed-unit");
}

void add_fit_options(CommandArgs& c) {
    c.app->add_option("--folds", c.flags.folds, "cross-validation folds");
    c.app->add_option("--rule", c.flags.rule, "lambda selection rule: min or one-se");
    c.standardize_opt = c.app->add_flag("--standardize", "center and unit-scale predictors");
}

void add_test_options(CommandArgs& c) {
    c.app->add_option("--alpha", c.flags.alpha, "false discovery rate target");
    c.app->add_option("--permutations", c.flags.permutations, "permutations per test");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage sparse linear regression: estimation and inference"};
    app.require_subcommand(1);

    std::array<CommandArgs, 4> commands;
    commands[0].command = twostage::Command::simulate;
    commands[1].command = twostage::Command::estimate;
    commands[2].command = twostage::Command::screen_clean;
    commands[3].command = twostage::Command::experiment;

    for (auto& c : commands) {
        switch (c.command) {
            case twostage::Command::simulate:
                c.app = app.add_subcommand("simulate", "draw one dataset and write it as CSV");
                add_common_options(c);
                break;
            case twostage::Command::estimate:
                c.app = app.add_subcommand("estimate", "fit estimation pipelines on one dataset");
                add_common_options(c);
                add_fit_options(c);
                c.app->add_option("--method", c.flags.methods,
                                  "estimation method, repeatable: L, L+O, L+R, L+A, L&A");
                break;
            case twostage::Command::screen_clean:
                c.app = app.add_subcommand(
                    "screen-clean", "run screening and permutation cleaning on one dataset");
                add_common_options(c);
                add_fit_options(c);
                add_test_options(c);
                c.app->add_option("--data", c.flags.data, "read this dataset CSV instead of simulating");
                break;
            case twostage::Command::experiment:
                c.app = app.add_subcommand("experiment", "replicate a design across many datasets");
                add_common_options(c);
                add_fit_options(c);
                add_test_options(c);
                c.app->add_option("--method", c.flags.methods,
                                  "method, repeatable: estimation names, sc-ar, sc-ridge, sc-ols, "
                                  "sc-ar-f, sc-ar-t, univar");
                c.app->add_option("--replicates", c.flags.replicates, "number of replicates");
                c.fixed_truth_opt =
                    c.app->add_flag("--fixed-truth", "share one support and beta across replicates");
                break;
        }
    }

    CLI11_PARSE(app, argc, argv);

    for (auto& c : commands) {
        if (!c.app->parsed()) continue;
        try {
            if (c.standardize_opt && c.standardize_opt->count()) c.flags.standardize = true;
            if (c.fixed_truth_opt && c.fixed_truth_opt->count()) c.flags.fixed_truth = true;
            const twostage::RunConfig cfg =
                twostage::build_run_config(c.command, c.config, c.flags);
            return twostage::run(cfg);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
