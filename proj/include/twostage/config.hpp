#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twostage/experiment.hpp"

namespace twostage {

enum class Command { simulate, estimate, screen_clean, experiment };

inline const char* command_name(Command c) {
    switch (c) {
        case Command::simulate: return "simulate";
        case Command::estimate: return "estimate";
        case Command::screen_clean: return "screen-clean";
        case Command::experiment: return "experiment";
    }
    throw std::logic_error("command_name: unknown command");
}

inline Command parse_command(const std::string& name) {
    for (auto c :
         {Command::simulate, Command::estimate, Command::screen_clean, Command::experiment})
        if (name == command_name(c)) return c;
    throw std::invalid_argument("unknown command: " + name);
}

struct RunConfig {
    Command command = Command::simulate;
    DesignSpec design;
    std::vector<Method> methods;  // filled with per-command defaults when empty
    double alpha = 0.05;
    int b_permutations = 1000;
    int folds = 10;
    int replicates = 1;
    CvRule rule = CvRule::min;
    bool standardize = false;
    bool fixed_truth = false;
    std::string data_path;  // external dataset for screen-clean; empty simulates
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;
};

// Values collected from command-line flags; absent optionals fall back to the
// config file, then to defaults.
struct CliOverrides {
    std::optional<std::string> design;
    std::optional<long> n, p, s_star, block_size;
    std::optional<double> rho, snr, alpha;
    std::optional<std::string> beta_law;
    std::optional<int> permutations, folds, replicates, threads;
    std::vector<std::string> methods;
    std::optional<std::string> rule;
    std::optional<bool> standardize, fixed_truth;
    std::optional<std::string> data, out;
    std::optional<std::uint64_t> seed;
};

struct ConfigEntry {
    std::string section;  // empty for top-level entries
    std::string key;
    std::string value;
    int line = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

inline long parse_config_integer(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("key '" + key + "': expected an integer, got '" + value + "'");
    return v;
}

inline std::uint64_t parse_config_seed(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("key '" + key + "': expected an unsigned integer, got '" +
                                    value + "'");
    return static_cast<std::uint64_t>(v);
}

inline double parse_config_real(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

inline bool parse_config_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::invalid_argument("key '" + key + "': expected true or false, got '" + value + "'");
}

inline CvRule parse_rule(const std::string& key, const std::string& value) {
    if (value == "min") return CvRule::min;
    if (value == "one-se") return CvRule::one_se;
    throw std::invalid_argument("key '" + key + "': expected min or one-se, got '" + value + "'");
}

inline std::vector<Method> parse_method_list(const std::string& key, const std::string& value) {
    std::vector<Method> methods;
    std::size_t start = 0;
    while (start <= value.size()) {
        const auto comma = value.find(',', start);
        const std::string item =
            trim(comma == std::string::npos ? value.substr(start) : value.substr(start, comma - start));
        if (item.empty())
            throw std::invalid_argument("key '" + key + "': empty method name in '" + value + "'");
        try {
            methods.push_back(parse_method(item));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("key '" + key + "': unknown method '" + item + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return methods;
}

inline const std::set<std::string>& design_keys() {
    static const std::set<std::string> keys{"design",     "n",   "p",       "s-star",
                                            "rho",        "snr", "block-size", "beta-law"};
    return keys;
}

inline std::set<std::string> known_keys(Command c) {
    std::set<std::string> keys = design_keys();
    keys.insert({"seed", "out", "threads"});
    switch (c) {
        case Command::simulate:
            break;
        case Command::estimate:
            keys.insert({"method", "folds", "rule", "standardize"});
            break;
        case Command::screen_clean:
            keys.insert({"data", "alpha", "permutations", "folds", "rule", "standardize"});
            break;
        case Command::experiment:
            keys.insert({"method", "replicates", "alpha", "permutations", "folds", "rule",
                         "standardize", "fixed-truth"});
            break;
    }
    return keys;
}

inline std::set<std::string> all_known_keys() {
    std::set<std::string> keys;
    for (auto c :
         {Command::simulate, Command::estimate, Command::screen_clean, Command::experiment})
        keys.merge(known_keys(c));
    return keys;
}

// Applies one key to the config; the caller has already filtered for
// relevance to the active command. Methods accumulate within a layer and are
// handled by the caller.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "design") cfg.design.design = parse_design(value);
    else if (key == "n") cfg.design.n = parse_config_integer(key, value);
    else if (key == "p") cfg.design.p = parse_config_integer(key, value);
    else if (key == "s-star") cfg.design.s_star = parse_config_integer(key, value);
    else if (key == "block-size") cfg.design.block_size = parse_config_integer(key, value);
    else if (key == "rho") cfg.design.rho = parse_config_real(key, value);
    else if (key == "snr") cfg.design.snr = parse_config_real(key, value);
    else if (key == "beta-law") cfg.design.beta_law = parse_beta_law(value);
    else if (key == "alpha") cfg.alpha = parse_config_real(key, value);
    else if (key == "permutations") cfg.b_permutations = static_cast<int>(parse_config_integer(key, value));
    else if (key == "folds") cfg.folds = static_cast<int>(parse_config_integer(key, value));
    else if (key == "replicates") cfg.replicates = static_cast<int>(parse_config_integer(key, value));
    else if (key == "rule") cfg.rule = parse_rule(key, value);
    else if (key == "standardize") cfg.standardize = parse_config_flag(key, value);
    else if (key == "fixed-truth") cfg.fixed_truth = parse_config_flag(key, value);
    else if (key == "data") cfg.data_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "seed") cfg.seed = parse_config_seed(key, value);
    else if (key == "threads") cfg.threads = static_cast<int>(parse_config_integer(key, value));
    else throw std::logic_error("apply_config_key: unhandled key " + key);
}

}  // namespace detail

inline std::vector<ConfigEntry> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::vector<ConfigEntry> entries;
    std::string section, line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                            ": malformed section header '" + text + "'");
            const std::string name = detail::trim(text.substr(1, text.size() - 2));
            try {
                parse_command(name);
            } catch (const std::invalid_argument&) {
                throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                            ": unknown section [" + name + "]");
            }
            section = name;
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected key=value, got '" + text + "'");
        ConfigEntry entry;
        entry.section = section;
        entry.key = detail::trim(text.substr(0, eq));
        entry.value = detail::trim(text.substr(eq + 1));
        entry.line = line_no;
        if (entry.key.empty())
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": empty key");
        entries.push_back(std::move(entry));
    }
    return entries;
}

inline void validate_run_config(const RunConfig& cfg) {
    check_design_spec(cfg.design);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw std::invalid_argument("key 'alpha': must lie strictly between 0 and 1");
    if (cfg.b_permutations < 99)
        throw std::invalid_argument("key 'permutations': must be at least 99");
    if (cfg.folds < 2) throw std::invalid_argument("key 'folds': must be at least 2");
    if (cfg.replicates < 1) throw std::invalid_argument("key 'replicates': must be at least 1");
    if (cfg.threads < 1) throw std::invalid_argument("key 'threads': must be at least 1");
    if (cfg.command == Command::estimate)
        for (Method m : cfg.methods)
            if (!is_estimation_method(m))
                throw std::invalid_argument(std::string("key 'method': '") + method_name(m) +
                                            "' is not an estimation method");
    if (!cfg.data_path.empty() && cfg.command != Command::screen_clean)
        throw std::invalid_argument("key 'data': only valid for the screen-clean command");
}

// Layered assembly: defaults, then the config file (top-level entries first,
// then the command's section), then command-line flags. Method lists replace
// the previous layer wholesale rather than accumulating across layers.
inline RunConfig build_run_config(Command command, const std::optional<std::string>& config_path,
                                  const CliOverrides& flags) {
    RunConfig cfg;
    cfg.command = command;

    if (const char* env = std::getenv("TWOSTAGE_THREADS")) {
        cfg.threads =
            static_cast<int>(detail::parse_config_integer("TWOSTAGE_THREADS", env));
    }

    if (config_path) {
        const auto entries = load_config_file(*config_path);
        const auto universal = detail::all_known_keys();
        const auto command_keys = detail::known_keys(command);
        for (const auto& entry : entries) {
            if (entry.section.empty()) {
                if (!universal.count(entry.key))
                    throw std::invalid_argument(*config_path + ":" + std::to_string(entry.line) +
                                                ": unknown key '" + entry.key + "'");
            } else if (!detail::known_keys(parse_command(entry.section)).count(entry.key)) {
                throw std::invalid_argument(*config_path + ":" + std::to_string(entry.line) +
                                            ": unknown key '" + entry.key + "' in section [" +
                                            entry.section + "]");
            }
        }
        const auto apply_layer = [&](const std::string& section) {
            std::vector<Method> layer_methods;
            for (const auto& entry : entries) {
                if (entry.section != section) continue;
                if (!command_keys.count(entry.key)) continue;  // meant for another command
                if (entry.key == "method") {
                    const auto parsed = detail::parse_method_list(entry.key, entry.value);
                    layer_methods.insert(layer_methods.end(), parsed.begin(), parsed.end());
                } else {
                    detail::apply_config_key(cfg, entry.key, entry.value);
                }
            }
            if (!layer_methods.empty()) cfg.methods = std::move(layer_methods);
        };
        apply_layer("");
        apply_layer(command_name(command));
    }

    if (flags.design) cfg.design.design = parse_design(*flags.design);
    if (flags.n) cfg.design.n = *flags.n;
    if (flags.p) cfg.design.p = *flags.p;
    if (flags.s_star) cfg.design.s_star = *flags.s_star;
    if (flags.block_size) cfg.design.block_size = *flags.block_size;
    if (flags.rho) cfg.design.rho = *flags.rho;
    if (flags.snr) cfg.design.snr = *flags.snr;
    if (flags.beta_law) cfg.design.beta_law = parse_beta_law(*flags.beta_law);
    if (flags.alpha) cfg.alpha = *flags.alpha;
    if (flags.permutations) cfg.b_permutations = *flags.permutations;
    if (flags.folds) cfg.folds = *flags.folds;
    if (flags.replicates) cfg.replicates = *flags.replicates;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.rule) cfg.rule = detail::parse_rule("rule", *flags.rule);
    if (flags.standardize) cfg.standardize = *flags.standardize;
    if (flags.fixed_truth) cfg.fixed_truth = *flags.fixed_truth;
    if (flags.data) cfg.data_path = *flags.data;
    if (flags.out) cfg.out_dir = *flags.out;
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.methods.empty()) {
        cfg.methods.clear();
        for (const auto& name : flags.methods) {
            const auto parsed = detail::parse_method_list("method", name);
            cfg.methods.insert(cfg.methods.end(), parsed.begin(), parsed.end());
        }
    }

    if (cfg.methods.empty()) {
        if (command == Command::estimate)
            cfg.methods = {Method::lasso, Method::lasso_ols, Method::lasso_ridge,
                           Method::lasso_adaptive, Method::joint_adaptive};
        else if (command == Command::experiment)
            cfg.methods = {Method::sc_ar};
    }

    validate_run_config(cfg);
    return cfg;
}

}  // namespace twostage
