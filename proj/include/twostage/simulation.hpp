#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "twostage/dataset.hpp"
#include "twostage/rng.hpp"

namespace twostage {

enum class Design { ind, block, group, toep_neg };

inline std::string design_name(Design d) {
    switch (d) {
        case Design::ind: return "IND";
        case Design::block: return "BLOCK";
        case Design::group: return "GROUP";
        case Design::toep_neg: return "TOEP-";
    }
    throw std::logic_error("design_name: unknown design");
}

inline Design parse_design(const std::string& s) {
    if (s == "IND") return Design::ind;
    if (s == "BLOCK") return Design::block;
    if (s == "GROUP") return Design::group;
    if (s == "TOEP-" || s == "TOEP_NEG") return Design::toep_neg;
    throw std::invalid_argument("unknown design '" + s + "' (expected IND, BLOCK, GROUP or TOEP-)");
}

enum class BetaLaw { uniform, signed_unit };

inline std::string beta_law_name(BetaLaw b) {
    return b == BetaLaw::uniform ? "uniform" : "signed-unit";
}

inline BetaLaw parse_beta_law(const std::string& s) {
    if (s == "uniform") return BetaLaw::uniform;
    if (s == "signed-unit" || s == "signed_unit") return BetaLaw::signed_unit;
    throw std::invalid_argument("unknown beta law '" + s + "' (expected uniform or signed-unit)");
}

struct DesignSpec {
    Design design = Design::ind;
    Index n = 100;
    Index p = 100;
    Index s_star = 10;
    double rho = 0.5;
    double snr = 4.0;
    Index block_size = 25;
    BetaLaw beta_law = BetaLaw::uniform;
    std::uint64_t seed = 0;
};

inline void check_design_spec(const DesignSpec& spec) {
    if (spec.n < 1 || spec.p < 1) throw std::invalid_argument("design spec: n and p must be >= 1");
    if (spec.s_star < 1 || spec.s_star > spec.p)
        throw std::invalid_argument("design spec: s_star must lie in [1, p]");
    if (spec.design != Design::ind) {
        if (!(spec.rho > 0.0 && spec.rho < 1.0))
            throw std::invalid_argument("design spec: rho must lie in (0,1)");
        if (spec.block_size < 1) throw std::invalid_argument("design spec: block_size must be >= 1");
    }
    if (!(spec.snr > 0.0)) throw std::invalid_argument("design spec: snr must be positive");
    if (spec.design == Design::group || spec.design == Design::toep_neg) {
        const Index full_blocks = spec.p / spec.block_size;
        const Index needed = (spec.s_star + spec.block_size - 1) / spec.block_size;
        if (needed > full_blocks)
            throw std::invalid_argument("design spec: s_star does not fit in whole blocks");
    }
}

// Population covariance of the predictors. Blocks are contiguous index ranges
// of width block_size; within a block, BLOCK/GROUP use a constant correlation
// rho and TOEP- uses (-rho)^|i-j|, which stays positive definite where the
// unsigned -rho^|i-j| profile would not.
inline MatrixXd covariance(const DesignSpec& spec) {
    check_design_spec(spec);
    MatrixXd sigma = MatrixXd::Identity(spec.p, spec.p);
    if (spec.design == Design::ind) return sigma;
    for (Index start = 0; start < spec.p; start += spec.block_size) {
        const Index end = std::min(start + spec.block_size, spec.p);
        for (Index i = start; i < end; ++i) {
            for (Index j = start; j < end; ++j) {
                if (i == j) continue;
                if (spec.design == Design::toep_neg)
                    sigma(i, j) = std::pow(-spec.rho, static_cast<double>(std::abs(i - j)));
                else
                    sigma(i, j) = spec.rho;
            }
        }
    }
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance: design is not positive definite");
    return sigma;
}

// Indices of the relevant variables. IND/BLOCK draw a uniform subset; GROUP
// and TOEP- draw whole blocks uniformly at random and fill them contiguously
// from each block start.
inline std::vector<Index> place_support(const DesignSpec& spec, std::mt19937_64& eng) {
    check_design_spec(spec);
    std::vector<Index> support;
    if (spec.design == Design::ind || spec.design == Design::block) {
        std::vector<Index> all(spec.p);
        std::iota(all.begin(), all.end(), Index{0});
        for (Index k = 0; k < spec.s_star; ++k) {
            std::uniform_int_distribution<Index> pick(k, spec.p - 1);
            std::swap(all[k], all[pick(eng)]);
        }
        support.assign(all.begin(), all.begin() + spec.s_star);
    } else {
        const Index full_blocks = spec.p / spec.block_size;
        const Index needed = (spec.s_star + spec.block_size - 1) / spec.block_size;
        std::vector<Index> blocks(full_blocks);
        std::iota(blocks.begin(), blocks.end(), Index{0});
        for (Index k = 0; k < needed; ++k) {
            std::uniform_int_distribution<Index> pick(k, full_blocks - 1);
            std::swap(blocks[k], blocks[pick(eng)]);
        }
        blocks.resize(needed);
        std::sort(blocks.begin(), blocks.end());
        Index remaining = spec.s_star;
        for (Index b : blocks) {
            const Index take = std::min(remaining, spec.block_size);
            for (Index k = 0; k < take; ++k) support.push_back(b * spec.block_size + k);
            remaining -= take;
        }
    }
    std::sort(support.begin(), support.end());
    return support;
}

inline VectorXd draw_beta(const std::vector<Index>& support, BetaLaw law, Index p,
                          std::mt19937_64& eng) {
    VectorXd beta = VectorXd::Zero(p);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    for (Index j : support) {
        if (law == BetaLaw::uniform)
            beta(j) = unif(eng);
        else
            beta(j) = coin(eng) ? 1.0 : -1.0;
    }
    return beta;
}

// Noise level making beta*' Sigma beta* / sigma^2 equal the requested
// signal-to-noise ratio.
inline double noise_sigma(const VectorXd& beta_star, const MatrixXd& sigma, double snr) {
    if (!(snr > 0.0)) throw std::invalid_argument("noise_sigma: snr must be positive");
    const double signal = beta_star.dot(sigma * beta_star);
    if (!(signal > 0.0))
        throw std::invalid_argument("noise_sigma: beta* carries no signal");
    return std::sqrt(signal / snr);
}

struct SimulatedDataset {
    Dataset data;
    VectorXd beta_star;
    std::vector<Index> support_star;
    MatrixXd sigma_matrix;
    double sigma_noise = 0.0;
};

namespace detail {

inline MatrixXd gaussian_rows(Index n, Index p, const MatrixXd& chol_lower,
                              std::mt19937_64& eng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) z(i, j) = normal(eng);
    return z * chol_lower.transpose();
}

inline SimulatedDataset simulate_from(const DesignSpec& spec, const std::vector<Index>& support,
                                      const VectorXd& beta_star, std::mt19937_64& eng) {
    SimulatedDataset out;
    out.sigma_matrix = covariance(spec);
    out.support_star = support;
    out.beta_star = beta_star;
    out.sigma_noise = noise_sigma(beta_star, out.sigma_matrix, spec.snr);
    const MatrixXd chol = out.sigma_matrix.llt().matrixL();
    out.data.x = gaussian_rows(spec.n, spec.p, chol, eng);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd noise(spec.n);
    for (Index i = 0; i < spec.n; ++i) noise(i) = normal(eng);
    out.data.y = out.data.x * beta_star + out.sigma_noise * noise;
    return out;
}

}  // namespace detail

// Draw order is fixed (support, beta*, X, noise) so one seed pins the dataset.
inline SimulatedDataset simulate(const DesignSpec& spec) {
    check_design_spec(spec);
    auto eng = make_engine(spec.seed);
    const auto support = place_support(spec, eng);
    const VectorXd beta_star = draw_beta(support, spec.beta_law, spec.p, eng);
    return detail::simulate_from(spec, support, beta_star, eng);
}

// Variant with the truth held fixed across replicates: only X and the noise
// are redrawn from the spec seed.
inline SimulatedDataset simulate_with_truth(const DesignSpec& spec,
                                            const std::vector<Index>& support,
                                            const VectorXd& beta_star) {
    check_design_spec(spec);
    if (beta_star.size() != spec.p)
        throw std::invalid_argument("simulate_with_truth: beta* has wrong length");
    auto eng = make_engine(spec.seed);
    return detail::simulate_from(spec, support, beta_star, eng);
}

}  // namespace twostage
