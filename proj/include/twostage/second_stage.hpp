#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "twostage/lasso.hpp"
#include "twostage/penalized_solver.hpp"

namespace twostage {

class EmptySupportError : public std::runtime_error {
  public:
    explicit EmptySupportError(const std::string& what) : std::runtime_error(what) {}
};

// Per-variable ridge weights lambda / |beta_j| transferred from a first-stage
// fit; defined only on the support.
struct AdaptiveWeights {
    double lambda = 0.0;
    std::vector<Index> support;  // sorted
    VectorXd weights;            // aligned with support

    std::size_t size() const { return support.size(); }
};

// Coefficients with magnitude below this floor count as off-support rather
// than producing near-infinite weights.
inline constexpr double kSupportFloor = 1e-12;

inline AdaptiveWeights adaptive_weights(const LassoFit& fit) {
    AdaptiveWeights w;
    w.lambda = fit.lambda;
    std::vector<double> vals;
    for (Index j = 0; j < fit.beta.size(); ++j) {
        const double mag = std::abs(fit.beta(j));
        if (mag > kSupportFloor) {
            w.support.push_back(j);
            vals.push_back(fit.lambda / mag);
        }
    }
    w.weights = Eigen::Map<const VectorXd>(vals.data(), static_cast<Index>(vals.size()));
    return w;
}

enum class FitKind { ols, ridge, adaptive_ridge };

struct SecondStageFit {
    FitKind kind = FitKind::ols;
    double mu = 0.0;
    VectorXd beta;               // full length p, exact zeros off support
    std::vector<Index> support;
};

// Descending geometric grid of ridge strengths spanning [lo, hi] relative to 1/n.
inline std::vector<double> make_mu_grid(Index n, int count = 25, double lo = 1e-4,
                                        double hi = 1e4) {
    if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("make_mu_grid: need 0 < lo < hi");
    return lambda_grid(hi / static_cast<double>(n), count, lo / hi);
}

// Ridge diagonal on the support for a given kind and strength.
inline VectorXd cleaning_penalty(const AdaptiveWeights& w, double mu, FitKind kind) {
    const Index q = static_cast<Index>(w.size());
    switch (kind) {
        case FitKind::ols:
            return VectorXd::Zero(q);
        case FitKind::ridge:
            return VectorXd::Constant(q, mu);
        case FitKind::adaptive_ridge:
            return mu * w.weights;
    }
    throw std::logic_error("cleaning_penalty: unknown kind");
}

// Penalized least squares restricted to the screened support; coefficients
// off the support stay exactly zero.
inline SecondStageFit second_stage_fit(const MatrixXd& x, const VectorXd& y,
                                       const AdaptiveWeights& w, double mu, FitKind kind) {
    if (w.support.empty())
        throw EmptySupportError("second_stage_fit: screened support is empty");
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("second_stage_fit: mu must be finite and non-negative");
    MatrixXd xs(x.rows(), static_cast<Index>(w.size()));
    for (std::size_t k = 0; k < w.size(); ++k)
        xs.col(static_cast<Index>(k)) = x.col(w.support[k]);
    const VectorXd beta_s = solve_penalized(xs, y, cleaning_penalty(w, mu, kind));
    SecondStageFit fit;
    fit.kind = kind;
    fit.mu = mu;
    fit.support = w.support;
    fit.beta = VectorXd::Zero(x.cols());
    for (std::size_t k = 0; k < w.size(); ++k) fit.beta(w.support[k]) = beta_s(static_cast<Index>(k));
    return fit;
}

}  // namespace twostage
