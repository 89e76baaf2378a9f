#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace twostage {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Response vector plus design matrix with matching row counts.
struct Dataset {
    MatrixXd x;
    VectorXd y;

    Index n() const { return x.rows(); }
    Index p() const { return x.cols(); }

    Dataset rows(const std::vector<Index>& idx) const {
        Dataset out;
        out.x.resize(static_cast<Index>(idx.size()), x.cols());
        out.y.resize(static_cast<Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.x.row(static_cast<Index>(i)) = x.row(idx[i]);
            out.y(static_cast<Index>(i)) = y(idx[i]);
        }
        return out;
    }

    // Columns restricted to `support`, preserving the given order.
    MatrixXd columns(const std::vector<Index>& support) const {
        MatrixXd out(x.rows(), static_cast<Index>(support.size()));
        for (std::size_t k = 0; k < support.size(); ++k)
            out.col(static_cast<Index>(k)) = x.col(support[k]);
        return out;
    }
};

inline void check_dataset(const Dataset& d) {
    if (d.x.rows() != d.y.size())
        throw std::invalid_argument("dataset: row count of x must match length of y");
    if (!d.x.allFinite() || !d.y.allFinite())
        throw std::invalid_argument("dataset: entries must be finite");
}

struct Standardization {
    VectorXd column_scale;  // sample standard deviation each column was divided by
};

// Centers y and every column of x, then scales columns to unit sample
// standard deviation. Constant columns stay unscaled. A coefficient fitted on
// the standardized data maps back to the original scale by dividing by the
// corresponding column_scale entry.
inline Standardization standardize_dataset(Dataset& d) {
    const Index n = d.n();
    if (n < 2) throw std::invalid_argument("standardize: need at least 2 rows");
    d.y.array() -= d.y.mean();
    Standardization s;
    s.column_scale = VectorXd::Ones(d.p());
    for (Index j = 0; j < d.p(); ++j) {
        auto col = d.x.col(j);
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n - 1));
        if (sd > 0.0) {
            col /= sd;
            s.column_scale(j) = sd;
        }
    }
    return s;
}

}  // namespace twostage
