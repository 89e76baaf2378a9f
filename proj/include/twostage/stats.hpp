#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace twostage {

// Benjamini-Hochberg step-up adjustment. Sorted p-values get q_(i) = p_(i)*m/i,
// then a running minimum from the largest rank down, capped at 1; values are
// returned in the original order.
inline std::vector<double> bh_adjust(const std::vector<double>& pvalues) {
    const std::size_t m = pvalues.size();
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("bh_adjust: p-values must lie in [0,1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double q = pvalues[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running = std::min(running, q);
        adjusted[order[r]] = running;
    }
    return adjusted;
}

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
};

// Discovery set against ground-truth support over variables 0..p-1. Both index
// lists must contain valid, unique indices.
inline ConfusionCounts confusion(const std::vector<long>& discoveries,
                                 const std::vector<long>& truth, long p) {
    std::vector<char> disc(p, 0), rel(p, 0);
    for (long j : discoveries) {
        if (j < 0 || j >= p) throw std::invalid_argument("confusion: discovery index out of range");
        disc[j] = 1;
    }
    for (long j : truth) {
        if (j < 0 || j >= p) throw std::invalid_argument("confusion: truth index out of range");
        rel[j] = 1;
    }
    ConfusionCounts c;
    for (long j = 0; j < p; ++j) {
        if (disc[j] && rel[j]) ++c.tp;
        else if (disc[j]) ++c.fp;
        else if (rel[j]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// False discovery proportion and sensitivity with the indicator convention:
// zero discoveries give fdp 0, an empty truth gives sen 0.
inline std::pair<double, double> fdp_sen(const ConfusionCounts& c) {
    const long ndisc = c.tp + c.fp;
    const long nrel = c.tp + c.fn;
    const double fdp = ndisc > 0 ? static_cast<double>(c.fp) / ndisc : 0.0;
    const double sen = nrel > 0 ? static_cast<double>(c.tp) / nrel : 0.0;
    return {fdp, sen};
}

// Pooled false positive rate over screened null variables: total rejected
// nulls over total tested nulls across replicates. Empty pool is undefined.
inline std::optional<double> fpr_over_screened(const std::vector<std::pair<long, long>>& tested_rejected) {
    long tested = 0, rejected = 0;
    for (const auto& [t, r] : tested_rejected) {
        if (t < 0 || r < 0 || r > t)
            throw std::invalid_argument("fpr_over_screened: need 0 <= rejected <= tested");
        tested += t;
        rejected += r;
    }
    if (tested == 0) return std::nullopt;
    return static_cast<double>(rejected) / static_cast<double>(tested);
}

struct SenFdrCurve {
    std::vector<double> mean_fdr;  // entry k-1 is the average at rank k
    std::vector<double> mean_sen;
};

// Average false discovery proportion and sensitivity of the top-k discovery
// sets at each fixed rank k, across replicates. A replicate whose ranking has
// fewer than k entries contributes its full ranking at that k.
inline SenFdrCurve sen_fdr_curve(const std::vector<std::vector<long>>& rankings,
                                 const std::vector<std::vector<long>>& truths, long p) {
    if (rankings.size() != truths.size())
        throw std::invalid_argument("sen_fdr_curve: rankings and truths must align");
    if (rankings.empty()) throw std::invalid_argument("sen_fdr_curve: no replicates");
    std::size_t max_rank = 0;
    for (const auto& r : rankings) max_rank = std::max(max_rank, r.size());
    SenFdrCurve curve;
    curve.mean_fdr.assign(max_rank, 0.0);
    curve.mean_sen.assign(max_rank, 0.0);
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        std::vector<long> top;
        top.reserve(rankings[i].size());
        std::size_t next = 0;
        for (std::size_t k = 1; k <= max_rank; ++k) {
            if (next < rankings[i].size()) top.push_back(rankings[i][next++]);
            const auto [fdp, sen] = fdp_sen(confusion(top, truths[i], p));
            curve.mean_fdr[k - 1] += fdp;
            curve.mean_sen[k - 1] += sen;
        }
    }
    const double nrep = static_cast<double>(rankings.size());
    for (std::size_t k = 0; k < max_rank; ++k) {
        curve.mean_fdr[k] /= nrep;
        curve.mean_sen[k] /= nrep;
    }
    return curve;
}

}  // namespace twostage
