#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace apixelhop {

struct ScoredPoint {
    double score;
    int label; ///< 1 = positive (fake)
};

using ScoredSet = std::vector<ScoredPoint>;

/// Mann-Whitney AUC: P(s+ > s-) + 1/2 P(s+ == s-), from average ranks.
inline double auc(const ScoredSet& set) {
    std::size_t pos = 0;
    for (const auto& p : set) {
        require(std::isfinite(p.score), Errc::NonFinite, "auc: non-finite score");
        pos += p.label == 1 ? 1 : 0;
    }
    const std::size_t neg = set.size() - pos;
    if (pos == 0 || neg == 0) fail(Errc::SingleClass, "auc needs both labels");

    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set[a].score < set[b].score; });

    // Ranks are 1-based; a tie group spanning ranks [i+1, j] gets (i+1+j)/2.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && set[order[j]].score == set[order[i]].score) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t)
            if (set[order[t]].label == 1) rank_sum += avg;
        i = j;
    }
    const double np = static_cast<double>(pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

/// Sum of precision@k at each positive rank k, over the positive count.
/// Sorted by descending score; ties keep input order.
inline double average_precision(const ScoredSet& set) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set[a].score > set[b].score; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (set[order[k]].label == 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    if (hits == 0) fail(Errc::NoPositives, "average precision needs at least one positive");
    return sum / static_cast<double>(hits);
}

inline double accuracy(const ScoredSet& set, double threshold = 0.5) {
    require(!set.empty(), Errc::InvalidArgument, "accuracy of an empty set");
    std::size_t correct = 0;
    for (const auto& p : set) correct += ((p.score >= threshold ? 1 : 0) == p.label) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

inline double mean_ap(const std::vector<std::pair<std::string, ScoredSet>>& sets) {
    require(!sets.empty(), Errc::InvalidArgument, "mean_ap needs at least one set");
    double sum = 0.0;
    for (const auto& [name, s] : sets) sum += average_precision(s);
    return sum / static_cast<double>(sets.size());
}

} // namespace apixelhop
