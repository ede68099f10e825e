#pragma once

// Image-level fusion: per-channel block probabilities, two-end sampling of
// their sorted distribution, and a stump ensemble over the sampled values.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "blocks.hpp"
#include "channelsel.hpp"
#include "error.hpp"
#include "gbdt.hpp"
#include "saab.hpp"

namespace apixelhop {

struct EnsembleConfig {
    double p = 20.0;
    int tail = 13;
    BoostConfig meta{10, 1, 0.1, 1.0, 1.0, 0.0};

    void validate() const {
        require(p > 0.0 && p < 100.0, Errc::InvalidArgument, "p must lie in (0, 100)");
        require(tail >= 1, Errc::InvalidArgument, "tail must be >= 1");
        meta.validate();
    }
};

/// One vector of block probabilities per bank channel.
using SoftDecisionSet = std::vector<std::vector<double>>;

/// Tail width round(0.005 p B), at least 1 and at most B.
inline std::size_t tail_width(std::size_t blocks, double p) {
    const auto n = static_cast<std::size_t>(std::floor(0.005 * p * static_cast<double>(blocks) + 0.5));
    return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(blocks, 1));
}

/// T evenly ranked values from each N-wide tail: bottom ascending, then top ascending.
inline std::vector<double> tail_sample(std::span<const double> scores, double p, int tail) {
    require(!scores.empty(), Errc::InvalidArgument, "tail_sample needs at least one score");
    require(tail >= 1, Errc::InvalidArgument, "tail must be >= 1");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t b = sorted.size();
    const std::size_t n = tail_width(b, p);
    const auto t = static_cast<std::size_t>(tail);
    std::vector<std::size_t> ranks(t, 0);
    for (std::size_t i = 0; i < t && t > 1; ++i)
        ranks[i] = static_cast<std::size_t>(std::floor(static_cast<double>(i * (n - 1)) / static_cast<double>(t - 1) + 0.5));
    std::vector<double> out;
    out.reserve(2 * t);
    for (std::size_t r : ranks) out.push_back(sorted[r]);
    for (std::size_t r : ranks) out.push_back(sorted[b - n + r]);
    return out;
}

inline std::vector<double> image_feature(const SoftDecisionSet& sd, const EnsembleConfig& cfg) {
    std::vector<double> out;
    out.reserve(sd.size() * 2 * static_cast<std::size_t>(cfg.tail));
    for (const auto& ch : sd) {
        const auto v = tail_sample(ch, cfg.p, cfg.tail);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

/// Finds the unit with the given side; units may hold only some kernels.
inline const SaabUnit& unit_for(std::span<const SaabUnit> units, int side) {
    for (const auto& u : units)
        if (u.shape.side == side) return u;
    fail(Errc::InvalidArgument, "no unit with side " + std::to_string(side));
}

inline SoftDecisionSet soft_decisions(std::span<const Block> blocks, std::span<const SaabUnit> units,
                                      const ChannelBank& bank) {
    SoftDecisionSet sd(bank.size());
    std::vector<double> buf;
    for (std::size_t c = 0; c < bank.size(); ++c) {
        const auto& rec = bank.selected[c];
        const SaabUnit& unit = unit_for(units, rec.key.unit);
        buf.resize(static_cast<std::size_t>(unit.shape.grid_size()));
        sd[c].reserve(blocks.size());
        for (const auto& b : blocks) {
            channel_response(b, unit, rec.key.k, buf);
            sd[c].push_back(predict_proba(rec.model, buf));
        }
    }
    return sd;
}

/// Stump ensemble over image features of a labelled block set.
inline GbdtModel fit_meta(const BlockSet& set, std::span<const SaabUnit> units, const ChannelBank& bank,
                          const EnsembleConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    std::vector<std::vector<double>> rows(set.n_images);
    std::vector<int> labels(set.n_images, -1);
    std::vector<std::vector<Block>> per(set.n_images);
    for (std::size_t i = 0; i < set.size(); ++i) {
        per[set.image_of[i]].push_back(set.blocks[i]);
        labels[set.image_of[i]] = set.labels[i];
    }
    parallel_for(set.n_images, threads, [&](std::size_t i) {
        require(!per[i].empty(), Errc::InvalidArgument, "image without blocks");
        rows[i] = image_feature(soft_decisions(per[i], units, bank), cfg);
    });
    return fit(FeatureMatrix::from_rows(rows), labels, cfg.meta, threads);
}

} // namespace apixelhop
