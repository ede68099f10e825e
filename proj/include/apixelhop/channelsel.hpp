#pragma once

// Per-(unit, channel) block classifiers and per-unit selection by validation AUC.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blocks.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "gbdt.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "saab.hpp"

namespace apixelhop {

struct ChannelKey {
    int unit = 2; ///< filter side s
    int k = 0;

    bool operator==(const ChannelKey&) const = default;
};

struct ChannelRecord {
    ChannelKey key;
    GbdtModel model;
    double train_auc = 0.0;
    double val_auc = 0.0;

    bool operator==(const ChannelRecord&) const = default;
};

struct ChannelBank {
    std::vector<ChannelRecord> selected; ///< grouped by unit (s = 2, 3, 4), best first within a unit
    int n_sel_per_unit = 2;

    std::size_t size() const { return selected.size(); }
    bool operator==(const ChannelBank&) const = default;
};

/// Selected blocks of a set of images; labels and source image per block.
struct BlockSet {
    std::vector<Block> blocks;
    std::vector<int> labels;
    std::vector<std::uint32_t> image_of;
    std::size_t n_images = 0;

    std::size_t size() const { return blocks.size(); }
};

inline BlockSet gather_blocks(const std::vector<RgbImage>& images, std::span<const int> labels,
                              const AttentionConfig& attention, unsigned threads = 1) {
    require(images.size() == labels.size(), Errc::DimensionMismatch, "one label per image");
    std::vector<std::vector<Block>> per(images.size());
    parallel_for(images.size(), threads, [&](std::size_t i) { per[i] = select_blocks(images[i], attention); });
    BlockSet set;
    set.n_images = images.size();
    for (std::size_t i = 0; i < per.size(); ++i) {
        for (auto& b : per[i]) {
            set.blocks.push_back(b);
            set.labels.push_back(labels[i]);
            set.image_of.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return set;
}

/// Block indices with per-class counts equalised: the majority class keeps a
/// seeded random subset of its blocks. Result is in ascending block order.
inline std::vector<std::size_t> balanced_rows(std::span<const int> labels, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
    if (by_class[0].empty() || by_class[1].empty()) fail(Errc::EmptyClass, "block set lacks one class");
    const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
    Rng rng(derive_seed(seed, 0xB1A5));
    std::vector<std::size_t> rows;
    for (auto& cls : by_class) {
        if (cls.size() > keep) {
            const auto perm = permutation(cls.size(), rng);
            std::vector<std::size_t> chosen(keep);
            for (std::size_t i = 0; i < keep; ++i) chosen[i] = cls[perm[i]];
            cls = std::move(chosen);
        }
        rows.insert(rows.end(), cls.begin(), cls.end());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

/// Channel-k responses of the given blocks, one row per block.
inline FeatureMatrix channel_matrix(const BlockSet& set, std::span<const std::size_t> rows, const SaabUnit& unit,
                                    int k) {
    const auto g = static_cast<std::size_t>(unit.shape.grid_size());
    FeatureMatrix X(rows.size(), g);
    std::vector<double> buf(g);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        channel_response(set.blocks[rows[r]], unit, k, buf);
        X.set_row(r, buf);
    }
    return X;
}

struct BlockDataset {
    FeatureMatrix X;
    std::vector<int> y;
};

inline BlockDataset build_block_dataset(const BlockSet& set, const SaabUnit& unit, int k, std::uint64_t seed) {
    const auto rows = balanced_rows(set.labels, seed);
    BlockDataset ds{channel_matrix(set, rows, unit, k), {}};
    ds.y.reserve(rows.size());
    for (std::size_t r : rows) ds.y.push_back(set.labels[r]);
    return ds;
}

inline ScoredSet score_rows(const GbdtModel& model, const FeatureMatrix& X, std::span<const int> y) {
    ScoredSet out(X.rows());
    std::vector<double> row(X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t c = 0; c < X.cols(); ++c) row[c] = X(r, c);
        out[r] = {predict_proba(model, row), y[r]};
    }
    return out;
}

struct SelectionResult {
    ChannelBank bank;
    std::vector<ChannelRecord> all; ///< every channel, unit-major then channel order; models dropped
};

/// Fits one classifier per channel of every unit (units: s = 2, 3, 4, complete)
/// and keeps the top n_sel per unit by validation AUC, lower channel on ties.
inline SelectionResult rank_and_select(const BlockSet& train, const BlockSet& val, std::span<const SaabUnit> units,
                                       const BoostConfig& cfg, int n_sel_per_unit, std::uint64_t seed,
                                       unsigned threads = 1) {
    require(n_sel_per_unit >= 1 && n_sel_per_unit <= 4, Errc::InvalidArgument, "n_sel_per_unit must lie in [1, 4]");
    require(units.size() == kUnitSides.size(), Errc::InvalidArgument, "expected three units");
    cfg.validate();

    std::vector<ChannelKey> keys;
    for (const auto& u : units) {
        require(u.complete(), Errc::InvalidArgument, "channel ranking needs complete units");
        for (int k = 0; k < u.shape.dim(); ++k) keys.push_back({u.shape.side, k});
    }
    auto unit_of = [&](int side) -> const SaabUnit& {
        for (const auto& u : units)
            if (u.shape.side == side) return u;
        fail(Errc::InvalidArgument, "no unit with side " + std::to_string(side));
    };

    const auto train_rows = balanced_rows(train.labels, seed);
    std::vector<int> train_y;
    for (std::size_t r : train_rows) train_y.push_back(train.labels[r]);
    std::vector<std::size_t> val_rows(val.size());
    for (std::size_t i = 0; i < val_rows.size(); ++i) val_rows[i] = i;

    std::vector<ChannelRecord> records(keys.size());
    parallel_for(keys.size(), threads, [&](std::size_t i) {
        const SaabUnit& unit = unit_of(keys[i].unit);
        const FeatureMatrix X = channel_matrix(train, train_rows, unit, keys[i].k);
        ChannelRecord rec{keys[i], fit(X, train_y, cfg, 1), 0.0, 0.0};
        rec.train_auc = auc(score_rows(rec.model, X, train_y));
        const FeatureMatrix V = channel_matrix(val, val_rows, unit, keys[i].k);
        rec.val_auc = auc(score_rows(rec.model, V, val.labels));
        records[i] = std::move(rec);
    });

    SelectionResult result;
    result.bank.n_sel_per_unit = n_sel_per_unit;
    for (int side : kUnitSides) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].key.unit == side) idx.push_back(i);
        require(static_cast<int>(idx.size()) >= n_sel_per_unit, Errc::InvalidArgument, "unit has too few channels");
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return records[a].val_auc > records[b].val_auc; });
        for (int j = 0; j < n_sel_per_unit; ++j) result.bank.selected.push_back(records[idx[j]]);
    }
    for (auto& r : records) {
        r.model = {};
        result.all.push_back(std::move(r));
    }
    return result;
}

/// `unit,channel,train_auc,val_auc,selected` rows.
inline void write_channel_report(std::ostream& out, const SelectionResult& sel) {
    out << "unit,channel,train_auc,val_auc,selected\n";
    char buf[64];
    for (const auto& r : sel.all) {
        const bool chosen = std::any_of(sel.bank.selected.begin(), sel.bank.selected.end(),
                                        [&](const ChannelRecord& s) { return s.key == r.key; });
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.train_auc, r.val_auc);
        out << r.key.unit << ',' << r.key.k << ',' << buf << ',' << (chosen ? 1 : 0) << '\n';
    }
}

} // namespace apixelhop
