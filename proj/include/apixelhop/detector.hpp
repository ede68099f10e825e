#pragma once

// End-to-end training and inference over one immutable DetectorModel.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "blocks.hpp"
#include "channelsel.hpp"
#include "corpus.hpp"
#include "ensemble.hpp"
#include "gbdt.hpp"
#include "parallel.hpp"
#include "saab.hpp"

namespace apixelhop {

struct DetectorConfig {
    AttentionConfig attention;
    BoostConfig boost;
    EnsembleConfig ensemble;
    int n_sel_per_unit = 2;
    double val_fraction = 0.2;
    std::optional<int> target_side;
    std::size_t max_patches = 200000;
    std::uint64_t seed = 7;
    bool store_full_units = false;

    void validate() const {
        attention.validate();
        boost.validate();
        ensemble.validate();
        require(n_sel_per_unit >= 1 && n_sel_per_unit <= 4, Errc::InvalidArgument, "n_sel must lie in [1, 4]");
        require(val_fraction > 0.0 && val_fraction < 1.0, Errc::InvalidArgument, "val_frac must lie in (0, 1)");
        require(!target_side || *target_side >= kBlockSide, Errc::InvalidArgument, "target_side must be >= 16");
        require(max_patches >= 1, Errc::InvalidArgument, "max_patches must be >= 1");
    }
};

struct Provenance {
    std::string created;         ///< ISO-8601 UTC
    std::string manifest_sha256; ///< digest of the training manifest CSV
};

struct DetectorModel {
    DetectorConfig config;
    std::vector<SaabUnit> units; ///< s = 2, 3, 4
    ChannelBank bank;
    GbdtModel meta;
    Provenance provenance;

    std::size_t feature_length() const { return bank.size() * 2 * static_cast<std::size_t>(config.ensemble.tail); }
};

inline ImageOptions image_options(const DetectorConfig& cfg) { return {cfg.target_side, std::nullopt}; }

inline SoftDecisionSet collect_soft_decisions(const RgbImage& image, const DetectorModel& model) {
    const auto blocks = select_blocks(image, model.config.attention);
    return soft_decisions(blocks, model.units, model.bank);
}

struct ImageVerdict {
    double score;
    Label label;
};

inline ImageVerdict predict_image(const RgbImage& image, const DetectorModel& model, double threshold = 0.5) {
    const auto feature = image_feature(collect_soft_decisions(image, model), model.config.ensemble);
    const double score = predict_proba(model.meta, feature);
    return {score, score >= threshold ? Label::Fake : Label::Real};
}

inline std::vector<RgbImage> load_images(const LabeledSet& set, const ImageOptions& opts, unsigned threads) {
    std::vector<RgbImage> out(set.size());
    parallel_for(set.size(), threads, [&](std::size_t i) { out[i] = load_image(set.items[i].path, opts); });
    return out;
}

inline std::vector<int> int_labels(const LabeledSet& set) {
    std::vector<int> y;
    for (const auto& it : set.items) y.push_back(static_cast<int>(it.label));
    return y;
}

struct TrainResult {
    DetectorModel model;
    SelectionResult selection;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Learns units from training blocks, ranks channels on train/val, fits the
/// meta classifier on training images.
inline TrainResult train_detector(const LabeledSet& train, const LabeledSet& val, const DetectorConfig& cfg,
                                  unsigned threads = 1, const ProgressFn& progress = {}) {
    cfg.validate();
    auto note = [&](const std::string& s) {
        if (progress) progress(s);
    };
    require(train.count(Label::Real) > 0 && train.count(Label::Fake) > 0, Errc::EmptyClass,
            "training set needs both classes");
    require(val.count(Label::Real) > 0 && val.count(Label::Fake) > 0, Errc::EmptyClass,
            "validation set needs both classes");

    const auto opts = image_options(cfg);
    note("selecting blocks");
    const BlockSet train_blocks = gather_blocks(load_images(train, opts, threads), int_labels(train), cfg.attention, threads);
    const BlockSet val_blocks = gather_blocks(load_images(val, opts, threads), int_labels(val), cfg.attention, threads);

    note("learning Saab units");
    std::vector<SaabUnit> units;
    for (int side : kUnitSides) {
        const auto shape = FilterShape::of(side);
        const auto patches = sample_patches(train_blocks.blocks, shape, cfg.max_patches, cfg.seed);
        units.push_back(learn_unit(patches, shape, threads));
    }

    note("training channel classifiers");
    SelectionResult sel = rank_and_select(train_blocks, val_blocks, units, cfg.boost, cfg.n_sel_per_unit, cfg.seed, threads);

    note("fitting image-level ensemble");
    GbdtModel meta = fit_meta(train_blocks, units, sel.bank, cfg.ensemble, threads);

    DetectorModel model{cfg, {}, sel.bank, std::move(meta), {}};
    for (const auto& u : units) {
        if (cfg.store_full_units) {
            model.units.push_back(u);
            continue;
        }
        std::vector<int> keep;
        for (const auto& rec : sel.bank.selected)
            if (rec.key.unit == u.shape.side) keep.push_back(rec.key.k);
        model.units.push_back(u.restricted(keep));
    }
    return {std::move(model), std::move(sel)};
}

} // namespace apixelhop
