#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

using namespace apixelhop;

namespace {

BlockSet synth_blocks(std::size_t n_real, std::size_t n_fake, int side, int k, std::uint64_t seed) {
    const SynthConfig cfg{std::max(n_real, n_fake), side, seed, 4};
    std::vector<RgbImage> images;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n_real; ++i) {
        images.push_back(gen_real(cfg, i));
        labels.push_back(0);
    }
    for (std::size_t i = 0; i < n_fake; ++i) {
        images.push_back(gen_fake(cfg, i));
        labels.push_back(1);
    }
    AttentionConfig att;
    att.blocks_per_image = k;
    return gather_blocks(images, labels, att, 2);
}

std::vector<SaabUnit> learn_units(const BlockSet& set) {
    std::vector<SaabUnit> units;
    for (int s : kUnitSides) {
        const auto shape = FilterShape::of(s);
        units.push_back(learn_unit(sample_patches(set.blocks, shape, 20000, 7), shape));
    }
    return units;
}

BoostConfig quick_boost() {
    BoostConfig c;
    c.n_trees = 3;
    c.max_depth = 2;
    return c;
}

} // namespace

TEST(ChannelSel, BlockDatasetShape) {
    const auto set = synth_blocks(10, 10, 256, 64, 7);
    ASSERT_EQ(set.size(), 1280u);
    const auto shape = FilterShape::of(2);
    const auto unit = learn_unit(sample_patches(set.blocks, shape, 5000, 7), shape);
    const auto ds = build_block_dataset(set, unit, 3, 7);
    EXPECT_EQ(ds.X.rows(), 1280u);
    EXPECT_EQ(ds.X.cols(), 225u);
    EXPECT_EQ(std::count(ds.y.begin(), ds.y.end(), 1), 640);

    const auto again = build_block_dataset(set, unit, 3, 7);
    EXPECT_EQ(ds.X.raw().size(), again.X.raw().size());
    EXPECT_TRUE(std::equal(ds.X.raw().begin(), ds.X.raw().end(), again.X.raw().begin()));
    EXPECT_EQ(ds.y, again.y);
}

TEST(ChannelSel, BalancedRowsDownsamplesMajority) {
    std::vector<int> labels(30, 0);
    for (int i = 0; i < 8; ++i) labels[static_cast<std::size_t>(3 * i + 1)] = 1;
    const auto rows = balanced_rows(labels, 5);
    ASSERT_EQ(rows.size(), 16u);
    EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
    int pos = 0;
    for (auto r : rows) pos += labels[r];
    EXPECT_EQ(pos, 8);
    EXPECT_EQ(rows, balanced_rows(labels, 5));
    EXPECT_NE(rows, balanced_rows(labels, 6));

    const auto set = synth_blocks(6, 3, 64, 8, 7);
    const auto shape = FilterShape::of(3);
    const auto unit = learn_unit(sample_patches(set.blocks, shape, 5000, 7), shape);
    const auto ds = build_block_dataset(set, unit, 0, 1);
    EXPECT_EQ(ds.X.rows(), 48u);
    EXPECT_EQ(std::count(ds.y.begin(), ds.y.end(), 0), 24);
}

TEST(ChannelSel, BalancedRowsNeedsBothClasses) {
    try {
        balanced_rows(std::vector<int>{1, 1, 1}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyClass);
    }
}

TEST(ChannelSel, RankAndSelect) {
    const auto train = synth_blocks(8, 8, 64, 8, 7);
    const auto val = synth_blocks(4, 4, 64, 8, 99);
    const auto units = learn_units(train);

    for (int n_sel : {2, 3}) {
        const auto sel = rank_and_select(train, val, units, quick_boost(), n_sel, 7, 2);
        ASSERT_EQ(sel.bank.size(), static_cast<std::size_t>(3 * n_sel));
        EXPECT_EQ(sel.bank.n_sel_per_unit, n_sel);
        ASSERT_EQ(sel.all.size(), 87u);
        for (std::size_t i = 0; i < sel.bank.size(); ++i) {
            const auto& rec = sel.bank.selected[i];
            EXPECT_EQ(rec.key.unit, kUnitSides[i / static_cast<std::size_t>(n_sel)]);
            EXPECT_EQ(rec.model.n_features, FilterShape::of(rec.key.unit).grid_size());
            EXPECT_GE(rec.val_auc, 0.0);
            EXPECT_LE(rec.val_auc, 1.0);
            for (const auto& other : sel.all) {
                if (other.key.unit != rec.key.unit) continue;
                const bool chosen = std::any_of(sel.bank.selected.begin(), sel.bank.selected.end(),
                                                [&](const ChannelRecord& c) { return c.key == other.key; });
                if (!chosen) {
                    EXPECT_GE(rec.val_auc, other.val_auc);
                }
            }
        }
        for (const auto& r : sel.all) {
            EXPECT_GE(r.train_auc, 0.0);
            EXPECT_LE(r.train_auc, 1.0);
            EXPECT_TRUE(r.model.trees.empty());
        }
    }
}

TEST(ChannelSel, ReproducibleAcrossThreads) {
    const auto train = synth_blocks(6, 6, 64, 8, 7);
    const auto val = synth_blocks(3, 3, 64, 8, 98);
    const auto units = learn_units(train);
    const auto a = rank_and_select(train, val, units, quick_boost(), 2, 7, 1);
    const auto b = rank_and_select(train, val, units, quick_boost(), 2, 7, 3);
    EXPECT_EQ(a.bank, b.bank);
    EXPECT_EQ(a.all, b.all);
}

TEST(ChannelSel, Validation) {
    const auto train = synth_blocks(3, 3, 32, 4, 7);
    auto units = learn_units(train);
    try {
        rank_and_select(train, train, units, quick_boost(), 5, 7);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidArgument);
    }
    units[1] = units[1].restricted({0, 1});
    EXPECT_THROW(rank_and_select(train, train, units, quick_boost(), 2, 7), Error);
}

TEST(ChannelSel, ReportCsv) {
    SelectionResult sel;
    ChannelRecord a{{2, 3}, {}, 0.75, 0.5};
    ChannelRecord b{{2, 4}, {}, 0.25, 0.125};
    sel.all = {a, b};
    sel.bank.selected = {a};
    std::ostringstream out;
    write_channel_report(out, sel);
    EXPECT_EQ(out.str(), "unit,channel,train_auc,val_auc,selected\n2,3,0.750000,0.500000,1\n2,4,0.250000,0.125000,0\n");
}
