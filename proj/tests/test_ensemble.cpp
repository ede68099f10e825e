#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

using namespace apixelhop;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t n) {
    std::vector<double> s(n);
    for (auto& v : s) v = uniform01(rng);
    return s;
}

TrainResult tiny_model(const std::filesystem::path& dir, unsigned threads = 2) {
    testutil::small_corpus(dir, 12, 64);
    const auto [train, val] = scan_corpus(dir / "real", dir / "fake", SplitConfig{0.25, 7});
    return train_detector(train, val, testutil::tiny_config(), threads);
}

} // namespace

TEST(TailSample, WidthRounding) {
    EXPECT_EQ(tail_width(256, 10.0), 13u); // 12.8
    EXPECT_EQ(tail_width(4, 10.0), 1u);    // 0.2 floors to the minimum
    EXPECT_EQ(tail_width(30, 10.0), 2u);   // 1.5 rounds half up
    EXPECT_EQ(tail_width(64, 20.0), 6u);   // 6.4
    EXPECT_EQ(tail_width(10, 99.0), 5u);
    EXPECT_EQ(tail_width(1, 50.0), 1u);
}

TEST(TailSample, WholeTailsWhenTMatchesWidth) {
    Rng rng(1);
    const auto scores = random_scores(rng, 256);
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const auto out = tail_sample(scores, 10.0, 13);
    ASSERT_EQ(out.size(), 26u);
    for (std::size_t i = 0; i < 13; ++i) {
        EXPECT_EQ(out[i], sorted[i]);
        EXPECT_EQ(out[13 + i], sorted[243 + i]);
    }
}

TEST(TailSample, DegenerateAndConstant) {
    const std::vector<double> four{0.4, 0.1, 0.9, 0.6};
    EXPECT_EQ(tail_sample(four, 10.0, 2), (std::vector<double>{0.1, 0.1, 0.9, 0.9}));
    const std::vector<double> flat(50, 0.5);
    for (double v : tail_sample(flat, 20.0, 13)) EXPECT_EQ(v, 0.5);
}

TEST(TailSample, RankEvenInsideTail) {
    std::vector<double> s(100);
    for (std::size_t i = 0; i < 100; ++i) s[i] = static_cast<double>(99 - i);
    // N = 10, T = 4: ranks round(i * 9 / 3) = 0, 3, 6, 9.
    EXPECT_EQ(tail_sample(s, 20.0, 4), (std::vector<double>{0, 3, 6, 9, 90, 93, 96, 99}));
}

TEST(TailSample, CommutesWithIncreasingMaps) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 400);
        const double p = uniform(rng, 0.5, 99.0);
        const int tail = 1 + static_cast<int>(uniform_index(rng, 20));
        const auto s = random_scores(rng, n);
        auto f = [](double x) { return std::log(x + 0.01) * 3.0 + x * x; };
        std::vector<double> mapped(s.size());
        std::transform(s.begin(), s.end(), mapped.begin(), f);
        auto expected = tail_sample(s, p, tail);
        std::transform(expected.begin(), expected.end(), expected.begin(), f);
        EXPECT_EQ(tail_sample(mapped, p, tail), expected);
    }
}

TEST(TailSample, Errors) {
    EXPECT_THROW(tail_sample(std::vector<double>{}, 10.0, 3), Error);
    EXPECT_THROW(tail_sample(std::vector<double>{0.1}, 10.0, 0), Error);
}

TEST(ImageFeature, Length) {
    EnsembleConfig cfg;
    for (std::size_t channels : {6u, 9u}) {
        SoftDecisionSet sd(channels, std::vector<double>(64, 0.3));
        EXPECT_EQ(image_feature(sd, cfg).size(), channels * 26);
    }
}

TEST(ImageFeature, InvariantToBlockOrder) {
    Rng rng(4);
    SoftDecisionSet sd{random_scores(rng, 64), random_scores(rng, 64)};
    auto shuffled = sd;
    for (auto& ch : shuffled) std::reverse(ch.begin(), ch.end());
    EXPECT_EQ(image_feature(sd, EnsembleConfig{}), image_feature(shuffled, EnsembleConfig{}));
}

TEST(EnsembleConfig, Validation) {
    EnsembleConfig c;
    c.p = 0.0;
    EXPECT_THROW(c.validate(), Error);
    c.p = 100.0;
    EXPECT_THROW(c.validate(), Error);
    c.p = 20.0;
    c.tail = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Detector, SoftDecisionsShape) {
    testutil::TempDir tmp;
    const auto r = tiny_model(tmp.path());
    const auto img = testutil::random_image(256, 256, 5);
    DetectorModel m = r.model;
    m.config.attention.blocks_per_image = 64;
    const auto sd = collect_soft_decisions(img, m);
    ASSERT_EQ(sd.size(), 6u);
    for (const auto& ch : sd) {
        EXPECT_EQ(ch.size(), 64u);
        for (double v : ch) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
    }
    EXPECT_EQ(sd, collect_soft_decisions(img, m));
    EXPECT_EQ(image_feature(sd, m.config.ensemble).size(), m.feature_length());
}

TEST(Detector, SoftDecisionsMatchChannelModels) {
    testutil::TempDir tmp;
    const auto r = tiny_model(tmp.path());
    const auto img = testutil::random_image(64, 64, 6);
    const auto blocks = select_blocks(img, r.model.config.attention);
    const auto sd = collect_soft_decisions(img, r.model);
    for (std::size_t c = 0; c < r.model.bank.size(); ++c) {
        const auto& rec = r.model.bank.selected[c];
        const auto& unit = unit_for(r.model.units, rec.key.unit);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto plane = channel_features(transform(blocks[b], unit), rec.key.k);
            EXPECT_EQ(sd[c][b], predict_proba(rec.model, plane));
        }
    }
}

TEST(Detector, MetaModelAndPrediction) {
    testutil::TempDir tmp;
    const auto r = tiny_model(tmp.path());
    const auto& m = r.model;
    EXPECT_EQ(m.meta.n_features, static_cast<int>(m.feature_length()));
    EXPECT_EQ(m.meta.trees.size(), 10u);
    EXPECT_LE(count_params(m.meta), 40u);
    for (const auto& t : m.meta.trees) EXPECT_LE(t.depth(), 1);

    // Training-image AUC of the meta classifier.
    const auto [train, val] = scan_corpus(tmp / "real", tmp / "fake", SplitConfig{0.25, 7});
    ScoredSet scored;
    for (const auto& it : train.items) {
        const auto v = predict_image(load_image(it.path), m);
        EXPECT_GT(v.score, 0.0);
        EXPECT_LT(v.score, 1.0);
        EXPECT_EQ(v.label, v.score >= 0.5 ? Label::Fake : Label::Real);
        scored.push_back({v.score, static_cast<int>(it.label)});
    }
    EXPECT_GT(auc(scored), 0.95);

    const auto img = load_image(val.items.front().path);
    const auto a = predict_image(img, m);
    EXPECT_EQ(a.score, predict_image(img, m).score);
    const auto feature = image_feature(collect_soft_decisions(img, m), m.config.ensemble);
    double margin = 0.0;
    for (const auto& t : m.meta.trees) margin += t.predict(feature);
    EXPECT_DOUBLE_EQ(a.score, sigmoid(margin));
    EXPECT_EQ(predict_image(img, m, 0.0).label, Label::Fake);
    EXPECT_EQ(predict_image(img, m, 1.1).label, Label::Real);
}

TEST(Detector, StoredUnitsHoldSelectedKernels) {
    testutil::TempDir tmp;
    const auto r = tiny_model(tmp.path());
    ASSERT_EQ(r.model.units.size(), 3u);
    for (const auto& u : r.model.units) {
        std::vector<int> expected;
        for (const auto& rec : r.model.bank.selected)
            if (rec.key.unit == u.shape.side) expected.push_back(rec.key.k);
        std::sort(expected.begin(), expected.end());
        EXPECT_EQ(u.channels, expected);
    }
}

TEST(Detector, ThreadCountIndependent) {
    testutil::TempDir a;
    testutil::TempDir b;
    const auto ra = tiny_model(a.path(), 1);
    const auto rb = tiny_model(b.path(), 3);
    EXPECT_EQ(ra.model.bank, rb.model.bank);
    EXPECT_EQ(ra.model.meta, rb.model.meta);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ra.model.units[i].kernels, rb.model.units[i].kernels);
}

TEST(Detector, ConfigValidation) {
    DetectorConfig c = testutil::tiny_config();
    c.n_sel_per_unit = 0;
    EXPECT_THROW(c.validate(), Error);
    c = testutil::tiny_config();
    c.val_fraction = 1.0;
    EXPECT_THROW(c.validate(), Error);
    c = testutil::tiny_config();
    c.target_side = 8;
    EXPECT_THROW(c.validate(), Error);
}
