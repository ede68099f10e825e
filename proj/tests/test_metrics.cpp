#include <gtest/gtest.h>

#include <cmath>

#include <apixelhop/metrics.hpp>
#include <apixelhop/random.hpp>

using namespace apixelhop;

namespace {

// P(s+ > s-) + 1/2 P(s+ == s-) over every positive/negative pair.
double brute_auc(const ScoredSet& set) {
    double wins = 0.0;
    double pairs = 0.0;
    for (const auto& p : set) {
        if (p.label != 1) continue;
        for (const auto& n : set) {
            if (n.label != 0) continue;
            pairs += 1.0;
            if (p.score > n.score) wins += 1.0;
            else if (p.score == n.score) wins += 0.5;
        }
    }
    return wins / pairs;
}

ScoredSet random_set(Rng& rng, std::size_t n, int levels) {
    ScoredSet s(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Coarse levels force ties.
        s[i].score = levels > 0 ? static_cast<double>(uniform_index(rng, static_cast<std::uint64_t>(levels))) / levels
                                : uniform01(rng);
        s[i].label = static_cast<int>(uniform_index(rng, 2));
    }
    s[0].label = 1;
    s[1].label = 0;
    return s;
}

} // namespace

TEST(Auc, PerfectSeparation) {
    EXPECT_DOUBLE_EQ(auc({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}}), 1.0);
}

TEST(Auc, AllTiedIsHalf) {
    EXPECT_DOUBLE_EQ(auc({{0.3, 1}, {0.3, 0}, {0.3, 1}, {0.3, 0}}), 0.5);
}

TEST(Auc, ThreeOfFourPairsOrdered) {
    const ScoredSet s{{0.9, 1}, {0.4, 0}, {0.35, 1}, {0.1, 0}};
    EXPECT_DOUBLE_EQ(brute_auc(s), 0.75);
    EXPECT_DOUBLE_EQ(auc(s), 0.75);
}

TEST(Auc, MatchesBruteForceOracle) {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + uniform_index(rng, 999);
        const auto s = random_set(rng, n, t % 2 == 0 ? 0 : 7);
        EXPECT_EQ(auc(s), brute_auc(s)) << "case " << t;
    }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        auto s = random_set(rng, 200, t % 2 ? 10 : 0);
        const double before = auc(s);
        for (auto& p : s) p.score = std::exp(3.0 * p.score) - 7.0;
        EXPECT_EQ(auc(s), before);
    }
}

TEST(Auc, Errors) {
    try {
        auc({{0.1, 1}, {0.2, 1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SingleClass);
    }
    try {
        auc({{NAN, 1}, {0.2, 0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonFinite);
    }
}

TEST(AveragePrecision, HandCases) {
    EXPECT_DOUBLE_EQ(average_precision({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}}), 1.0);
    EXPECT_DOUBLE_EQ(average_precision({{0.9, 1}, {0.8, 0}, {0.7, 1}, {0.6, 0}}), (1.0 + 2.0 / 3.0) / 2.0);
    EXPECT_DOUBLE_EQ(average_precision({{0.9, 0}, {0.8, 0}, {0.7, 0}, {0.1, 1}}), 0.25);
}

TEST(AveragePrecision, OneIffPositivesOutrankNegatives) {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const auto s = random_set(rng, 12, 0);
        double min_pos = 2.0;
        double max_neg = -1.0;
        for (const auto& p : s) (p.label == 1 ? min_pos : max_neg) = p.label == 1 ? std::min(min_pos, p.score)
                                                                                      : std::max(max_neg, p.score);
        EXPECT_EQ(average_precision(s) == 1.0, min_pos > max_neg);
    }
}

TEST(AveragePrecision, NoPositives) {
    try {
        average_precision({{0.5, 0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NoPositives);
    }
}

TEST(Accuracy, Cases) {
    EXPECT_DOUBLE_EQ(accuracy({{0.9, 1}, {0.1, 0}}), 1.0);
    EXPECT_DOUBLE_EQ(accuracy({{0.1, 1}, {0.9, 0}}), 0.0);
    EXPECT_DOUBLE_EQ(accuracy({{0.6, 1}, {0.4, 1}, {0.3, 0}}, 0.5), 2.0 / 3.0);
}

TEST(MeanAp, Cases) {
    const ScoredSet perfect{{0.9, 1}, {0.1, 0}};
    const ScoredSet half{{0.9, 0}, {0.1, 1}};
    EXPECT_DOUBLE_EQ(average_precision(half), 0.5);
    EXPECT_DOUBLE_EQ(mean_ap({{"a", perfect}}), 1.0);
    EXPECT_DOUBLE_EQ(mean_ap({{"a", perfect}, {"b", half}}), 0.75);
}
