#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace apixelhop;
namespace fs = std::filesystem;

namespace {

// Mean over blocks of the per-channel residual variance, from scratch.
double mean_block_variance(const RgbImage& img) {
    double total = 0.0;
    int n = 0;
    for (int by = 0; by + 16 <= img.height; by += 16)
        for (int bx = 0; bx + 16 <= img.width; bx += 16)
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                double ss = 0.0;
                for (int y = 0; y < 16; ++y)
                    for (int x = 0; x < 16; ++x) {
                        const double v = img.at(bx + x, by + y, c);
                        s += v;
                        ss += v * v;
                    }
                total += ss / 256.0 - (s / 256.0) * (s / 256.0);
                ++n;
            }
    return total / n;
}

// Row-averaged horizontal DFT power of the green channel at frequency bin k,
// after removing each row's mean.
double row_power(const RgbImage& img, int k) {
    const int n = img.width;
    double total = 0.0;
    for (int y = 0; y < img.height; ++y) {
        double mean = 0.0;
        for (int x = 0; x < n; ++x) mean += img.at(x, y, 1);
        mean /= n;
        double re = 0.0;
        double im = 0.0;
        for (int x = 0; x < n; ++x) {
            const double a = 2.0 * std::numbers::pi * k * x / n;
            const double v = img.at(x, y, 1) - mean;
            re += v * std::cos(a);
            im -= v * std::sin(a);
        }
        total += re * re + im * im;
    }
    return total / img.height;
}

} // namespace

TEST(Synthgen, Deterministic) {
    const SynthConfig cfg{10, 64, 1, 4};
    EXPECT_EQ(gen_real(cfg, 0), gen_real(cfg, 0));
    EXPECT_EQ(gen_fake(cfg, 3), gen_fake(cfg, 3));
    EXPECT_NE(gen_real(cfg, 0), gen_real(cfg, 1));
    SynthConfig other = cfg;
    other.seed = 2;
    EXPECT_NE(gen_real(cfg, 0), gen_real(other, 0));
}

TEST(Synthgen, DimensionsAndRange) {
    const SynthConfig cfg{4, 256, 7, 4};
    const auto real = gen_real(cfg, 0);
    const auto fake = gen_fake(cfg, 0);
    EXPECT_EQ(real.width, 256);
    EXPECT_EQ(fake.width, 256);
    EXPECT_EQ(fake.height, 256);
    EXPECT_EQ(partition(real).size(), 256u);
    for (float v : fake.data) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
}

TEST(Synthgen, FactorOneIsPairedReal) {
    SynthConfig cfg{4, 64, 7, 1};
    SynthConfig paired = cfg;
    paired.seed = cfg.seed ^ synth_detail::kFakeSeedMask;
    EXPECT_EQ(gen_fake(cfg, 2), gen_real(paired, 2));
}

TEST(Synthgen, RealsCarryMoreBlockVariance) {
    const SynthConfig cfg{100, 128, 7, 4};
    double real = 0.0;
    double fake = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        real += mean_block_variance(gen_real(cfg, i));
        fake += mean_block_variance(gen_fake(cfg, i));
    }
    EXPECT_GT(real / 100, fake / 100);
}

TEST(Synthgen, SpectralPeakAtUpsamplingFrequency) {
    // A factor-4 resampler leaves periodic energy at side/4; the surrounding
    // bins of the already-smoothed fake hold almost none.
    const SynthConfig cfg{4, 128, 7, 4};
    const int k = cfg.side / cfg.upsample_factor;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto fake = gen_fake(cfg, i);
        const double peak = row_power(fake, k);
        const double around = 0.5 * (row_power(fake, k - 3) + row_power(fake, k + 3));
        EXPECT_GT(peak, 5.0 * around) << "fake " << i;

        const auto real = gen_real(cfg, i);
        const double rpeak = row_power(real, k);
        const double raround = 0.5 * (row_power(real, k - 3) + row_power(real, k + 3));
        EXPECT_LT(rpeak, 2.0 * raround) << "real " << i;
    }
}

TEST(Synthgen, ConfigValidation) {
    for (SynthConfig bad : {SynthConfig{1, 100, 7, 4}, SynthConfig{1, 8, 7, 4}, SynthConfig{1, 48, 7, 0},
                            SynthConfig{1, 48, 7, 5}}) {
        try {
            gen_real(bad, 0);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InvalidArgument);
        }
    }
}

TEST(Synthgen, FileNames) {
    EXPECT_EQ(synth_file_name(7, 200), "0007.png");
    EXPECT_EQ(synth_file_name(12345, 20000), "12345.png");
    EXPECT_EQ(synth_file_name(3, 100000), "00003.png");
}

TEST(Synthgen, WriteCorpusReproducible) {
    testutil::TempDir a;
    testutil::TempDir b;
    const SynthConfig cfg{5, 32, 7, 4};
    write_corpus(a.path(), cfg, 1);
    write_corpus(b.path(), cfg, 3);
    for (const char* sub : {"real", "fake"}) {
        const auto files = list_images(a / sub);
        ASSERT_EQ(files.size(), 5u);
        EXPECT_EQ(files.front().filename(), "0000.png");
        for (const auto& f : files)
            EXPECT_EQ(testutil::slurp(f), testutil::slurp(b / sub / f.filename().string())) << f;
    }
    const auto back = load_image(a / "real" / "0002.png");
    const auto direct = gen_real(cfg, 2);
    for (std::size_t i = 0; i < back.data.size(); ++i)
        EXPECT_EQ(back.data[i], static_cast<float>(to_byte(direct.data[i])) / 255.0f);
}
