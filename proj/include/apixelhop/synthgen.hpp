#pragma once

// Procedural desk-scale corpus. "Real" images are smooth gradients plus
// midscale value noise plus per-pixel grain; "fake" images are reals pushed
// through a box-downsample / zero-insertion-upsample chain whose
// interpolation kernel does not tile evenly, which leaves a periodic
// (checkerboard-like) ripple and removes the grain.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace apixelhop {

struct SynthConfig {
    std::size_t n_per_class = 100;
    int side = 256;
    std::uint64_t seed = 7;
    int upsample_factor = 4;

    void validate() const {
        require(side >= kBlockSide && side % kBlockSide == 0, Errc::InvalidArgument, "side must be a multiple of 16");
        require(upsample_factor >= 1, Errc::InvalidArgument, "upsample_factor must be >= 1");
        require(side % upsample_factor == 0, Errc::InvalidArgument, "side must be divisible by upsample_factor");
    }
};

namespace synth_detail {

inline constexpr std::uint64_t kFakeSeedMask = 0xA5A5F00DC0FFEE11ULL;
inline constexpr double kGrainSigma = 0.05;
inline constexpr int kValueNoiseCell = 16;
inline constexpr double kEdgeTapWeight = 0.55;

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice of random values, interpolated with a smoothstep blend.
inline std::vector<double> value_noise(int side, int cell, double amplitude, Rng& rng) {
    const int n = side / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(n) * n);
    for (auto& v : lattice) v = uniform(rng, -amplitude, amplitude);
    std::vector<double> out(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y) {
        const int gy = y / cell;
        const double ty = smoothstep(static_cast<double>(y % cell) / cell);
        for (int x = 0; x < side; ++x) {
            const int gx = x / cell;
            const double tx = smoothstep(static_cast<double>(x % cell) / cell);
            const double a = lattice[static_cast<std::size_t>(gy) * n + gx];
            const double b = lattice[static_cast<std::size_t>(gy) * n + gx + 1];
            const double c = lattice[static_cast<std::size_t>(gy + 1) * n + gx];
            const double d = lattice[static_cast<std::size_t>(gy + 1) * n + gx + 1];
            out[static_cast<std::size_t>(y) * side + x] =
                (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
        }
    }
    return out;
}

inline int floor_div(int a, int b) { return (a >= 0) ? a / b : -((-a + b - 1) / b); }

// Interpolation taps for offsets -floor(f/2) .. f - floor(f/2). The two end
// taps land on lattice points together for one output phase, so that phase
// gets extra gain: the periodic artifact.
inline std::vector<double> upsample_kernel(int factor) {
    std::vector<double> taps(static_cast<std::size_t>(factor) + 1, 1.0);
    taps.front() = kEdgeTapWeight;
    taps.back() = kEdgeTapWeight;
    double sum = 0.0;
    for (double t : taps) sum += t;
    for (double& t : taps) t *= factor / sum;
    return taps;
}

// Separable zero-insertion upsample of one low-res plane (edge samples replicated).
inline std::vector<double> upsample_plane(const std::vector<double>& low, int low_side, int factor) {
    const int side = low_side * factor;
    const auto taps = upsample_kernel(factor);
    const int origin = factor / 2;
    auto low_at = [&](int i) { return std::clamp(i, 0, low_side - 1); };

    std::vector<double> rows(static_cast<std::size_t>(low_side) * side, 0.0);
    for (int ly = 0; ly < low_side; ++ly) {
        for (int x = 0; x < side; ++x) {
            double acc = 0.0;
            for (std::size_t j = 0; j < taps.size(); ++j) {
                const int src = x - (static_cast<int>(j) - origin);
                if (((src % factor) + factor) % factor != 0) continue;
                acc += taps[j] * low[static_cast<std::size_t>(ly) * low_side + low_at(floor_div(src, factor))];
            }
            rows[static_cast<std::size_t>(ly) * side + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(side) * side, 0.0);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double acc = 0.0;
            for (std::size_t j = 0; j < taps.size(); ++j) {
                const int src = y - (static_cast<int>(j) - origin);
                if (((src % factor) + factor) % factor != 0) continue;
                acc += taps[j] * rows[static_cast<std::size_t>(low_at(floor_div(src, factor))) * side + x];
            }
            out[static_cast<std::size_t>(y) * side + x] = acc;
        }
    }
    return out;
}

} // namespace synth_detail

/// Deterministic in (seed, index, side).
inline RgbImage gen_real(const SynthConfig& cfg, std::size_t index) {
    using namespace synth_detail;
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, index));
    const int side = cfg.side;
    RgbImage img(side, side);

    // Luminance-like value noise shared by all channels plus a weaker per-channel one.
    const auto shared = value_noise(side, kValueNoiseCell, 0.10, rng);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> plane(static_cast<std::size_t>(side) * side, uniform(rng, 0.35, 0.65));
        const int n_waves = 3 + static_cast<int>(uniform_index(rng, 4));
        for (int w = 0; w < n_waves; ++w) {
            const double theta = uniform(rng, 0.0, std::numbers::pi);
            const double cycles = uniform(rng, 0.5, 3.0);
            const double amp = uniform(rng, 0.03, 0.10);
            const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            const double kx = 2.0 * std::numbers::pi * cycles * std::cos(theta) / side;
            const double ky = 2.0 * std::numbers::pi * cycles * std::sin(theta) / side;
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    plane[static_cast<std::size_t>(y) * side + x] += amp * std::cos(kx * x + ky * y + phase);
        }
        const auto own = value_noise(side, kValueNoiseCell, 0.04, rng);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * side + x;
                const double v = plane[p] + shared[p] + own[p] + kGrainSigma * standard_normal(rng);
                img.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return img;
}

/// Upsampling-artifact counterpart. upsample_factor == 1 returns the source real unchanged.
inline RgbImage gen_fake(const SynthConfig& cfg, std::size_t index) {
    using namespace synth_detail;
    SynthConfig src_cfg = cfg;
    src_cfg.seed = cfg.seed ^ kFakeSeedMask;
    RgbImage src = gen_real(src_cfg, index);
    const int f = cfg.upsample_factor;
    if (f == 1) return src;

    const int side = cfg.side;
    const int low_side = side / f;
    RgbImage out(side, side);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> low(static_cast<std::size_t>(low_side) * low_side, 0.0);
        for (int ly = 0; ly < low_side; ++ly) {
            for (int lx = 0; lx < low_side; ++lx) {
                double acc = 0.0;
                for (int dy = 0; dy < f; ++dy)
                    for (int dx = 0; dx < f; ++dx) acc += src.at(lx * f + dx, ly * f + dy, c);
                low[static_cast<std::size_t>(ly) * low_side + lx] = acc / (f * f);
            }
        }
        const auto up = upsample_plane(low, low_side, f);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                out.at(x, y, c) = static_cast<float>(std::clamp(up[static_cast<std::size_t>(y) * side + x], 0.0, 1.0));
    }
    return out;
}

inline std::string synth_file_name(std::size_t index, std::size_t total) {
    const std::size_t width = std::max<std::size_t>(4, std::to_string(total > 0 ? total - 1 : 0).size());
    std::string digits = std::to_string(index);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return digits + ".png";
}

/// Writes `out/real/NNNN.png` and `out/fake/NNNN.png`.
inline void write_corpus(const std::filesystem::path& out, const SynthConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    std::error_code ec;
    for (const char* sub : {"real", "fake"}) {
        std::filesystem::create_directories(out / sub, ec);
        if (ec) fail(Errc::IoError, "cannot create " + (out / sub).string() + ": " + ec.message());
    }
    parallel_for(cfg.n_per_class * 2, threads, [&](std::size_t job) {
        const std::size_t i = job / 2;
        const bool fake = job % 2 == 1;
        const auto name = synth_file_name(i, cfg.n_per_class);
        write_png(out / (fake ? "fake" : "real") / name, fake ? gen_fake(cfg, i) : gen_real(cfg, i));
    });
}

} // namespace apixelhop
