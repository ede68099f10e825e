#pragma once

// 16x16 block partition and attentive (edge/texture) block selection.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace apixelhop {

inline constexpr int kBlockValues = kBlockSide * kBlockSide * 3;

/// A 16x16x3 tile. (x0, y0) is its top-left corner in the center-cropped
/// frame, so both are multiples of 16; see crop_origin() for the offset.
struct Block {
    int x0 = 0;
    int y0 = 0;
    std::array<float, kBlockValues> data{};

    float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * kBlockSide + x) * 3 + c]; }
    float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * kBlockSide + x) * 3 + c]; }
};

struct AttentionConfig {
    int blocks_per_image = 64;
    int subblock_side = 4;
    double partial_fraction = 0.5;

    void validate() const {
        require(blocks_per_image >= 1, Errc::InvalidArgument, "blocks_per_image must be >= 1");
        require(subblock_side >= 1 && kBlockSide % subblock_side == 0, Errc::InvalidArgument,
                "subblock_side must divide 16");
        require(partial_fraction > 0.0 && partial_fraction <= 1.0, Errc::InvalidArgument,
                "partial_fraction must lie in (0, 1]");
    }
};

/// Offset of the largest centered sub-image whose sides are multiples of 16.
inline std::pair<int, int> crop_origin(const RgbImage& img) {
    return {(img.width % kBlockSide) / 2, (img.height % kBlockSide) / 2};
}

/// Non-overlapping blocks in raster order.
inline std::vector<Block> partition(const RgbImage& img) {
    require(img.width >= kBlockSide && img.height >= kBlockSide, Errc::TooSmall, "image smaller than one block");
    const auto [ox, oy] = crop_origin(img);
    const int nx = img.width / kBlockSide;
    const int ny = img.height / kBlockSide;
    std::vector<Block> blocks(static_cast<std::size_t>(nx) * ny);
    for (int by = 0; by < ny; ++by) {
        for (int bx = 0; bx < nx; ++bx) {
            Block& b = blocks[static_cast<std::size_t>(by) * nx + bx];
            b.x0 = bx * kBlockSide;
            b.y0 = by * kBlockSide;
            for (int y = 0; y < kBlockSide; ++y) {
                const auto* row = &img.data[img.index(ox + b.x0, oy + b.y0 + y, 0)];
                std::copy(row, row + kBlockSide * 3, b.data.begin() + static_cast<std::ptrdiff_t>(y) * kBlockSide * 3);
            }
        }
    }
    return blocks;
}

/// Partial sum of sub-block residual energies after per-channel DC removal.
/// Each sub-block contributes the mean squared residual over its pixels,
/// summed over channels; the top ceil(q * count) contributions are added.
inline double score_block(const Block& block, const AttentionConfig& cfg) {
    std::array<double, 3> mean{};
    for (int y = 0; y < kBlockSide; ++y)
        for (int x = 0; x < kBlockSide; ++x)
            for (int c = 0; c < 3; ++c) mean[c] += block.at(x, y, c);
    for (double& m : mean) m /= kBlockSide * kBlockSide;

    const int sub = cfg.subblock_side;
    const int per_side = kBlockSide / sub;
    std::vector<double> energies;
    energies.reserve(static_cast<std::size_t>(per_side) * per_side);
    for (int sy = 0; sy < per_side; ++sy) {
        for (int sx = 0; sx < per_side; ++sx) {
            double e = 0.0;
            for (int y = sy * sub; y < (sy + 1) * sub; ++y) {
                for (int x = sx * sub; x < (sx + 1) * sub; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        const double r = block.at(x, y, c) - mean[c];
                        e += r * r;
                    }
                }
            }
            energies.push_back(e / (sub * sub));
        }
    }
    const auto keep = static_cast<std::size_t>(
        std::ceil(cfg.partial_fraction * static_cast<double>(energies.size()) - 1e-12));
    std::sort(energies.begin(), energies.end(), std::greater<>());
    double score = 0.0;
    for (std::size_t i = 0; i < std::min(keep, energies.size()); ++i) score += energies[i];
    return score;
}

struct ScoredBlock {
    Block block;
    double score;
};

/// Top min(K, count) blocks by score, highest first; ties keep raster order.
inline std::vector<ScoredBlock> select_scored_blocks(const RgbImage& img, const AttentionConfig& cfg) {
    cfg.validate();
    auto blocks = partition(img);
    std::vector<ScoredBlock> scored;
    scored.reserve(blocks.size());
    for (auto& b : blocks) {
        const double s = score_block(b, cfg);
        scored.push_back({b, s});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const ScoredBlock& a, const ScoredBlock& b) { return a.score > b.score; });
    scored.resize(std::min<std::size_t>(scored.size(), static_cast<std::size_t>(cfg.blocks_per_image)));
    return scored;
}

inline std::vector<Block> select_blocks(const RgbImage& img, const AttentionConfig& cfg) {
    auto scored = select_scored_blocks(img, cfg);
    std::vector<Block> out;
    out.reserve(scored.size());
    for (auto& s : scored) out.push_back(s.block);
    return out;
}

/// Single-channel mask (255 = selected) at the image's full size.
inline std::vector<std::uint8_t> attention_mask(const RgbImage& img, const std::vector<Block>& selected) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(img.width) * img.height, 0);
    const auto [ox, oy] = crop_origin(img);
    for (const auto& b : selected)
        for (int y = 0; y < kBlockSide; ++y)
            for (int x = 0; x < kBlockSide; ++x)
                mask[static_cast<std::size_t>(oy + b.y0 + y) * img.width + ox + b.x0 + x] = 255;
    return mask;
}

} // namespace apixelhop
