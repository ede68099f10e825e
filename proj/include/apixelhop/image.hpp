#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"

namespace apixelhop {

inline constexpr int kBlockSide = 16;

/// Row-major H x W x 3 raster with values in [0, 1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * 3 + c;
    }
    float& at(int x, int y, int c) { return data[index(x, y, c)]; }
    float at(int x, int y, int c) const { return data[index(x, y, c)]; }

    bool operator==(const RgbImage&) const = default;
};

/// Interleaved 8-bit samples (1 or 3 channels) divided by 255.
inline RgbImage from_bytes(int width, int height, int channels, std::span<const std::uint8_t> bytes) {
    require(channels == 1 || channels == 3, Errc::InvalidArgument, "channels must be 1 or 3");
    require(bytes.size() == static_cast<std::size_t>(width) * height * channels, Errc::DimensionMismatch,
            "byte buffer size does not match dimensions");
    RgbImage img(width, height);
    const std::size_t n = static_cast<std::size_t>(width) * height;
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 0; c < 3; ++c) {
            const std::uint8_t v = channels == 1 ? bytes[p] : bytes[p * 3 + c];
            img.data[p * 3 + c] = static_cast<float>(v) / 255.0f;
        }
    }
    return img;
}

inline std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::vector<std::uint8_t> to_bytes(const RgbImage& img) {
    std::vector<std::uint8_t> out(img.data.size());
    std::transform(img.data.begin(), img.data.end(), out.begin(), to_byte);
    return out;
}

struct Size {
    int width;
    int height;
    bool operator==(const Size&) const = default;
};

/// Output size when the shorter side is scaled to `target_side`, aspect kept.
/// Returns the input size unchanged when the shorter side is already small enough.
inline Size scaled_size(int width, int height, int target_side) {
    const int short_side = std::min(width, height);
    if (target_side <= 0 || short_side <= target_side) return {width, height};
    const double scale = static_cast<double>(target_side) / short_side;
    if (width <= height)
        return {target_side, static_cast<int>(std::lround(height * scale))};
    return {static_cast<int>(std::lround(width * scale)), target_side};
}

/// Bilinear resampling with pixel-centre alignment.
inline RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
    require(width > 0 && height > 0, Errc::InvalidArgument, "resize target must be positive");
    RgbImage dst(width, height);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c);
                const double bottom = (1.0 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c);
                dst.at(x, y, c) = static_cast<float>((1.0 - wy) * top + wy * bottom);
            }
        }
    }
    return dst;
}

inline RgbImage downscale_to_short_side(const RgbImage& src, int target_side) {
    const Size size = scaled_size(src.width, src.height, target_side);
    if (size.width == src.width && size.height == src.height) return src;
    return resize_bilinear(src, size.width, size.height);
}

/// Centered crop to at most width x height.
inline RgbImage center_crop(const RgbImage& src, int width, int height) {
    width = std::min(width, src.width);
    height = std::min(height, src.height);
    const int ox = (src.width - width) / 2;
    const int oy = (src.height - height) / 2;
    RgbImage dst(width, height);
    for (int y = 0; y < height; ++y) {
        const auto* row = &src.data[src.index(ox, oy + y, 0)];
        std::copy(row, row + static_cast<std::ptrdiff_t>(width) * 3, &dst.data[dst.index(0, y, 0)]);
    }
    return dst;
}

} // namespace apixelhop
