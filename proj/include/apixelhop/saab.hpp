#pragma once

// Single-stage Saab filter banks ("PixelHop units").
//
// A unit of spatial side s over c = 3 colour channels holds d = s*s*3
// orthonormal kernels: kernel 0 is the DC kernel (1/sqrt(d)) * ones, kernels
// 1..d-1 are the principal directions of DC-removed patches. Applied at
// stride 1 over a 16x16 block, each kernel yields a (17-s)^2 response map.
// The Saab bias term is not stored: a constant shift per channel cannot
// change any tree split partition downstream.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blocks.hpp"
#include "error.hpp"
#include "jacobi.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace apixelhop {

inline constexpr std::array<int, 3> kUnitSides{2, 3, 4};

struct FilterShape {
    static constexpr int kColorChannels = 3;
    int side = 2;

    static FilterShape of(int s) {
        require(s >= 2 && s <= 4, Errc::InvalidArgument, "filter side must be 2, 3 or 4, got " + std::to_string(s));
        return FilterShape{s};
    }
    constexpr int dim() const { return side * side * kColorChannels; }
    constexpr int grid_side() const { return kBlockSide + 1 - side; }
    constexpr int grid_size() const { return grid_side() * grid_side(); }

    bool operator==(const FilterShape&) const = default;
};

/// Row-major list of flattened patches.
struct PatchMatrix {
    std::size_t dim = 0;
    std::vector<double> data;

    explicit PatchMatrix(std::size_t d = 0) : dim(d) {}
    std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

/// Flattening order: patch row, then patch column, then colour channel last.
inline void copy_patch(const Block& block, FilterShape shape, int gx, int gy, double* out) {
    const int s = shape.side;
    for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx)
            for (int c = 0; c < 3; ++c) *out++ = block.at(gx + dx, gy + dy, c);
}

/// All stride-1 patches of a block in raster order: (17-s)^2 rows of length d.
inline PatchMatrix extract_patches(const Block& block, FilterShape shape) {
    PatchMatrix m(static_cast<std::size_t>(shape.dim()));
    m.data.resize(static_cast<std::size_t>(shape.grid_size()) * shape.dim());
    double* out = m.data.data();
    for (int gy = 0; gy < shape.grid_side(); ++gy) {
        for (int gx = 0; gx < shape.grid_side(); ++gx) {
            copy_patch(block, shape, gx, gy, out);
            out += shape.dim();
        }
    }
    return m;
}

struct SaabUnit {
    FilterShape shape;
    std::vector<int> channels;       ///< kernel indices held, ascending
    std::vector<double> kernels;     ///< channels.size() x dim, row-major
    std::vector<double> eigenvalues; ///< dim-1 AC eigenvalues, descending
    bool degenerate = false;         ///< AC kernels are an arbitrary basis (no residual energy)

    std::size_t dim() const { return static_cast<std::size_t>(shape.dim()); }
    bool complete() const { return channels.size() == dim(); }

    std::optional<std::size_t> slot_of(int k) const {
        const auto it = std::lower_bound(channels.begin(), channels.end(), k);
        if (it == channels.end() || *it != k) return std::nullopt;
        return static_cast<std::size_t>(it - channels.begin());
    }

    std::span<const double> kernel_row(std::size_t slot) const { return {kernels.data() + slot * dim(), dim()}; }

    std::span<const double> kernel(int k) const {
        const auto slot = slot_of(k);
        if (!slot)
            fail(Errc::IndexOutOfRange, "channel " + std::to_string(k) + " not held by " + std::to_string(shape.side) +
                                            "x" + std::to_string(shape.side) + "x3 unit");
        return kernel_row(*slot);
    }

    /// Copy holding only the kernels in `keep`.
    SaabUnit restricted(std::vector<int> keep) const {
        std::sort(keep.begin(), keep.end());
        keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
        SaabUnit out{shape, {}, {}, eigenvalues, degenerate};
        for (int k : keep) {
            const auto row = kernel(k);
            out.channels.push_back(k);
            out.kernels.insert(out.kernels.end(), row.begin(), row.end());
        }
        return out;
    }
};

/// max |K K^T - I| over the held kernel rows.
inline double gram_deviation(const SaabUnit& unit) {
    const std::size_t m = unit.channels.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const auto a = unit.kernel_row(i);
            const auto b = unit.kernel_row(j);
            double dot = 0.0;
            for (std::size_t t = 0; t < a.size(); ++t) dot += a[t] * b[t];
            worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    }
    return worst;
}

namespace saab_detail {

inline constexpr std::size_t kChunkRows = 4096;

// Column j (j = 0..d-2) of an orthonormal basis of the complement of ones:
// (1, ..., 1, -(j+1), 0, ..., 0) / sqrt((j+1)(j+2)).
inline std::vector<double> helmert_basis(std::size_t d) {
    std::vector<double> q(d * (d - 1), 0.0); // row-major d x (d-1)
    for (std::size_t j = 0; j + 1 < d; ++j) {
        const double m = static_cast<double>(j + 1);
        const double norm = 1.0 / std::sqrt(m * (m + 1.0));
        for (std::size_t i = 0; i <= j; ++i) q[i * (d - 1) + j] = norm;
        q[(j + 1) * (d - 1) + j] = -m * norm;
    }
    return q;
}

inline void fix_sign(std::span<double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    if (v[best] < 0)
        for (double& x : v) x = -x;
}

} // namespace saab_detail

/// Second-moment matrix of DC-removed patches, (1/N) sum r r^T, row-major d x d.
/// Partial sums over fixed-size row chunks are combined in chunk order, so
/// the result does not depend on the thread count.
inline std::vector<double> residual_second_moment(const PatchMatrix& patches, unsigned threads = 1) {
    const std::size_t d = patches.dim;
    const std::size_t n = patches.rows();
    const std::size_t chunks = (n + saab_detail::kChunkRows - 1) / saab_detail::kChunkRows;
    std::vector<std::vector<double>> partial(chunks);
    parallel_for(chunks, threads, [&](std::size_t ci) {
        std::vector<double> acc(d * d, 0.0);
        std::vector<double> r(d);
        const std::size_t end = std::min(n, (ci + 1) * saab_detail::kChunkRows);
        for (std::size_t i = ci * saab_detail::kChunkRows; i < end; ++i) {
            const auto x = patches.row(i);
            double mean = 0.0;
            for (double v : x) mean += v;
            mean /= static_cast<double>(d);
            for (std::size_t t = 0; t < d; ++t) r[t] = x[t] - mean;
            for (std::size_t a = 0; a < d; ++a) {
                const double ra = r[a];
                double* row = acc.data() + a * d;
                for (std::size_t b = a; b < d; ++b) row[b] += ra * r[b];
            }
        }
        partial[ci] = std::move(acc);
    });
    std::vector<double> c(d * d, 0.0);
    for (const auto& p : partial)
        for (std::size_t t = 0; t < d * d; ++t) c[t] += p[t];
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            c[a * d + b] /= static_cast<double>(n);
            c[b * d + a] = c[a * d + b];
        }
    }
    return c;
}

/// Learns a complete unit from at least 10*d patches.
inline SaabUnit learn_unit(const PatchMatrix& patches, FilterShape shape, unsigned threads = 1) {
    const std::size_t d = static_cast<std::size_t>(shape.dim());
    require(patches.dim == d, Errc::DimensionMismatch, "patch length does not match filter shape");
    require(patches.rows() >= 10 * d, Errc::InsufficientPatches,
            "need at least " + std::to_string(10 * d) + " patches, got " + std::to_string(patches.rows()));

    const auto cov = residual_second_moment(patches, threads);
    const auto q = saab_detail::helmert_basis(d);
    const std::size_t m = d - 1;

    // Restrict to the complement of ones: reduced = Q^T C Q.
    std::vector<double> cq(d * m, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) acc += cov[i * d + t] * q[t * m + j];
            cq[i * m + j] = acc;
        }
    std::vector<double> reduced(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) acc += q[t * m + i] * cq[t * m + j];
            reduced[i * m + j] = acc;
        }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double avg = 0.5 * (reduced[i * m + j] + reduced[j * m + i]);
            reduced[i * m + j] = reduced[j * m + i] = avg;
        }

    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
    double energy = 0.0;
    for (double v : patches.data) energy += v * v;
    energy /= static_cast<double>(patches.rows());

    SaabUnit unit;
    unit.shape = shape;
    unit.channels.resize(d);
    for (std::size_t k = 0; k < d; ++k) unit.channels[k] = static_cast<int>(k);
    unit.kernels.assign(d * d, 0.0);
    unit.eigenvalues.assign(m, 0.0);
    const double dc = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t t = 0; t < d; ++t) unit.kernels[t] = dc;

    unit.degenerate = !(trace > 1e-20 * energy);
    if (unit.degenerate) {
        for (std::size_t k = 1; k < d; ++k) {
            std::span<double> row(unit.kernels.data() + k * d, d);
            for (std::size_t t = 0; t < d; ++t) row[t] = q[t * m + (k - 1)];
            saab_detail::fix_sign(row);
        }
        return unit;
    }

    const auto eig = jacobi_eigen(reduced, m);
    for (std::size_t k = 1; k < d; ++k) {
        const auto w = eig.vector(k - 1);
        std::span<double> row(unit.kernels.data() + k * d, d);
        for (std::size_t t = 0; t < d; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += q[t * m + j] * w[j];
            row[t] = acc;
        }
        saab_detail::fix_sign(row);
        unit.eigenvalues[k - 1] = std::max(0.0, eig.values[k - 1]);
    }
    return unit;
}

/// Responses of a block: grid[(gy * side + gx) * channels + slot].
struct ResponseCube {
    FilterShape shape;
    std::vector<int> channels;
    std::vector<double> grid;

    std::size_t n_channels() const { return channels.size(); }
    double at(int gx, int gy, std::size_t slot) const {
        return grid[(static_cast<std::size_t>(gy) * shape.grid_side() + gx) * n_channels() + slot];
    }
};

inline ResponseCube transform(const Block& block, const SaabUnit& unit) {
    const std::size_t d = unit.dim();
    const std::size_t m = unit.channels.size();
    ResponseCube cube{unit.shape, unit.channels, {}};
    cube.grid.resize(static_cast<std::size_t>(unit.shape.grid_size()) * m);
    std::vector<double> patch(d);
    std::size_t out = 0;
    for (int gy = 0; gy < unit.shape.grid_side(); ++gy) {
        for (int gx = 0; gx < unit.shape.grid_side(); ++gx) {
            copy_patch(block, unit.shape, gx, gy, patch.data());
            for (std::size_t slot = 0; slot < m; ++slot) {
                const auto k = unit.kernel_row(slot);
                double acc = 0.0;
                for (std::size_t t = 0; t < d; ++t) acc += k[t] * patch[t];
                cube.grid[out++] = acc;
            }
        }
    }
    return cube;
}

/// Channel-k response plane in raster order, length (17-s)^2.
inline std::vector<double> channel_features(const ResponseCube& cube, int k) {
    const int d = cube.shape.dim();
    if (k < 0 || k >= d) fail(Errc::IndexOutOfRange, "channel " + std::to_string(k) + " outside [0, " + std::to_string(d) + ")");
    const auto it = std::lower_bound(cube.channels.begin(), cube.channels.end(), k);
    if (it == cube.channels.end() || *it != k) fail(Errc::IndexOutOfRange, "channel " + std::to_string(k) + " not in cube");
    const auto slot = static_cast<std::size_t>(it - cube.channels.begin());
    std::vector<double> out(static_cast<std::size_t>(cube.shape.grid_size()));
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = cube.grid[p * cube.n_channels() + slot];
    return out;
}

/// Same values as channel_features(transform(block, unit), k) for one kernel only.
inline void channel_response(const Block& block, const SaabUnit& unit, int k, std::span<double> out) {
    const auto kernel = unit.kernel(k);
    const int s = unit.shape.side;
    const int g = unit.shape.grid_side();
    require(out.size() == static_cast<std::size_t>(g * g), Errc::DimensionMismatch, "response buffer size");
    std::size_t p = 0;
    for (int gy = 0; gy < g; ++gy) {
        for (int gx = 0; gx < g; ++gx) {
            double acc = 0.0;
            std::size_t t = 0;
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx)
                    for (int c = 0; c < 3; ++c) acc += kernel[t++] * block.at(gx + dx, gy + dy, c);
            out[p++] = acc;
        }
    }
}

inline std::vector<double> channel_response(const Block& block, const SaabUnit& unit, int k) {
    std::vector<double> out(static_cast<std::size_t>(unit.shape.grid_size()));
    channel_response(block, unit, k, out);
    return out;
}

/// Up to `max_patches` patches taken round-robin across blocks: block order
/// and each block's patch-position order are seeded shuffles.
inline PatchMatrix sample_patches(std::span<const Block> blocks, FilterShape shape, std::size_t max_patches,
                                  std::uint64_t seed) {
    const std::size_t d = static_cast<std::size_t>(shape.dim());
    const std::size_t per_block = static_cast<std::size_t>(shape.grid_size());
    const std::size_t total = std::min(max_patches, blocks.size() * per_block);
    PatchMatrix m(d);
    m.data.resize(total * d);
    if (total == 0) return m;

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(shape.side)));
    const auto block_order = permutation(blocks.size(), rng);
    const std::size_t rounds = (total + blocks.size() - 1) / blocks.size();
    std::vector<std::vector<std::size_t>> positions(blocks.size());
    for (std::size_t b : block_order) {
        positions[b] = permutation(per_block, rng);
        positions[b].resize(rounds);
    }

    const int g = shape.grid_side();
    std::size_t row = 0;
    for (std::size_t r = 0; r < rounds && row < total; ++r) {
        for (std::size_t b : block_order) {
            if (row == total) break;
            const auto pos = static_cast<int>(positions[b][r]);
            copy_patch(blocks[b], shape, pos % g, pos / g, m.data.data() + row * d);
            ++row;
        }
    }
    return m;
}

} // namespace apixelhop
