#pragma once

// Dataset ingestion: `root/real/*` and `root/fake/*` image directories,
// decoding, optional resize/crop, and deterministic train/val splits.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "random.hpp"

namespace apixelhop {

enum class Label : int { Real = 0, Fake = 1 };
enum class SplitTag { Train, Val, Test };

constexpr std::string_view to_string(Label l) { return l == Label::Real ? "real" : "fake"; }
constexpr std::string_view to_string(SplitTag t) {
    switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
    }
    return "test";
}

struct LabeledItem {
    std::filesystem::path path;
    Label label;

    bool operator==(const LabeledItem&) const = default;
};

struct LabeledSet {
    std::vector<LabeledItem> items;
    SplitTag tag = SplitTag::Train;

    std::size_t count(Label l) const {
        return static_cast<std::size_t>(
            std::count_if(items.begin(), items.end(), [l](const LabeledItem& it) { return it.label == l; }));
    }
    std::size_t size() const { return items.size(); }
};

struct SplitConfig {
    double val_fraction = 0.2;
    std::uint64_t seed = 7;
};

/// Pre-processing applied at load time. Both are off by default.
struct ImageOptions {
    std::optional<int> target_side; ///< downscale so the short side equals this
    std::optional<int> crop_side;   ///< then center-crop to at most crop_side x crop_side
};

inline RgbImage preprocess(RgbImage img, const ImageOptions& opts) {
    if (opts.target_side) img = downscale_to_short_side(img, *opts.target_side);
    if (opts.crop_side) img = center_crop(img, *opts.crop_side, *opts.crop_side);
    if (img.width < kBlockSide || img.height < kBlockSide)
        fail(Errc::TooSmall, std::to_string(img.width) + "x" + std::to_string(img.height) + " is below one block");
    return img;
}

inline RgbImage load_image(const std::filesystem::path& path, const ImageOptions& opts = {}) {
    const auto bytes = read_file(path);
    RgbImage img;
    try {
        img = decode_image(bytes);
    } catch (const Error& e) {
        fail(Errc::DecodeError, path.string() + ": " + e.what());
    }
    return preprocess(std::move(img), opts);
}

inline bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Image files directly inside `dir`, sorted by path.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) fail(Errc::IoError, "not a directory: " + dir.string());
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Every image under both directories, real first, tagged `tag`.
inline LabeledSet labeled_dirs(const std::filesystem::path& real_dir, const std::filesystem::path& fake_dir,
                               SplitTag tag = SplitTag::Test) {
    LabeledSet set{{}, tag};
    for (auto [dir, label] : {std::pair{real_dir, Label::Real}, std::pair{fake_dir, Label::Fake}}) {
        const auto paths = list_images(dir);
        if (paths.empty()) fail(Errc::EmptyClass, "no images in " + dir.string());
        for (const auto& p : paths) set.items.push_back({p, label});
    }
    return set;
}

/// Per class: sorted paths, seeded Fisher-Yates, first round(f * n) go to val.
/// Items of each output keep sorted-path order within a class, real first.
inline std::pair<LabeledSet, LabeledSet> split_items(const std::vector<std::filesystem::path>& real,
                                                     const std::vector<std::filesystem::path>& fake,
                                                     const SplitConfig& cfg) {
    require(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0, Errc::InvalidArgument,
            "val_fraction must lie in (0, 1)");
    LabeledSet train{{}, SplitTag::Train};
    LabeledSet val{{}, SplitTag::Val};
    Rng rng(cfg.seed);
    for (auto [paths_in, label] : {std::pair{&real, Label::Real}, std::pair{&fake, Label::Fake}}) {
        std::vector<std::filesystem::path> paths = *paths_in;
        std::sort(paths.begin(), paths.end());
        if (std::adjacent_find(paths.begin(), paths.end()) != paths.end())
            fail(Errc::InvalidArgument, "duplicate paths in corpus");
        const auto n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(paths.size())));
        const auto perm = permutation(paths.size(), rng);
        std::vector<bool> in_val(paths.size(), false);
        for (std::size_t i = 0; i < n_val; ++i) in_val[perm[i]] = true;
        for (std::size_t i = 0; i < paths.size(); ++i)
            (in_val[i] ? val : train).items.push_back({paths[i], label});
    }
    return {std::move(train), std::move(val)};
}

inline std::pair<LabeledSet, LabeledSet> scan_corpus(const std::filesystem::path& real_dir,
                                                     const std::filesystem::path& fake_dir,
                                                     const SplitConfig& cfg) {
    const auto real = list_images(real_dir);
    if (real.empty()) fail(Errc::EmptyClass, "no images in " + real_dir.string());
    const auto fake = list_images(fake_dir);
    if (fake.empty()) fail(Errc::EmptyClass, "no images in " + fake_dir.string());
    return split_items(real, fake, cfg);
}

/// CSV manifest: `path,label,split` with label 0 = real, 1 = fake.
inline void write_manifest(std::ostream& out, std::initializer_list<const LabeledSet*> sets) {
    out << "path,label,split\n";
    for (const LabeledSet* set : sets) {
        for (const auto& it : set->items)
            out << it.path.string() << ',' << static_cast<int>(it.label) << ',' << to_string(set->tag) << '\n';
    }
}

} // namespace apixelhop
