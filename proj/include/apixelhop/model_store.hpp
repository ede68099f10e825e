#pragma once

// DetectorModel persistence (versioned JSON with a SHA-256 body digest) and
// parameter accounting.

#include <openssl/evp.h>

#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detector.hpp"
#include "error.hpp"

namespace apixelhop {

inline constexpr const char* kModelMagic = "A-PIXELHOP";
inline constexpr int kModelVersion = 1;
inline constexpr double kOrthonormalTolerance = 1e-6;

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        fail(Errc::IoError, "SHA-256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
    return hex.str();
}

inline std::string iso8601_utc(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace store_detail {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

[[noreturn]] inline void bad(const std::string& what) { fail(Errc::FormatError, "model file: " + what); }

inline ojson boost_to_json(const BoostConfig& c) {
    return {{"n_trees", c.n_trees},   {"max_depth", c.max_depth},
            {"learning_rate", c.learning_rate}, {"lambda", c.lambda},
            {"min_child_weight", c.min_child_weight}, {"gamma", c.gamma}};
}

inline BoostConfig boost_from_json(const json& j) {
    return {j.at("n_trees").get<int>(),         j.at("max_depth").get<int>(), j.at("learning_rate").get<double>(),
            j.at("lambda").get<double>(),       j.at("min_child_weight").get<double>(),
            j.at("gamma").get<double>()};
}

inline ojson config_to_json(const DetectorConfig& c) {
    ojson j;
    j["attention"] = {{"blocks_per_image", c.attention.blocks_per_image},
                      {"subblock_side", c.attention.subblock_side},
                      {"partial_fraction", c.attention.partial_fraction}};
    j["boost"] = boost_to_json(c.boost);
    j["ensemble"] = {{"p", c.ensemble.p}, {"tail", c.ensemble.tail}, {"meta", boost_to_json(c.ensemble.meta)}};
    j["n_sel_per_unit"] = c.n_sel_per_unit;
    j["val_fraction"] = c.val_fraction;
    j["target_side"] = c.target_side ? ojson(*c.target_side) : ojson(nullptr);
    j["max_patches"] = c.max_patches;
    j["seed"] = c.seed;
    j["unit_storage"] = c.store_full_units ? "full" : "selected";
    return j;
}

inline DetectorConfig config_from_json(const json& j) {
    DetectorConfig c;
    const json& a = j.at("attention");
    c.attention = {a.at("blocks_per_image").get<int>(), a.at("subblock_side").get<int>(),
                   a.at("partial_fraction").get<double>()};
    c.boost = boost_from_json(j.at("boost"));
    const json& e = j.at("ensemble");
    c.ensemble = {e.at("p").get<double>(), e.at("tail").get<int>(), boost_from_json(e.at("meta"))};
    c.n_sel_per_unit = j.at("n_sel_per_unit").get<int>();
    c.val_fraction = j.at("val_fraction").get<double>();
    if (!j.at("target_side").is_null()) c.target_side = j.at("target_side").get<int>();
    c.max_patches = j.at("max_patches").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto storage = j.at("unit_storage").get<std::string>();
    if (storage != "full" && storage != "selected") bad("unit_storage must be \"full\" or \"selected\"");
    c.store_full_units = storage == "full";
    return c;
}

inline ojson gbdt_to_json(const GbdtModel& m) {
    ojson trees = ojson::array();
    for (const auto& t : m.trees) {
        ojson nodes = ojson::array();
        for (const auto& n : t.nodes) {
            if (n.is_leaf())
                nodes.push_back({{"v", n.value}});
            else
                nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    return {{"n_features", m.n_features},
            {"learning_rate", m.learning_rate},
            {"base_score", m.base_score},
            {"train_logloss", m.train_logloss},
            {"trees", std::move(trees)}};
}

/// Checks that nodes form one binary tree laid out in preorder.
inline void check_preorder(const Tree& t, int n_features) {
    if (t.nodes.empty()) bad("empty tree");
    std::size_t next = 0;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        if (i != next) bad("tree nodes are not in preorder");
        ++next;
        const TreeNode& n = t.nodes[i];
        if (n.is_leaf()) {
            if (!std::isfinite(n.value)) bad("non-finite leaf value");
            continue;
        }
        if (n.feature >= n_features) bad("split feature out of range");
        if (!std::isfinite(n.threshold)) bad("non-finite threshold");
        const auto l = static_cast<std::size_t>(n.left);
        const auto r = static_cast<std::size_t>(n.right);
        if (n.left < 0 || n.right < 0 || l != i + 1 || r <= l || r >= t.nodes.size()) bad("bad child index");
        stack.push_back(r);
        stack.push_back(l);
    }
    if (next != t.nodes.size()) bad("unreachable tree nodes");
}

inline GbdtModel gbdt_from_json(const json& j) {
    GbdtModel m;
    m.n_features = j.at("n_features").get<int>();
    if (m.n_features < 1) bad("n_features must be >= 1");
    m.learning_rate = j.at("learning_rate").get<double>();
    m.base_score = j.at("base_score").get<double>();
    m.train_logloss = j.at("train_logloss").get<std::vector<double>>();
    for (const json& jt : j.at("trees")) {
        Tree t;
        for (const json& jn : jt.at("nodes")) {
            TreeNode n;
            if (jn.contains("v")) {
                n.value = jn.at("v").get<double>();
            } else {
                n.feature = jn.at("f").get<int>();
                if (n.feature < 0) bad("negative split feature");
                n.threshold = jn.at("t").get<double>();
                n.left = jn.at("l").get<int>();
                n.right = jn.at("r").get<int>();
            }
            t.nodes.push_back(n);
        }
        check_preorder(t, m.n_features);
        m.trees.push_back(std::move(t));
    }
    return m;
}

inline ojson unit_to_json(const SaabUnit& u) {
    ojson kernels = ojson::array();
    for (std::size_t i = 0; i < u.channels.size(); ++i) {
        const auto row = u.kernel_row(i);
        kernels.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"s", u.shape.side},
            {"channels", u.channels},
            {"kernels", std::move(kernels)},
            {"eigenvalues", u.eigenvalues},
            {"degenerate", u.degenerate}};
}

inline SaabUnit unit_from_json(const json& j) {
    const int s = j.at("s").get<int>();
    if (s < 2 || s > 4) bad("unit side " + std::to_string(s) + " is not 2, 3 or 4");
    SaabUnit u;
    u.shape = FilterShape::of(s);
    u.channels = j.at("channels").get<std::vector<int>>();
    const auto d = u.dim();
    for (std::size_t i = 0; i < u.channels.size(); ++i) {
        if (u.channels[i] < 0 || static_cast<std::size_t>(u.channels[i]) >= d) bad("kernel index out of range");
        if (i > 0 && u.channels[i] <= u.channels[i - 1]) bad("kernel indices must be strictly ascending");
    }
    const auto rows = j.at("kernels").get<std::vector<std::vector<double>>>();
    if (rows.size() != u.channels.size()) bad("kernel count does not match channels");
    for (const auto& r : rows) {
        if (r.size() != d) bad("kernel length does not match unit dimension");
        for (double v : r)
            if (!std::isfinite(v)) bad("non-finite kernel entry");
        u.kernels.insert(u.kernels.end(), r.begin(), r.end());
    }
    u.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    if (u.eigenvalues.size() != d - 1) bad("eigenvalue count must be d - 1");
    u.degenerate = j.at("degenerate").get<bool>();
    return u;
}

inline ojson model_body(const DetectorModel& m) {
    ojson j;
    j["magic"] = kModelMagic;
    j["version"] = kModelVersion;
    j["config"] = config_to_json(m.config);
    ojson units = ojson::array();
    for (const auto& u : m.units) units.push_back(unit_to_json(u));
    j["units"] = std::move(units);
    ojson bank = ojson::array();
    for (const auto& r : m.bank.selected)
        bank.push_back({{"unit", r.key.unit},
                        {"channel", r.key.k},
                        {"train_auc", r.train_auc},
                        {"val_auc", r.val_auc},
                        {"model", gbdt_to_json(r.model)}});
    j["bank"] = {{"n_sel_per_unit", m.bank.n_sel_per_unit}, {"channels", std::move(bank)}};
    j["meta"] = gbdt_to_json(m.meta);
    j["provenance"] = {{"created", m.provenance.created}, {"manifest_sha256", m.provenance.manifest_sha256}};
    return j;
}

/// SHA-256 of the compact, key-sorted dump of everything except "digest".
inline std::string body_digest(json body) {
    body.erase("digest");
    return sha256_hex(body.dump());
}

} // namespace store_detail

inline std::string to_json_string(const DetectorModel& model) {
    using namespace store_detail;
    ojson body = model_body(model);
    body["digest"] = body_digest(json::parse(body.dump()));
    return body.dump(1) + "\n";
}

inline void save(const DetectorModel& model, const std::filesystem::path& path) {
    const std::string text = to_json_string(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

/// Validation order: syntax and magic, version, structure, model invariants, digest.
inline DetectorModel from_json_string(const std::string& text) {
    using namespace store_detail;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        bad(std::string("not valid JSON (") + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("magic") || j["magic"] != kModelMagic) bad("missing A-PIXELHOP magic");
    if (!j.contains("version") || !j["version"].is_number_integer()) bad("missing integer version");
    if (j["version"].get<long long>() != kModelVersion)
        fail(Errc::UnsupportedVersion, "model version " + j["version"].dump() + " is not supported");

    DetectorModel m;
    try {
        m.config = config_from_json(j.at("config"));
        for (const json& ju : j.at("units")) m.units.push_back(unit_from_json(ju));
        const json& jb = j.at("bank");
        m.bank.n_sel_per_unit = jb.at("n_sel_per_unit").get<int>();
        for (const json& jc : jb.at("channels")) {
            ChannelRecord r;
            r.key = {jc.at("unit").get<int>(), jc.at("channel").get<int>()};
            if (r.key.unit < 2 || r.key.unit > 4) bad("bank references unit s=" + std::to_string(r.key.unit));
            r.train_auc = jc.at("train_auc").get<double>();
            r.val_auc = jc.at("val_auc").get<double>();
            r.model = gbdt_from_json(jc.at("model"));
            m.bank.selected.push_back(std::move(r));
        }
        m.meta = gbdt_from_json(j.at("meta"));
        const json& jp = j.at("provenance");
        m.provenance = {jp.at("created").get<std::string>(), jp.at("manifest_sha256").get<std::string>()};
        if (!j.at("digest").is_string()) bad("digest must be a string");
    } catch (const json::exception& e) {
        bad(std::string("malformed structure (") + e.what() + ")");
    }

    if (m.units.size() != kUnitSides.size()) bad("expected three units");
    for (std::size_t i = 0; i < kUnitSides.size(); ++i)
        if (m.units[i].shape.side != kUnitSides[i]) bad("units must be ordered s = 2, 3, 4");
    for (int side : kUnitSides) {
        const auto n = std::count_if(m.bank.selected.begin(), m.bank.selected.end(),
                                     [&](const ChannelRecord& r) { return r.key.unit == side; });
        if (n != m.bank.n_sel_per_unit) bad("bank must hold n_sel_per_unit channels per unit");
    }
    for (const auto& r : m.bank.selected) {
        const SaabUnit& u = unit_for(m.units, r.key.unit);
        if (!u.slot_of(r.key.k)) bad("bank channel " + std::to_string(r.key.k) + " has no stored kernel");
        if (r.model.n_features != u.shape.grid_size()) bad("bank classifier feature count does not match its unit");
    }

    try {
        m.config.validate();
    } catch (const Error& e) {
        bad(std::string("invalid config (") + e.what() + ")");
    }
    for (const auto& u : m.units)
        if (gram_deviation(u) > kOrthonormalTolerance)
            fail(Errc::InvariantViolation, "kernels of the " + std::to_string(u.shape.side) + "x" +
                                               std::to_string(u.shape.side) + "x3 unit are not orthonormal");
    if (m.meta.n_features != static_cast<int>(m.feature_length()))
        fail(Errc::InvariantViolation, "meta feature count does not equal bank size * 2T");
    if (body_digest(j) != j["digest"].get<std::string>()) bad("digest mismatch");
    return m;
}

inline DetectorModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

struct ParamReport {
    struct UnitRow {
        int side;
        std::size_t selected;      ///< bank channels from this unit
        std::size_t kernel_params; ///< selected * s^2 * 3
        std::size_t stored_params; ///< kernel entries actually stored
    };
    std::vector<UnitRow> units;
    std::size_t n_classifiers = 0;
    std::size_t classifier_bound = 0;  ///< per classifier, complete trees
    std::size_t classifier_actual = 0; ///< summed over classifiers
    std::size_t meta_bound = 0;
    std::size_t meta_actual = 0;

    std::size_t kernel_total() const {
        std::size_t n = 0;
        for (const auto& u : units) n += u.kernel_params;
        return n;
    }
    std::size_t stored_kernel_total() const {
        std::size_t n = 0;
        for (const auto& u : units) n += u.stored_params;
        return n;
    }
    std::size_t total_bound() const { return kernel_total() + n_classifiers * classifier_bound + meta_bound; }
    std::size_t total_actual() const { return kernel_total() + classifier_actual + meta_actual; }
};

inline std::size_t boosted_bound(const BoostConfig& c) {
    return static_cast<std::size_t>(c.n_trees) * complete_tree_params(c.max_depth);
}

inline ParamReport param_report(const DetectorModel& m) {
    ParamReport r;
    for (const auto& u : m.units) {
        std::size_t sel = 0;
        for (const auto& rec : m.bank.selected) sel += rec.key.unit == u.shape.side ? 1 : 0;
        r.units.push_back({u.shape.side, sel, sel * u.dim(), u.kernels.size()});
    }
    r.n_classifiers = m.bank.size();
    r.classifier_bound = boosted_bound(m.config.boost);
    for (const auto& rec : m.bank.selected) r.classifier_actual += count_params(rec.model);
    r.meta_bound = boosted_bound(m.config.ensemble.meta);
    r.meta_actual = count_params(m.meta);
    return r;
}

inline void print_param_report(std::ostream& out, const ParamReport& r) {
    auto row = [&](const std::string& name, const std::string& count, std::size_t bound, std::size_t actual) {
        out << std::left << std::setw(30) << name << std::right << std::setw(12) << count << std::setw(14) << bound
            << std::setw(14) << actual << '\n';
    };
    out << std::left << std::setw(30) << "component" << std::right << std::setw(12) << "count" << std::setw(14)
        << "bound" << std::setw(14) << "actual" << '\n';
    for (const auto& u : r.units) {
        const std::string name = std::to_string(u.side) + "x" + std::to_string(u.side) + "x3 kernels";
        row(name, std::to_string(u.selected) + " (" + std::to_string(u.side * u.side * 3) + ")", u.kernel_params,
            u.kernel_params);
    }
    row("channel classifiers", std::to_string(r.n_classifiers) + " (" + std::to_string(r.classifier_bound) + ")",
        r.n_classifiers * r.classifier_bound, r.classifier_actual);
    row("image-level ensemble", "1", r.meta_bound, r.meta_actual);
    row("total", "", r.total_bound(), r.total_actual());
    out << "stored kernel entries: " << r.stored_kernel_total() << '\n';
}

} // namespace apixelhop
