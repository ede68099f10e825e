#pragma once

// Gradient-boosted binary decision trees with logistic loss and exact greedy
// split search (second-order gains, L2-regularised leaf weights).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"

namespace apixelhop {

struct BoostConfig {
    int n_trees = 100;
    int max_depth = 6;
    double learning_rate = 0.1;
    double lambda = 1.0;
    double min_child_weight = 1.0;
    double gamma = 0.0;

    void validate() const {
        require(n_trees >= 1, Errc::InvalidArgument, "n_trees must be >= 1");
        require(max_depth >= 1, Errc::InvalidArgument, "max_depth must be >= 1");
        require(learning_rate > 0.0 && learning_rate <= 1.0, Errc::InvalidArgument, "learning_rate must lie in (0, 1]");
        require(lambda >= 0.0 && min_child_weight >= 0.0 && gamma >= 0.0, Errc::InvalidArgument,
                "lambda, min_child_weight and gamma must be >= 0");
    }

    bool operator==(const BoostConfig&) const = default;
};

/// Internal nodes route x[feature] < threshold to `left`, otherwise `right`.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// Nodes in preorder; the root is nodes[0].
struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const TreeNode& n = nodes[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
        }
        return nodes[i].value;
    }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }
    std::size_t internal_count() const { return nodes.size() - leaf_count(); }

    int depth() const { return depth_from(0); }

    bool operator==(const Tree&) const = default;

private:
    int depth_from(std::size_t i) const {
        const TreeNode& n = nodes[i];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
    }
};

inline double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

struct GbdtModel {
    std::vector<Tree> trees;
    double learning_rate = 0.1;
    double base_score = 0.0;
    int n_features = 0;
    std::vector<double> train_logloss; ///< mean log-loss after each round

    double margin(std::span<const double> x) const {
        double m = base_score;
        for (const auto& t : trees) m += t.predict(x);
        return m;
    }

    bool operator==(const GbdtModel&) const = default;
};

inline double predict_proba(const GbdtModel& model, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(model.n_features))
        fail(Errc::DimensionMismatch,
             "expected " + std::to_string(model.n_features) + " features, got " + std::to_string(x.size()));
    return sigmoid(model.margin(x));
}

/// Parameters: two per internal node (feature, threshold), one per leaf.
inline std::size_t count_params(const GbdtModel& model) {
    std::size_t n = 0;
    for (const auto& t : model.trees) n += 2 * t.internal_count() + t.leaf_count();
    return n;
}

/// Parameter count of one complete binary tree of the given depth.
constexpr std::size_t complete_tree_params(int depth) {
    const std::size_t leaves = std::size_t{1} << depth;
    return 2 * (leaves - 1) + leaves;
}

/// Column-major N x F matrix of doubles.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

    std::span<const double> column(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

    std::vector<double> row(std::size_t r) const {
        std::vector<double> out(cols_);
        for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
        return out;
    }

    void set_row(std::size_t r, std::span<const double> values) {
        for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = values[c];
    }

    static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        FeatureMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            require(rows[r].size() == m.cols(), Errc::DimensionMismatch, "ragged feature rows");
            m.set_row(r, rows[r]);
        }
        return m;
    }

    std::span<const double> raw() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double log_loss(double margin, int label) {
    // -[y log p + (1-y) log(1-p)] with p = sigmoid(margin)
    return std::max(margin, 0.0) - margin * label + std::log1p(std::exp(-std::abs(margin)));
}

namespace gbdt_detail {

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    double left_g = 0.0;
    double left_h = 0.0;
};

struct GrowNode {
    double G = 0.0;
    double H = 0.0;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

// Rows of the open nodes, per feature, sorted by (value, row id) inside each
// node's segment. Every feature shares the same segment bounds. Values are
// held as dense ranks into the feature's sorted distinct values.
struct SortedColumns {
    std::size_t rows = 0; // rows currently held (open nodes only)
    std::size_t stride = 0;
    std::vector<std::uint32_t> index;
    std::vector<std::uint32_t> rank;

    std::uint32_t* idx(std::size_t f) { return index.data() + f * stride; }
    std::uint32_t* rk(std::size_t f) { return rank.data() + f * stride; }
    const std::uint32_t* idx(std::size_t f) const { return index.data() + f * stride; }
    const std::uint32_t* rk(std::size_t f) const { return rank.data() + f * stride; }
};

struct Presorted {
    SortedColumns columns;
    std::vector<std::vector<double>> distinct; ///< per feature, ascending
};

// Order-preserving unsigned key; -0.0 and +0.0 share a key.
inline std::uint64_t sort_key(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
    return (bits >> 63) ? ~bits : bits | (std::uint64_t{1} << 63);
}

// Stable LSD radix sort of row ids by key; equal keys keep ascending row order.
inline void radix_order(std::span<const double> col, std::uint32_t* idx, std::vector<std::uint64_t>& keys,
                        std::vector<std::uint64_t>& tmp_keys, std::vector<std::uint32_t>& tmp_idx) {
    constexpr int kBits = 11;
    constexpr std::size_t kBuckets = std::size_t{1} << kBits;
    const std::size_t n = col.size();
    keys.resize(n);
    tmp_keys.resize(n);
    tmp_idx.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        keys[r] = sort_key(col[r]);
        idx[r] = static_cast<std::uint32_t>(r);
    }
    std::uint64_t* k_in = keys.data();
    std::uint32_t* i_in = idx;
    std::uint64_t* k_out = tmp_keys.data();
    std::uint32_t* i_out = tmp_idx.data();
    std::array<std::uint32_t, kBuckets> count;
    for (int shift = 0; shift < 64; shift += kBits) {
        count.fill(0);
        for (std::size_t r = 0; r < n; ++r) ++count[(k_in[r] >> shift) & (kBuckets - 1)];
        if (count[(k_in[0] >> shift) & (kBuckets - 1)] == n) continue; // digit constant
        std::uint32_t sum = 0;
        for (auto& c : count) {
            const std::uint32_t c0 = c;
            c = sum;
            sum += c0;
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto d = (k_in[r] >> shift) & (kBuckets - 1);
            k_out[count[d]] = k_in[r];
            i_out[count[d]++] = i_in[r];
        }
        std::swap(k_in, k_out);
        std::swap(i_in, i_out);
    }
    if (i_in != idx) std::copy(i_in, i_in + n, idx);
}

inline Presorted presort(const FeatureMatrix& X, unsigned threads) {
    Presorted out;
    SortedColumns& p = out.columns;
    p.rows = p.stride = X.rows();
    p.index.resize(X.rows() * X.cols());
    p.rank.resize(X.rows() * X.cols());
    out.distinct.resize(X.cols());
    parallel_for(X.cols(), threads, [&](std::size_t f) {
        const auto col = X.column(f);
        std::vector<std::uint64_t> keys, tmp_keys;
        std::vector<std::uint32_t> tmp_idx;
        std::uint32_t* idx = p.idx(f);
        radix_order(col, idx, keys, tmp_keys, tmp_idx);
        std::uint32_t* rk = p.rk(f);
        auto& values = out.distinct[f];
        for (std::size_t r = 0; r < p.rows; ++r) {
            const double v = col[idx[r]];
            if (values.empty() || values.back() < v) values.push_back(v);
            rk[r] = static_cast<std::uint32_t>(values.size() - 1);
        }
    });
    return out;
}

struct Segment {
    std::size_t begin;
    std::size_t end;
    int node;
};

// Best split of one node along one feature. Candidates sit between
// consecutive distinct values; the first (lowest threshold) maximum wins.
// Candidates are ranked by the combined child score
//   (G_L^2 (H_R+lambda) + G_R^2 (H_L+lambda)) / ((H_L+lambda)(H_R+lambda)),
// which is the gain up to a monotone map; it is compared as num > top * den
// so the division only happens when the incumbent changes.
inline SplitChoice scan_segment(const std::uint32_t* idx, const std::uint32_t* rk, std::size_t len, const double* gh,
                                const double* distinct, const GrowNode& node, int feature, const BoostConfig& cfg) {
    SplitChoice best;
    if (len < 2) return best;
    const double lambda = cfg.lambda;
    const double mcw = cfg.min_child_weight;
    const double G = node.G;
    const double H = node.H;
    const double parent = G * G / (H + lambda);
    // Only candidates scoring above parent + 2 gamma have positive gain.
    double top = parent + 2.0 * cfg.gamma;
    std::size_t arg = len;
    double arg_g = 0.0;
    double arg_h = 0.0;
    double gl = 0.0;
    double hl = 0.0;
    for (std::size_t r = 0; r + 1 < len; ++r) {
        const std::uint32_t i = idx[r];
        gl += gh[2 * i];
        hl += gh[2 * i + 1];
        const double hr = H - hl;
        const double dl = hl + lambda;
        const double dr = hr + lambda;
        const double gr = G - gl;
        const double num = gl * gl * dr + gr * gr * dl;
        const double den = dl * dr;
        // Invalid candidates get a negative score (top * den >= 0), leaving a
        // single, rarely taken branch; tie-dependent tests branch unpredictably.
        const bool ok = (rk[r] != rk[r + 1]) & (hl >= mcw) & (hr >= mcw) & (den > 0.0);
        const std::uint64_t keep = std::uint64_t{0} - static_cast<std::uint64_t>(ok);
        const double cand = std::bit_cast<double>((std::bit_cast<std::uint64_t>(num) & keep) |
                                                  (std::bit_cast<std::uint64_t>(-1.0) & ~keep));
        if (cand > top * den) {
            top = num / den;
            arg = r;
            arg_g = gl;
            arg_h = hl;
        }
    }
    if (arg == len) return best;
    const double gain = 0.5 * (top - parent) - cfg.gamma;
    if (!(gain > 0.0)) return best;
    const double lo = distinct[rk[arg]];
    const double hi = distinct[rk[arg + 1]];
    double thr = 0.5 * (lo + hi);
    if (!(thr > lo)) thr = hi;
    return {gain, feature, thr, arg_g, arg_h};
}

inline void to_preorder(const std::vector<GrowNode>& grown, int id, std::vector<TreeNode>& out) {
    const GrowNode& g = grown[static_cast<std::size_t>(id)];
    const auto self = out.size();
    out.push_back({});
    if (g.feature < 0) {
        out[self].value = g.value;
        return;
    }
    out[self].feature = g.feature;
    out[self].threshold = g.threshold;
    out[self].left = static_cast<int>(out.size());
    to_preorder(grown, g.left, out);
    out[self].right = static_cast<int>(out.size());
    to_preorder(grown, g.right, out);
}

} // namespace gbdt_detail

/// Exact greedy boosting. Trees grow level by level. Each open node owns a
/// segment of every feature's presorted column; a split stable-partitions
/// those segments into its children, and segments of finished nodes are
/// dropped. Gains are second order:
///   1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma,
/// ties going to the lower feature index, then the lower threshold.
inline GbdtModel fit(const FeatureMatrix& X, std::span<const int> y, const BoostConfig& cfg, unsigned threads = 1) {
    using namespace gbdt_detail;
    cfg.validate();
    const std::size_t n = X.rows();
    const std::size_t n_feat = X.cols();
    require(y.size() == n, Errc::DimensionMismatch, "label count does not match rows");
    require(n >= 2 && n_feat >= 1, Errc::InvalidArgument, "need at least 2 rows and 1 feature");
    for (double v : X.raw())
        if (!std::isfinite(v)) fail(Errc::NonFinite, "feature matrix contains NaN or Inf");
    std::size_t positives = 0;
    for (int label : y) {
        require(label == 0 || label == 1, Errc::InvalidArgument, "labels must be 0 or 1");
        positives += static_cast<std::size_t>(label);
    }
    if (positives == 0 || positives == n) fail(Errc::SingleClass, "training labels contain a single class");

    const Presorted presorted = presort(X, threads);
    const double lambda = cfg.lambda;

    GbdtModel model;
    model.learning_rate = cfg.learning_rate;
    model.base_score = 0.0;
    model.n_features = static_cast<int>(n_feat);

    std::vector<double> margin(n, model.base_score);
    std::vector<double> gh(2 * n); // interleaved gradient, hessian
    std::vector<int> leaf_of(n, 0);
    std::vector<std::uint8_t> goes_left(n, 0);
    SortedColumns cur;
    SortedColumns nxt;
    std::vector<std::uint32_t> right_idx;
    std::vector<std::uint32_t> right_rk;

    for (int round = 0; round < cfg.n_trees; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            gh[2 * i] = p - y[i];
            gh[2 * i + 1] = p * (1.0 - p);
        }

        std::vector<GrowNode> grown(1);
        for (std::size_t i = 0; i < n; ++i) {
            grown[0].G += gh[2 * i];
            grown[0].H += gh[2 * i + 1];
        }
        std::fill(leaf_of.begin(), leaf_of.end(), 0);
        cur = presorted.columns;
        std::vector<Segment> open{{0, n, 0}};

        for (int depth = 0; depth < cfg.max_depth && !open.empty(); ++depth) {
            const std::size_t m = open.size();
            std::vector<SplitChoice> per_feature(n_feat * m);
            std::vector<char> can_split(m);
            for (std::size_t s = 0; s < m; ++s)
                can_split[s] = grown[static_cast<std::size_t>(open[s].node)].H >= 2.0 * cfg.min_child_weight;

            parallel_for(n_feat, threads, [&](std::size_t f) {
                const std::uint32_t* idx = cur.idx(f);
                const std::uint32_t* rk = cur.rk(f);
                for (std::size_t s = 0; s < m; ++s) {
                    if (!can_split[s]) continue;
                    const Segment& seg = open[s];
                    per_feature[f * m + s] =
                        scan_segment(idx + seg.begin, rk + seg.begin, seg.end - seg.begin, gh.data(),
                                     presorted.distinct[f].data(), grown[static_cast<std::size_t>(seg.node)],
                                     static_cast<int>(f), cfg);
                }
            });

            std::vector<Segment> next;
            std::vector<char> split(m, 0);
            std::size_t kept = 0;
            for (std::size_t s = 0; s < m; ++s) {
                SplitChoice best;
                for (std::size_t f = 0; f < n_feat; ++f) {
                    const SplitChoice& c = per_feature[f * m + s];
                    if (c.feature >= 0 && c.gain > best.gain) best = c;
                }
                if (best.feature < 0) continue;
                const auto id = static_cast<std::size_t>(open[s].node);
                const int left = static_cast<int>(grown.size());
                GrowNode lnode;
                lnode.G = best.left_g;
                lnode.H = best.left_h;
                GrowNode rnode;
                rnode.G = grown[id].G - best.left_g;
                rnode.H = grown[id].H - best.left_h;
                grown[id].feature = best.feature;
                grown[id].threshold = best.threshold;
                grown[id].left = left;
                grown[id].right = left + 1;
                grown.push_back(lnode);
                grown.push_back(rnode);
                split[s] = 1;
                kept += open[s].end - open[s].begin;
            }

            // Route rows of split nodes; rows of unsplit nodes settle in their leaf.
            const std::uint32_t* rows0 = cur.idx(0);
            std::size_t out_pos = 0;
            for (std::size_t s = 0; s < m; ++s) {
                const Segment& seg = open[s];
                if (!split[s]) {
                    for (std::size_t r = seg.begin; r < seg.end; ++r) leaf_of[rows0[r]] = seg.node;
                    continue;
                }
                const GrowNode& parent = grown[static_cast<std::size_t>(seg.node)];
                std::size_t n_left = 0;
                for (std::size_t r = seg.begin; r < seg.end; ++r) {
                    const std::uint32_t i = rows0[r];
                    const bool l = X(i, static_cast<std::size_t>(parent.feature)) < parent.threshold;
                    goes_left[i] = l ? 1 : 0;
                    leaf_of[i] = l ? parent.left : parent.right;
                    n_left += l ? 1 : 0;
                }
                next.push_back({out_pos, out_pos + n_left, parent.left});
                next.push_back({out_pos + n_left, seg.end - seg.begin + out_pos, parent.right});
                out_pos += seg.end - seg.begin;
            }

            if (depth + 1 < cfg.max_depth && kept > 0) {
                nxt.rows = kept;
                nxt.stride = kept;
                nxt.index.resize(kept * n_feat);
                nxt.rank.resize(kept * n_feat);
                right_idx.resize(std::max<std::size_t>(1, threads) * n);
                right_rk.resize(std::max<std::size_t>(1, threads) * n);
                const std::size_t part_workers = std::min<std::size_t>(std::max(1u, threads), n_feat);
                parallel_for(part_workers, static_cast<unsigned>(part_workers), [&](std::size_t w) {
                    std::uint32_t* tidx = right_idx.data() + w * n;
                    std::uint32_t* trk = right_rk.data() + w * n;
                    for (std::size_t f = w * n_feat / part_workers; f < (w + 1) * n_feat / part_workers; ++f) {
                        const std::uint32_t* idx = cur.idx(f);
                        const std::uint32_t* rk = cur.rk(f);
                        std::uint32_t* oidx = nxt.idx(f);
                        std::uint32_t* ork = nxt.rk(f);
                        std::size_t pos = 0;
                        for (std::size_t s = 0; s < m; ++s) {
                            if (!split[s]) continue;
                            const Segment& seg = open[s];
                            // Stable two-way partition, branch-free: left rows go
                            // straight to the output, right rows via scratch.
                            std::size_t lpos = pos;
                            std::size_t rpos = 0;
                            for (std::size_t r = seg.begin; r < seg.end; ++r) {
                                const std::uint32_t i = idx[r];
                                const std::size_t l = goes_left[i];
                                oidx[lpos] = i;
                                ork[lpos] = rk[r];
                                tidx[rpos] = i;
                                trk[rpos] = rk[r];
                                lpos += l;
                                rpos += 1 - l;
                            }
                            std::copy(tidx, tidx + rpos, oidx + lpos);
                            std::copy(trk, trk + rpos, ork + lpos);
                            pos += seg.end - seg.begin;
                        }
                    }
                });
                std::swap(cur, nxt);
            }
            open = std::move(next);
        }

        for (auto& g : grown)
            if (g.feature < 0 && g.H + lambda > 0.0) g.value = -cfg.learning_rate * g.G / (g.H + lambda);
        for (std::size_t i = 0; i < n; ++i) margin[i] += grown[static_cast<std::size_t>(leaf_of[i])].value;

        Tree tree;
        tree.nodes.reserve(grown.size());
        to_preorder(grown, 0, tree.nodes);
        model.trees.push_back(std::move(tree));

        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) loss += log_loss(margin[i], y[i]);
        model.train_logloss.push_back(loss / static_cast<double>(n));
    }
    return model;
}

} // namespace apixelhop
