#pragma once

#include "common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpred {

/// Flat binary-tree node. Rows with value < threshold go left, all others right.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    /// Leaf output: the raw Newton step for boosted trees, class-1 frequency for Gini trees.
    double weight = 0.0;
    double gain = 0.0;  // split score of an internal node
    double sum_grad = 0.0;
    double sum_hess = 0.0;
    std::size_t count = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int leaf_index(const Matrix& x, Eigen::Index row) const {
        int n = 0;
        while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
            const auto& node = nodes[static_cast<std::size_t>(n)];
            n = x(row, node.feature) < node.threshold ? node.left : node.right;
        }
        return n;
    }
    double predict(const Matrix& x, Eigen::Index row) const {
        return nodes[static_cast<std::size_t>(leaf_index(x, row))].weight;
    }
    std::size_t split_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
    }
    friend bool operator==(const Tree&, const Tree&) = default;
};

/// Gradient-boosting hyperparameters; defaults are the tuned values of the reference study.
struct BoostParams {
    int n_rounds = 100;
    int max_depth = 6;
    double subsample = 0.7;
    double colsample_bytree = 0.75;
    double reg_lambda = 5.0;
    double reg_alpha = 5.0;
    double min_child_weight = 9.0;
    double gamma = 0.3;
    double learning_rate = 0.12;
    double base_score = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        auto rate = [](double r) { return r > 0.0 && r <= 1.0; };
        if (n_rounds < 0) throw std::invalid_argument("BoostParams: n_rounds must be >= 0");
        if (max_depth < 1) throw std::invalid_argument("BoostParams: max_depth must be >= 1");
        if (!rate(subsample) || !rate(colsample_bytree) || !rate(learning_rate))
            throw std::invalid_argument("BoostParams: subsample, colsample_bytree and learning_rate must lie in (0, 1]");
        if (!(reg_lambda >= 0) || !(reg_alpha >= 0) || !(min_child_weight >= 0) || !(gamma >= 0))
            throw std::invalid_argument("BoostParams: regularizers must be >= 0");
        if (!(base_score > 0.0 && base_score < 1.0)) throw std::invalid_argument("BoostParams: base_score must lie in (0, 1)");
    }
    friend bool operator==(const BoostParams&, const BoostParams&) = default;
};

/// sign(g) * max(|g| - alpha, 0)
inline double soft_threshold(double g, double alpha) noexcept {
    if (g > alpha) return g - alpha;
    if (g < -alpha) return g + alpha;
    return 0.0;
}

inline double leaf_weight(double sum_grad, double sum_hess, double lambda, double alpha) noexcept {
    return -soft_threshold(sum_grad, alpha) / (sum_hess + lambda);
}

/// Second-order split score, already net of gamma.
inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) noexcept {
    const double g = gl + gr, h = hl + hr;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

/// Candidate gains closer than this (relative) to the running best are ties; the earlier
/// candidate, lowest feature then lowest threshold, is kept.
inline constexpr double kGainTieTolerance = 1e-12;

/// Midpoint of two consecutive distinct values, nudged so that lo routes left.
inline double split_threshold(double lo, double hi) noexcept {
    const double mid = lo + (hi - lo) / 2.0;
    return lo < mid ? mid : hi;
}

namespace detail {

using RowList = std::vector<std::uint32_t>;

inline RowList sorted_rows(const Matrix& x, Eigen::Index feature, std::span<const std::size_t> rows) {
    RowList out(rows.begin(), rows.end());
    std::sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = x(a, feature), vb = x(b, feature);
        return va < vb || (va == vb && a < b);
    });
    return out;
}

/// Exact greedy, depth-first grower. Each node owns, per candidate feature, its rows sorted by
/// that feature; splitting stably partitions every list so no re-sorting happens below the root.
class BoostedTreeGrower {
public:
    BoostedTreeGrower(const Matrix& x, std::span<const double> grad, std::span<const double> hess, const BoostParams& p,
                      std::vector<std::size_t> features)
        : x_(x), grad_(grad), hess_(hess), p_(p), features_(std::move(features)),
          goes_left_(static_cast<std::size_t>(x.rows()), 0) {}

    Tree grow(std::vector<RowList> lists) {
        tree_.nodes.clear();
        grow_node(std::move(lists), 0);
        return std::move(tree_);
    }

private:
    int grow_node(std::vector<RowList> lists, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const RowList& rows = lists.front();
        double g = 0.0, h = 0.0;
        for (std::uint32_t r : rows) {
            g += grad_[r];
            h += hess_[r];
        }
        {
            auto& node = tree_.nodes.back();
            node.sum_grad = g;
            node.sum_hess = h;
            node.count = rows.size();
            node.weight = leaf_weight(g, h, p_.reg_lambda, p_.reg_alpha);
        }
        if (depth >= p_.max_depth || rows.size() < 2) return id;

        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t fi = 0; fi < features_.size(); ++fi) {
            const auto f = static_cast<Eigen::Index>(features_[fi]);
            const RowList& ord = lists[fi];
            double gl = 0.0, hl = 0.0;
            for (std::size_t i = 0; i + 1 < ord.size(); ++i) {
                gl += grad_[ord[i]];
                hl += hess_[ord[i]];
                const double v = x_(ord[i], f), next = x_(ord[i + 1], f);
                if (v == next) continue;
                const double hr = h - hl;
                if (hr < p_.min_child_weight) break;
                if (hl < p_.min_child_weight) continue;
                const double gain = split_gain(gl, hl, g - gl, hr, p_.reg_lambda, p_.gamma);
                if (gain > best_gain + kGainTieTolerance * (1.0 + std::abs(best_gain))) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = split_threshold(v, next);
                }
            }
        }
        if (best_feature < 0) return id;

        for (std::uint32_t r : rows) goes_left_[r] = x_(r, best_feature) < best_threshold;
        std::vector<RowList> left(lists.size()), right(lists.size());
        for (std::size_t fi = 0; fi < lists.size(); ++fi) {
            for (std::uint32_t r : lists[fi]) (goes_left_[r] ? left[fi] : right[fi]).push_back(r);
            RowList().swap(lists[fi]);
        }
        const int l = grow_node(std::move(left), depth + 1);
        const int rgt = grow_node(std::move(right), depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.gain = best_gain;
        node.left = l;
        node.right = rgt;
        return id;
    }

    const Matrix& x_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    const BoostParams& p_;
    std::vector<std::size_t> features_;
    std::vector<std::uint8_t> goes_left_;
    Tree tree_;
};

inline void check_mask(std::span<const std::size_t> idx, std::size_t bound, const char* what) {
    if (idx.empty()) throw std::invalid_argument(std::string("fit_boosted_tree: empty ") + what);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= bound) throw std::invalid_argument(std::string("fit_boosted_tree: ") + what + " index out of range");
        if (i > 0 && idx[i] <= idx[i - 1]) throw std::invalid_argument(std::string("fit_boosted_tree: ") + what + " must be strictly ascending");
    }
}

}  // namespace detail

/// Grows one regression tree on the given gradient statistics over the masked rows and columns.
/// `rows` and `cols` are ascending index lists.
inline Tree fit_boosted_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess, const BoostParams& params,
                             std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    params.validate();
    const auto n = static_cast<std::size_t>(x.rows());
    if (grad.size() != n || hess.size() != n) throw std::invalid_argument("fit_boosted_tree: grad/hess length must equal row count");
    detail::check_mask(rows, n, "row mask");
    detail::check_mask(cols, static_cast<std::size_t>(x.cols()), "column mask");
    for (std::size_t r : rows)
        if (!std::isfinite(grad[r]) || !std::isfinite(hess[r]) || hess[r] < 0)
            throw std::invalid_argument("fit_boosted_tree: grad must be finite and hess finite and >= 0");
    std::vector<detail::RowList> lists;
    lists.reserve(cols.size());
    for (std::size_t f : cols) lists.push_back(detail::sorted_rows(x, static_cast<Eigen::Index>(f), rows));
    detail::BoostedTreeGrower grower(x, grad, hess, params, std::vector<std::size_t>(cols.begin(), cols.end()));
    return grower.grow(std::move(lists));
}

/// Logistic gradient-boosted ensemble. Trees store raw leaf weights; the learning rate is
/// applied when tree outputs are accumulated into the margin.
struct Booster {
    std::vector<Tree> trees;
    BoostParams params;
    std::size_t feature_count = 0;
    LearningCurve history;  // one entry per round

    double base_margin() const { return logit(params.base_score); }
};

/// What one boosting round saw; handed to the optional observer after the tree is grown.
struct BoostRound {
    int round;
    std::span<const double> grad;
    std::span<const double> hess;
    std::span<const std::size_t> rows;
    std::span<const std::size_t> cols;
    const Tree& tree;
};

struct BoostFitOptions {
    const Matrix* x_val = nullptr;
    const Labels* y_val = nullptr;
    bool record_history = true;
    std::function<void(const BoostRound&)> observer;
};

namespace detail {

inline std::vector<std::size_t> sample_without_replacement(std::size_t n, double rate, Rng& rng) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (rate >= 1.0) return all;
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(rate * static_cast<double>(n))), 1, n);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace detail

inline std::vector<double> predict_margin(const Booster& b, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != b.feature_count)
        throw std::invalid_argument("predict_booster: expected " + std::to_string(b.feature_count) + " columns, got " +
                                    std::to_string(x.cols()));
    std::vector<double> margin(static_cast<std::size_t>(x.rows()), b.base_margin());
    for (const auto& tree : b.trees)
        for (Eigen::Index i = 0; i < x.rows(); ++i) margin[static_cast<std::size_t>(i)] += b.params.learning_rate * tree.predict(x, i);
    return margin;
}

inline std::vector<double> predict_booster(const Booster& b, const Matrix& x) {
    auto p = predict_margin(b, x);
    for (double& v : p) v = sigmoid(v);
    return p;
}

inline Booster fit_booster(const Matrix& x, std::span<const int> y, const BoostParams& params, const BoostFitOptions& opts = {}) {
    params.validate();
    const auto n = static_cast<std::size_t>(x.rows());
    const auto d = static_cast<std::size_t>(x.cols());
    if (y.size() != n) throw std::invalid_argument("fit_booster: label count must equal row count");
    require_binary(y, "fit_booster");
    if (n < 2) throw std::invalid_argument("fit_booster: need at least 2 rows");
    if (d == 0) throw std::invalid_argument("fit_booster: need at least 1 column");
    if (!has_both_classes(y)) throw std::invalid_argument("fit_booster: labels contain a single class; logistic objective is degenerate");
    if (!x.allFinite()) throw std::invalid_argument("fit_booster: non-finite feature value");
    const bool with_val = opts.x_val && opts.y_val;
    if (with_val && (static_cast<std::size_t>(opts.x_val->cols()) != d || opts.y_val->size() != static_cast<std::size_t>(opts.x_val->rows())))
        throw std::invalid_argument("fit_booster: validation set shape mismatch");

    Booster b;
    b.params = params;
    b.feature_count = d;

    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    std::vector<detail::RowList> presorted;
    presorted.reserve(d);
    for (std::size_t f = 0; f < d; ++f) presorted.push_back(detail::sorted_rows(x, static_cast<Eigen::Index>(f), all_rows));

    std::vector<double> margin(n, b.base_margin()), grad(n), hess(n), prob(n);
    std::vector<double> val_margin;
    std::vector<double> val_prob;
    if (with_val) {
        val_margin.assign(static_cast<std::size_t>(opts.x_val->rows()), b.base_margin());
        val_prob.resize(val_margin.size());
    }
    std::vector<std::uint8_t> in_round(n);
    Rng rng(params.seed);

    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            grad[i] = p - y[i];
            hess[i] = p * (1.0 - p);
        }
        const auto rows = detail::sample_without_replacement(n, params.subsample, rng);
        const auto cols = detail::sample_without_replacement(d, params.colsample_bytree, rng);
        std::fill(in_round.begin(), in_round.end(), 0);
        for (std::size_t r : rows) in_round[r] = 1;

        std::vector<detail::RowList> lists(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) {
            lists[c].reserve(rows.size());
            for (std::uint32_t r : presorted[cols[c]])
                if (in_round[r]) lists[c].push_back(r);
        }
        detail::BoostedTreeGrower grower(x, grad, hess, params, cols);
        Tree tree = grower.grow(std::move(lists));
        if (opts.observer) opts.observer(BoostRound{round, grad, hess, rows, cols, tree});

        for (std::size_t i = 0; i < n; ++i) margin[i] += params.learning_rate * tree.predict(x, static_cast<Eigen::Index>(i));
        if (with_val)
            for (std::size_t i = 0; i < val_margin.size(); ++i)
                val_margin[i] += params.learning_rate * tree.predict(*opts.x_val, static_cast<Eigen::Index>(i));
        b.trees.push_back(std::move(tree));

        if (opts.record_history) {
            for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(margin[i]);
            b.history.push(log_loss(prob, y), accuracy_at_half(prob, y));
            if (with_val) {
                for (std::size_t i = 0; i < val_margin.size(); ++i) val_prob[i] = sigmoid(val_margin[i]);
                b.history.push_validation(log_loss(val_prob, *opts.y_val), accuracy_at_half(val_prob, *opts.y_val));
            }
        }
    }
    return b;
}

/// Total split gain per feature across the ensemble, normalized to sum to 1; all zeros without splits.
inline std::vector<double> feature_importance(const Booster& b) {
    std::vector<double> imp(b.feature_count, 0.0);
    for (const auto& tree : b.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) imp.at(static_cast<std::size_t>(node.feature)) += node.gain;
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0)
        for (double& v : imp) v /= total;
    return imp;
}

inline nlohmann::json to_json(const Tree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
        nlohmann::json j = {{"weight", n.weight}, {"count", n.count}, {"sum_grad", n.sum_grad}, {"sum_hess", n.sum_hess}};
        if (!n.is_leaf()) {
            j["feature"] = n.feature;
            j["threshold"] = n.threshold;
            j["left"] = n.left;
            j["right"] = n.right;
            j["gain"] = n.gain;
        }
        nodes.push_back(std::move(j));
    }
    return {{"nodes", nodes}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
    Tree t;
    for (const auto& jn : j.at("nodes")) {
        TreeNode n;
        n.weight = jn.at("weight").get<double>();
        n.count = jn.value("count", std::size_t{0});
        n.sum_grad = jn.value("sum_grad", 0.0);
        n.sum_hess = jn.value("sum_hess", 0.0);
        if (jn.contains("feature")) {
            n.feature = jn.at("feature").get<int>();
            n.threshold = jn.at("threshold").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            n.gain = jn.value("gain", 0.0);
        }
        t.nodes.push_back(n);
    }
    const int size = static_cast<int>(t.nodes.size());
    if (size == 0) throw std::invalid_argument("tree_from_json: empty tree");
    for (const auto& n : t.nodes)
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
            throw std::invalid_argument("tree_from_json: child index out of range");
    return t;
}

inline nlohmann::json to_json(const BoostParams& p) {
    return {{"n_rounds", p.n_rounds},
            {"max_depth", p.max_depth},
            {"subsample", p.subsample},
            {"colsample_bytree", p.colsample_bytree},
            {"reg_lambda", p.reg_lambda},
            {"reg_alpha", p.reg_alpha},
            {"min_child_weight", p.min_child_weight},
            {"gamma", p.gamma},
            {"learning_rate", p.learning_rate},
            {"base_score", p.base_score},
            {"seed", p.seed}};
}

inline nlohmann::json to_json(const Booster& b) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : b.trees) trees.push_back(to_json(t));
    return {{"format", "cdpred.booster"}, {"params", to_json(b.params)}, {"feature_count", b.feature_count}, {"trees", trees}};
}

inline Booster booster_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cdpred.booster") throw std::invalid_argument("booster_from_json: not a booster model");
    Booster b;
    const auto& p = j.at("params");
    b.params.n_rounds = p.at("n_rounds").get<int>();
    b.params.max_depth = p.at("max_depth").get<int>();
    b.params.subsample = p.at("subsample").get<double>();
    b.params.colsample_bytree = p.at("colsample_bytree").get<double>();
    b.params.reg_lambda = p.at("reg_lambda").get<double>();
    b.params.reg_alpha = p.at("reg_alpha").get<double>();
    b.params.min_child_weight = p.at("min_child_weight").get<double>();
    b.params.gamma = p.at("gamma").get<double>();
    b.params.learning_rate = p.at("learning_rate").get<double>();
    b.params.base_score = p.at("base_score").get<double>();
    b.params.seed = p.at("seed").get<std::uint64_t>();
    b.feature_count = j.at("feature_count").get<std::size_t>();
    for (const auto& t : j.at("trees")) b.trees.push_back(tree_from_json(t));
    for (const auto& t : b.trees)
        for (const auto& n : t.nodes)
            if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= b.feature_count)
                throw std::invalid_argument("booster_from_json: split feature out of range");
    return b;
}

}  // namespace cdpred
