#pragma once

#include "common.hpp"
#include "trees.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace cdpred {

struct ForestParams {
    int n_trees = 100;
    int max_depth = 18;
    int min_samples_leaf = 4;
    int max_features = 0;  // 0 selects floor(sqrt(d))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (n_trees < 1) throw std::invalid_argument("ForestParams: n_trees must be >= 1");
        if (max_depth < 1) throw std::invalid_argument("ForestParams: max_depth must be >= 1");
        if (min_samples_leaf < 1) throw std::invalid_argument("ForestParams: min_samples_leaf must be >= 1");
        if (max_features < 0) throw std::invalid_argument("ForestParams: max_features must be >= 0");
    }
    std::size_t features_per_split(std::size_t d) const {
        const std::size_t m = max_features > 0 ? static_cast<std::size_t>(max_features)
                                                : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
        return std::clamp<std::size_t>(m, 1, d);
    }
};

struct ForestTreeInfo {
    std::uint64_t seed = 0;
    std::size_t in_bag_unique = 0;  // distinct training rows drawn for this tree
};

struct Forest {
    std::vector<Tree> trees;
    std::vector<ForestTreeInfo> tree_info;
    ForestParams params;
    std::size_t feature_count = 0;
    LearningCurve history;  // one entry per tree count
};

namespace detail {

/// CART classification tree on Gini impurity. Rows may repeat (bootstrap draws); repeats count
/// toward node sizes and class frequencies. Features are visited in random order and constant
/// ones are skipped without counting toward the per-split budget.
class GiniTreeGrower {
public:
    GiniTreeGrower(const Matrix& x, std::span<const int> y, const ForestParams& p, Rng& rng)
        : x_(x), y_(y), p_(p), rng_(rng), budget_(p.features_per_split(static_cast<std::size_t>(x.cols()))),
          features_(static_cast<std::size_t>(x.cols())) {
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    Tree grow(std::vector<std::uint32_t> rows) {
        tree_.nodes.clear();
        grow_node(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    struct Item {
        double value;
        std::uint32_t row;
    };

    int grow_node(std::vector<std::uint32_t> rows, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const std::size_t n = rows.size();
        std::size_t pos = 0;
        for (std::uint32_t r : rows) pos += static_cast<std::size_t>(y_[r]);
        {
            auto& node = tree_.nodes.back();
            node.count = n;
            node.sum_grad = static_cast<double>(pos);
            node.weight = n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;
        }
        const auto msl = static_cast<std::size_t>(p_.min_samples_leaf);
        if (depth >= p_.max_depth || n < 2 * msl || pos == 0 || pos == n) return id;

        const double parent = impurity_mass(pos, n);
        double best_score = parent;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<Item> items(n);
        std::size_t evaluated = 0;
        const std::size_t d = features_.size();
        for (std::size_t i = 0; i < d && evaluated < budget_; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, d - 1);
            std::swap(features_[i], features_[pick(rng_)]);
            const auto f = static_cast<Eigen::Index>(features_[i]);
            for (std::size_t k = 0; k < n; ++k) items[k] = {x_(rows[k], f), rows[k]};
            std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });
            if (items.front().value == items.back().value) continue;
            ++evaluated;
            std::size_t left_pos = 0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_pos += static_cast<std::size_t>(y_[items[k].row]);
                const std::size_t nl = k + 1, nr = n - nl;
                if (items[k].value == items[k + 1].value) continue;
                if (nl < msl) continue;
                if (nr < msl) break;
                const double score = impurity_mass(left_pos, nl) + impurity_mass(pos - left_pos, nr);
                if (score < best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = split_threshold(items[k].value, items[k + 1].value);
                }
            }
        }
        // Reject splits whose improvement is within rounding of zero.
        if (best_feature < 0 || !(parent - best_score > 1e-12 * static_cast<double>(n))) return id;

        std::vector<std::uint32_t> left, right;
        for (std::uint32_t r : rows) (x_(r, best_feature) < best_threshold ? left : right).push_back(r);
        std::vector<std::uint32_t>().swap(rows);
        std::vector<Item>().swap(items);
        const int l = grow_node(std::move(left), depth + 1);
        const int rgt = grow_node(std::move(right), depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.gain = parent - best_score;
        node.left = l;
        node.right = rgt;
        return id;
    }

    /// n * Gini(node) / 2 = pos * neg / n.
    static double impurity_mass(std::size_t pos, std::size_t n) {
        return n ? static_cast<double>(pos) * static_cast<double>(n - pos) / static_cast<double>(n) : 0.0;
    }

    const Matrix& x_;
    std::span<const int> y_;
    const ForestParams& p_;
    Rng& rng_;
    std::size_t budget_;
    std::vector<std::size_t> features_;
    Tree tree_;
};

inline void check_classification_input(const Matrix& x, std::span<const int> y, const char* who) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument(std::string(who) + ": label count must equal row count");
    if (x.rows() < 2 || x.cols() < 1) throw std::invalid_argument(std::string(who) + ": need at least 2 rows and 1 column");
    require_binary(y, who);
    if (!has_both_classes(y)) throw std::invalid_argument(std::string(who) + ": labels contain a single class");
    if (!x.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite feature value");
}

}  // namespace detail

/// Single Gini CART tree on the listed (possibly repeated) rows.
inline Tree fit_gini_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows, const ForestParams& params, Rng& rng) {
    params.validate();
    detail::check_classification_input(x, y, "fit_gini_tree");
    std::vector<std::uint32_t> r;
    r.reserve(rows.size());
    for (std::size_t i : rows) {
        if (i >= y.size()) throw std::invalid_argument("fit_gini_tree: row index out of range");
        r.push_back(static_cast<std::uint32_t>(i));
    }
    if (r.empty()) throw std::invalid_argument("fit_gini_tree: empty row list");
    detail::GiniTreeGrower grower(x, y, params, rng);
    return grower.grow(std::move(r));
}

struct ForestFitOptions {
    const Matrix* x_val = nullptr;
    const Labels* y_val = nullptr;
    bool record_history = true;
};

/// Mean of per-tree leaf class-1 frequencies.
inline std::vector<double> predict_forest(const Forest& f, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != f.feature_count) throw std::invalid_argument("predict_forest: column-count mismatch");
    if (f.trees.empty()) throw std::invalid_argument("predict_forest: empty forest");
    std::vector<double> p(static_cast<std::size_t>(x.rows()), 0.0);
    for (const auto& t : f.trees)
        for (Eigen::Index i = 0; i < x.rows(); ++i) p[static_cast<std::size_t>(i)] += t.predict(x, i);
    for (double& v : p) v /= static_cast<double>(f.trees.size());
    return p;
}

/// Majority vote of per-tree labels (leaf frequency > 0.5 votes 1); ties resolve to 0.
inline Labels predict_forest_labels(const Forest& f, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != f.feature_count) throw std::invalid_argument("predict_forest: column-count mismatch");
    std::vector<std::size_t> votes(static_cast<std::size_t>(x.rows()), 0);
    for (const auto& t : f.trees)
        for (Eigen::Index i = 0; i < x.rows(); ++i) votes[static_cast<std::size_t>(i)] += t.predict(x, i) > 0.5;
    Labels out(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) out[i] = 2 * votes[i] > f.trees.size() ? 1 : 0;
    return out;
}

inline Forest fit_forest(const Matrix& x, std::span<const int> y, const ForestParams& params, const ForestFitOptions& opts = {}) {
    params.validate();
    detail::check_classification_input(x, y, "fit_forest");
    const auto n = static_cast<std::size_t>(x.rows());
    Forest f;
    f.params = params;
    f.feature_count = static_cast<std::size_t>(x.cols());
    f.trees.resize(static_cast<std::size_t>(params.n_trees));
    f.tree_info.resize(f.trees.size());

    parallel_for(f.trees.size(), params.threads, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(params.seed, t);
        Rng rng(seed);
        std::vector<std::uint32_t> rows(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::uint32_t> draw(0, static_cast<std::uint32_t>(n - 1));
            for (auto& r : rows) r = draw(rng);
        } else {
            std::iota(rows.begin(), rows.end(), std::uint32_t{0});
        }
        std::vector<std::uint8_t> seen(n, 0);
        std::size_t unique = 0;
        for (auto r : rows) unique += seen[r] ? 0 : (seen[r] = 1);
        detail::GiniTreeGrower grower(x, y, params, rng);
        f.trees[t] = grower.grow(std::move(rows));
        f.tree_info[t] = {seed, unique};
    });

    if (opts.record_history) {
        const bool with_val = opts.x_val && opts.y_val;
        std::vector<double> sum(n, 0.0), prob(n);
        std::vector<double> vsum, vprob;
        if (with_val) {
            vsum.assign(static_cast<std::size_t>(opts.x_val->rows()), 0.0);
            vprob.resize(vsum.size());
        }
        for (std::size_t t = 0; t < f.trees.size(); ++t) {
            const double count = static_cast<double>(t + 1);
            for (std::size_t i = 0; i < n; ++i) {
                sum[i] += f.trees[t].predict(x, static_cast<Eigen::Index>(i));
                prob[i] = sum[i] / count;
            }
            f.history.push(log_loss(prob, y), accuracy_at_half(prob, y));
            if (with_val) {
                for (std::size_t i = 0; i < vsum.size(); ++i) {
                    vsum[i] += f.trees[t].predict(*opts.x_val, static_cast<Eigen::Index>(i));
                    vprob[i] = vsum[i] / count;
                }
                f.history.push_validation(log_loss(vprob, *opts.y_val), accuracy_at_half(vprob, *opts.y_val));
            }
        }
    }
    return f;
}

inline nlohmann::json to_json(const ForestParams& p) {
    return {{"n_trees", p.n_trees},       {"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf},
            {"max_features", p.max_features}, {"bootstrap", p.bootstrap}, {"seed", p.seed}};
}

inline nlohmann::json to_json(const Forest& f) {
    nlohmann::json trees = nlohmann::json::array();
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        auto j = to_json(f.trees[t]);
        j["seed"] = f.tree_info[t].seed;
        j["in_bag_unique"] = f.tree_info[t].in_bag_unique;
        trees.push_back(std::move(j));
    }
    return {{"format", "cdpred.forest"}, {"params", to_json(f.params)}, {"feature_count", f.feature_count}, {"trees", trees}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cdpred.forest") throw std::invalid_argument("forest_from_json: not a forest model");
    Forest f;
    const auto& p = j.at("params");
    f.params.n_trees = p.at("n_trees").get<int>();
    f.params.max_depth = p.at("max_depth").get<int>();
    f.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    f.params.max_features = p.at("max_features").get<int>();
    f.params.bootstrap = p.at("bootstrap").get<bool>();
    f.params.seed = p.at("seed").get<std::uint64_t>();
    f.feature_count = j.at("feature_count").get<std::size_t>();
    for (const auto& jt : j.at("trees")) {
        f.trees.push_back(tree_from_json(jt));
        f.tree_info.push_back({jt.value("seed", std::uint64_t{0}), jt.value("in_bag_unique", std::size_t{0})});
    }
    return f;
}

}  // namespace cdpred
