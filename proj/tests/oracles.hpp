#pragma once

// Independent reference computations used by the unit and acceptance suites.

#include <cdpred/eval.hpp>
#include <cdpred/neural.hpp>
#include <cdpred/trees.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using cdpred::Matrix;

struct Candidate {
    int feature;
    double threshold;
    double gain;
};

/// Every admissible split of `rows`, in (feature, threshold) ascending order, with sums recounted
/// directly from the routing rule.
inline std::vector<Candidate> enumerate_splits(const Matrix& x, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols,
                                               const std::vector<double>& grad, const std::vector<double>& hess, double lambda, double gamma,
                                               double min_child_weight) {
    std::vector<Candidate> out;
    double g = 0, h = 0;
    for (std::size_t r : rows) {
        g += grad[r];
        h += hess[r];
    }
    for (std::size_t f : cols) {
        std::set<double> values;
        for (std::size_t r : rows) values.insert(x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)));
        for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
            const double lo = *it, hi = *std::next(it);
            double thr = lo + (hi - lo) / 2.0;
            if (!(thr > lo)) thr = hi;
            double gl = 0, hl = 0;
            for (std::size_t r : rows)
                if (x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) < thr) {
                    gl += grad[r];
                    hl += hess[r];
                }
            const double gr = g - gl, hr = h - hl;
            if (hl < min_child_weight || hr < min_child_weight) continue;
            const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
            out.push_back({static_cast<int>(f), thr, gain});
        }
    }
    return out;
}

/// Rows of `rows` routed to each node of `tree`.
inline std::vector<std::vector<std::size_t>> node_rows(const cdpred::Tree& tree, const Matrix& x, const std::vector<std::size_t>& rows) {
    std::vector<std::vector<std::size_t>> out(tree.nodes.size());
    for (std::size_t r : rows) {
        int n = 0;
        for (;;) {
            out[static_cast<std::size_t>(n)].push_back(r);
            const auto& node = tree.nodes[static_cast<std::size_t>(n)];
            if (node.is_leaf()) break;
            n = x(static_cast<Eigen::Index>(r), node.feature) < node.threshold ? node.left : node.right;
        }
    }
    return out;
}

inline std::vector<int> node_depths(const cdpred::Tree& tree) {
    std::vector<int> depth(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (n.is_leaf()) continue;
        depth[static_cast<std::size_t>(n.left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(n.right)] = depth[i] + 1;
    }
    return depth;
}

/// Empty on success, otherwise a description of the first node whose split disagrees with the oracle.
inline std::string check_tree_against_oracle(const cdpred::Tree& tree, const Matrix& x, const std::vector<std::size_t>& rows,
                                             const std::vector<std::size_t>& cols, const std::vector<double>& grad,
                                             const std::vector<double>& hess, const cdpred::BoostParams& p) {
    const auto at = node_rows(tree, x, rows);
    const auto depth = node_depths(tree);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& node = tree.nodes[i];
        const auto cands = enumerate_splits(x, at[i], cols, grad, hess, p.reg_lambda, p.gamma, p.min_child_weight);
        double best = 0;
        for (const auto& c : cands) best = std::max(best, c.gain);
        const double tol = 1e-12 * (1.0 + std::abs(best));
        const bool can_split = depth[i] < p.max_depth && at[i].size() >= 2;
        if (node.is_leaf()) {
            if (can_split && best > tol)
                return "node " + std::to_string(i) + " is a leaf but a split with gain " + std::to_string(best) + " exists";
            continue;
        }
        if (!can_split) return "node " + std::to_string(i) + " split beyond the depth limit";
        const Candidate* first = nullptr;
        for (const auto& c : cands)
            if (c.gain >= best - tol) {
                first = &c;
                break;
            }
        if (!first) return "node " + std::to_string(i) + " split although no admissible candidate exists";
        if (std::abs(node.gain - best) > 1e-9 * (1.0 + std::abs(best)))
            return "node " + std::to_string(i) + " gain " + std::to_string(node.gain) + " != oracle max " + std::to_string(best);
        if (node.feature != first->feature || node.threshold != first->threshold)
            return "node " + std::to_string(i) + " chose (" + std::to_string(node.feature) + ", " + std::to_string(node.threshold) +
                   "), tie-break expects (" + std::to_string(first->feature) + ", " + std::to_string(first->threshold) + ")";
    }
    return {};
}

/// Largest |leaf.weight + soft(G, alpha) / (H + lambda)| over the leaves, sums recounted from routed rows.
inline double max_leaf_weight_error(const cdpred::Tree& tree, const Matrix& x, const std::vector<std::size_t>& rows,
                                    const std::vector<double>& grad, const std::vector<double>& hess, double lambda, double alpha) {
    const auto at = node_rows(tree, x, rows);
    double worst = 0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        if (!tree.nodes[i].is_leaf()) continue;
        double g = 0, h = 0;
        for (std::size_t r : at[i]) {
            g += grad[r];
            h += hess[r];
        }
        const double shrunk = g > alpha ? g - alpha : (g < -alpha ? g + alpha : 0.0);
        worst = std::max(worst, std::abs(tree.nodes[i].weight - (-shrunk / (h + lambda))));
    }
    return worst;
}

struct Recount {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Recount recount(const std::vector<int>& pred, const std::vector<int>& truth) {
    Recount r;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && truth[i] == 1) ++r.tp;
        if (pred[i] == 1 && truth[i] == 0) ++r.fp;
        if (pred[i] == 0 && truth[i] == 1) ++r.fn;
        if (pred[i] == 0 && truth[i] == 0) ++r.tn;
    }
    return r;
}

/// Central finite difference of the single-sample loss with respect to weight (l, i, j).
inline double finite_difference(cdpred::Network net, const cdpred::Vector& x, int y, std::size_t l, Eigen::Index i, Eigen::Index j,
                                double h = 1e-5) {
    const double w = net.layers[l].weights(i, j);
    net.layers[l].weights(i, j) = w + h;
    const double up = cdpred::loss(net, x, y);
    net.layers[l].weights(i, j) = w - h;
    const double down = cdpred::loss(net, x, y);
    return (up - down) / (2 * h);
}

}  // namespace oracle
