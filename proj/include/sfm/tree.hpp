#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "sfm/core.hpp"

namespace sfm {

/// Univariate decision tree driven by the separability count: each split
/// maximizes the number of differently-labeled pairs it places on opposite
/// sides. Decisions compare against the left branch's largest training
/// value, so predictions survive any strictly increasing per-feature
/// rescaling; the reported threshold is the usual gap midpoint.
struct TreeModel {
    struct Node {
        bool leaf = true;
        int label = 0;           // leaves
        std::size_t feature = 0; // internal nodes
        double left_max = 0.0;
        double right_min = 0.0;
        std::size_t left = 0; // child indices into nodes
        std::size_t right = 0;
    };

    std::vector<Node> nodes; // preorder; nodes[0] is the root
    std::size_t max_depth = 12;
    std::size_t min_leaf = 2;

    static double threshold(const Node& n) { return (n.left_max + n.right_min) / 2.0; }

    int predict(std::span<const double> x) const {
        std::size_t at = 0;
        for (;;) {
            const Node& n = nodes[at];
            if (n.leaf) return n.label;
            at = x[n.feature] <= n.left_max ? n.left : n.right;
        }
    }

    std::string serialize() const {
        std::string out = "tree_model " + std::to_string(nodes.size()) + ' ' +
                          std::to_string(max_depth) + ' ' + std::to_string(min_leaf) + '\n';
        for (const auto& n : nodes) {
            if (n.leaf) {
                out += "leaf " + std::to_string(n.label) + '\n';
            } else {
                out += "node " + std::to_string(n.feature) + ' ' + fmt_full(n.left_max) + ' ' +
                       fmt_full(n.right_min) + ' ' + std::to_string(n.left) + ' ' +
                       std::to_string(n.right) + '\n';
            }
        }
        return out;
    }

    static TreeModel parse(std::istream& in) {
        std::string tag;
        std::size_t count;
        TreeModel model;
        if (!(in >> tag >> count >> model.max_depth >> model.min_leaf) || tag != "tree_model")
            throw std::runtime_error("not a tree_model file");
        for (std::size_t i = 0; i < count; ++i) {
            Node n;
            if (!(in >> tag)) throw std::runtime_error("tree_model: truncated");
            if (tag == "leaf") {
                if (!(in >> n.label)) throw std::runtime_error("tree_model: bad leaf");
            } else if (tag == "node") {
                n.leaf = false;
                if (!(in >> n.feature >> n.left_max >> n.right_min >> n.left >> n.right))
                    throw std::runtime_error("tree_model: bad node");
            } else {
                throw std::runtime_error("tree_model: unknown node tag " + tag);
            }
            model.nodes.push_back(n);
        }
        return model;
    }
};

namespace detail {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double left_max = 0.0;
    double right_min = 0.0;
    long long pairs = -1;
};

inline int majority_label(const std::vector<int>& labels, const std::vector<std::size_t>& rows,
                          std::size_t n_classes) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i : rows) counts[static_cast<std::size_t>(labels[i])]++;
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

inline bool pure(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
    for (std::size_t i : rows)
        if (labels[i] != labels[rows[0]]) return false;
    return true;
}

inline SplitChoice best_split(const Matrix& Z, const std::vector<int>& labels,
                              const std::vector<std::size_t>& rows, std::size_t n_classes,
                              std::size_t min_leaf) {
    SplitChoice best;
    const std::size_t sz = rows.size();
    std::vector<std::pair<double, int>> vals(sz);
    std::vector<std::size_t> total(n_classes, 0), left_counts(n_classes, 0);
    for (std::size_t i : rows) total[static_cast<std::size_t>(labels[i])]++;

    for (std::size_t f = 0; f < Z.cols(); ++f) {
        for (std::size_t i = 0; i < sz; ++i) vals[i] = {Z.at(rows[i], f), labels[rows[i]]};
        std::sort(vals.begin(), vals.end());
        std::fill(left_counts.begin(), left_counts.end(), 0);
        std::size_t left_n = 0;
        for (std::size_t i = 0; i + 1 < sz; ++i) {
            left_counts[static_cast<std::size_t>(vals[i].second)]++;
            ++left_n;
            if (vals[i].first == vals[i + 1].first) continue; // need a value gap
            if (left_n < min_leaf || sz - left_n < min_leaf) continue;
            // pairs separated = |L|*|R| - sum_c L_c * R_c
            long long pairs = static_cast<long long>(left_n) * static_cast<long long>(sz - left_n);
            for (std::size_t c = 0; c < n_classes; ++c)
                pairs -= static_cast<long long>(left_counts[c]) *
                         static_cast<long long>(total[c] - left_counts[c]);
            if (pairs > best.pairs) {
                best.found = true;
                best.pairs = pairs;
                best.feature = f;
                best.left_max = vals[i].first;
                best.right_min = vals[i + 1].first;
            }
        }
    }
    if (best.found && best.pairs <= 0) best.found = false; // split separates nothing
    return best;
}

inline std::size_t grow_tree(TreeModel& model, const Matrix& Z, const std::vector<int>& labels,
                             const std::vector<std::size_t>& rows, std::size_t n_classes,
                             std::size_t depth) {
    const std::size_t at = model.nodes.size();
    model.nodes.emplace_back();
    if (pure(labels, rows) || depth >= model.max_depth || rows.size() < 2 * model.min_leaf) {
        model.nodes[at].label = majority_label(labels, rows, n_classes);
        return at;
    }
    auto split = best_split(Z, labels, rows, n_classes, model.min_leaf);
    if (!split.found) {
        model.nodes[at].label = majority_label(labels, rows, n_classes);
        return at;
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t i : rows)
        (Z.at(i, split.feature) <= split.left_max ? left_rows : right_rows).push_back(i);
    model.nodes[at].leaf = false;
    model.nodes[at].feature = split.feature;
    model.nodes[at].left_max = split.left_max;
    model.nodes[at].right_min = split.right_min;
    model.nodes[at].left = grow_tree(model, Z, labels, left_rows, n_classes, depth + 1);
    model.nodes[at].right = grow_tree(model, Z, labels, right_rows, n_classes, depth + 1);
    return at;
}

} // namespace detail

inline TreeModel train_tree(const Matrix& Z, const std::vector<int>& labels,
                            std::size_t max_depth = 12, std::size_t min_leaf = 2) {
    if (Z.rows() != labels.size()) throw std::invalid_argument("train_tree: label count mismatch");
    if (Z.rows() < 2 * min_leaf) throw std::invalid_argument("train_tree: too few samples");
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);

    TreeModel model;
    model.max_depth = max_depth;
    model.min_leaf = min_leaf;
    std::vector<std::size_t> rows(Z.rows());
    std::iota(rows.begin(), rows.end(), 0);
    detail::grow_tree(model, Z, labels, rows, static_cast<std::size_t>(max_label) + 1, 0);
    return model;
}

} // namespace sfm
