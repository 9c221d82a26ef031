#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "sfm/core.hpp"
#include "sfm/dataset.hpp"

namespace sfm {

/// Plain Euclidean kNN over the (expanded) feature space. Distance ties
/// break toward the lower training index, vote ties toward the lower class.
struct NeighborModel {
    Matrix train;
    std::vector<int> labels; // class ids
    std::size_t k = 1;

    int predict(std::span<const double> x) const {
        const std::size_t m = train.rows();
        std::vector<std::pair<double, std::size_t>> dist(m);
        for (std::size_t i = 0; i < m; ++i) dist[i] = {squared_distance(x, train.row(i)), i};
        const std::size_t kk = std::min(k, m);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        int max_label = 0;
        for (int y : labels) max_label = std::max(max_label, y);
        std::vector<std::size_t> votes(static_cast<std::size_t>(max_label) + 1, 0);
        for (std::size_t i = 0; i < kk; ++i) votes[static_cast<std::size_t>(labels[dist[i].second])]++;
        return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }

    std::string serialize() const {
        std::string out = "knn_model " + std::to_string(k) + ' ' + std::to_string(train.rows()) +
                          ' ' + std::to_string(train.cols()) + '\n';
        for (std::size_t i = 0; i < train.rows(); ++i) {
            out += std::to_string(labels[i]);
            for (double v : train.row(i)) out += ' ' + fmt_full(v);
            out += '\n';
        }
        return out;
    }

    static NeighborModel parse(std::istream& in) {
        std::string tag;
        std::size_t k, m, n;
        if (!(in >> tag >> k >> m >> n) || tag != "knn_model")
            throw std::runtime_error("not a knn_model file");
        NeighborModel model;
        model.k = k;
        std::vector<double> row(n);
        for (std::size_t i = 0; i < m; ++i) {
            int y;
            if (!(in >> y)) throw std::runtime_error("knn_model: truncated");
            for (auto& v : row)
                if (!(in >> v)) throw std::runtime_error("knn_model: truncated row");
            model.labels.push_back(y);
            model.train.push_row(row);
        }
        return model;
    }
};

/// Select k by stratified inner cross-validation over [k_min, k_max];
/// accuracy ties go to the smaller k. The model stores all training data.
inline NeighborModel train_knn(const Matrix& Z, const std::vector<int>& labels,
                               std::size_t k_min = 1, std::size_t k_max = 20,
                               std::size_t inner_folds = 5, std::uint64_t seed = 0) {
    const std::size_t m = Z.rows();
    if (k_min < 1 || k_min > k_max) throw std::invalid_argument("train_knn: empty k range");
    if (m <= inner_folds) throw std::invalid_argument("train_knn: need more samples than folds");
    k_max = std::min(k_max, m - 1);
    if (k_max < k_min) k_max = k_min;

    auto assignments = stratified_assignments(labels, inner_folds, seed);
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    const auto n_classes = static_cast<std::size_t>(max_label) + 1;

    // hits[k - k_min] accumulated over all validation points; neighbor lists
    // are sorted once per point and every k reads a prefix.
    std::vector<std::size_t> hits(k_max - k_min + 1, 0);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t f = 0; f < inner_folds; ++f) {
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t i = 0; i < m; ++i)
            (assignments[i] == f ? val_rows : train_rows).push_back(i);
        for (std::size_t v : val_rows) {
            dist.clear();
            for (std::size_t t : train_rows) dist.push_back({squared_distance(Z.row(v), Z.row(t)), t});
            std::sort(dist.begin(), dist.end());
            std::vector<std::size_t> votes(n_classes, 0);
            std::size_t taken = 0;
            for (std::size_t k = k_min; k <= k_max; ++k) {
                if (k > dist.size()) break;
                while (taken < k) {
                    votes[static_cast<std::size_t>(labels[dist[taken].second])]++;
                    ++taken;
                }
                const auto winner =
                    static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
                if (winner == labels[v]) hits[k - k_min]++;
            }
        }
    }

    std::size_t best_k = k_min;
    std::size_t best_hits = 0;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        if (hits[k - k_min] > best_hits) {
            best_hits = hits[k - k_min];
            best_k = k;
        }
    }

    NeighborModel model;
    model.train = Z;
    model.labels = labels;
    model.k = best_k;
    return model;
}

} // namespace sfm
