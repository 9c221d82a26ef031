#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "sfm/core.hpp"

namespace sfm {

/// Linear discriminant in the (possibly expanded) feature space:
/// sign(w.z + b). The bias is trained as an augmented constant feature.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    double C = 1.0;

    double decision(std::span<const double> z) const {
        if (z.size() != weights.size())
            throw std::invalid_argument("LinearModel::decision: dimension mismatch");
        return dot(z, weights) + bias;
    }

    std::string serialize() const {
        std::string out = "linear_model " + std::to_string(weights.size()) + '\n';
        out += "C " + fmt_full(C) + '\n';
        out += "bias " + fmt_full(bias) + '\n';
        out += "weights";
        for (double w : weights) out += ' ' + fmt_full(w);
        out += '\n';
        return out;
    }

    static LinearModel parse(std::istream& in) {
        std::string tag;
        std::size_t n;
        LinearModel m;
        if (!(in >> tag >> n) || tag != "linear_model")
            throw std::runtime_error("not a linear_model file");
        if (!(in >> tag >> m.C) || tag != "C") throw std::runtime_error("linear_model: bad C line");
        if (!(in >> tag >> m.bias) || tag != "bias") throw std::runtime_error("linear_model: bad bias line");
        if (!(in >> tag) || tag != "weights") throw std::runtime_error("linear_model: bad weights line");
        m.weights.resize(n);
        for (auto& w : m.weights)
            if (!(in >> w)) throw std::runtime_error("linear_model: truncated weights");
        return m;
    }
};

struct LinearTrainInfo {
    /// Solver objective after each epoch (0.5*||w_aug||^2 - sum alpha, the
    /// minimized dual); non-increasing across epochs.
    std::vector<double> epoch_objective;
    std::size_t epochs = 0;
    bool converged = false;
};

/// Soft-margin primal objective of the solved (bias-augmented) problem.
inline double linear_svm_objective(const Matrix& Z, const std::vector<int>& y, double C,
                                   const LinearModel& model) {
    double obj = 0.5 * (dot(model.weights, model.weights) + model.bias * model.bias);
    for (std::size_t i = 0; i < Z.rows(); ++i) {
        const double margin = y[i] * model.decision(Z.row(i));
        obj += C * std::max(0.0, 1.0 - margin);
    }
    return obj;
}

/// Dual coordinate descent for the L1-loss linear SVM (bias handled as an
/// augmented unit feature). Coordinate order is reshuffled each epoch from
/// the seed, so identical inputs reproduce the model bit for bit.
inline LinearModel train_linear_svm(const Matrix& Z, const std::vector<int>& y, double C,
                                    std::uint64_t seed = 0, LinearTrainInfo* info = nullptr,
                                    std::size_t max_epochs = 1000, double tol = 1e-8) {
    const std::size_t m = Z.rows(), n = Z.cols();
    if (m < 2) throw std::invalid_argument("train_linear_svm: need at least 2 samples");
    if (y.size() != m) throw std::invalid_argument("train_linear_svm: label count mismatch");
    bool has_pos = false, has_neg = false;
    for (int yi : y) {
        if (yi == 1) has_pos = true;
        else if (yi == -1) has_neg = true;
        else throw std::invalid_argument("train_linear_svm: labels must be +1/-1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("train_linear_svm: single-class input");
    if (C <= 0) throw std::invalid_argument("train_linear_svm: C must be positive");

    std::vector<double> alpha(m, 0.0);
    std::vector<double> w(n + 1, 0.0); // last component is the bias
    std::vector<double> qdiag(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto x = Z.row(i);
        qdiag[i] = dot(x, x) + 1.0;
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);

    if (info) {
        info->epoch_objective.clear();
        info->converged = false;
    }

    std::size_t epoch = 0;
    for (; epoch < max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_pg = 0.0;
        for (std::size_t i : order) {
            auto x = Z.row(i);
            const double yi = y[i];
            const double g = yi * (dot(x, {w.data(), n}) + w[n]) - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] >= C) pg = std::max(g, 0.0);
            max_pg = std::max(max_pg, std::abs(pg));
            if (pg == 0.0) continue;
            const double old = alpha[i];
            alpha[i] = std::clamp(old - g / qdiag[i], 0.0, C);
            const double step = (alpha[i] - old) * yi;
            if (step != 0.0) {
                for (std::size_t j = 0; j < n; ++j) w[j] += step * x[j];
                w[n] += step;
            }
        }
        if (info) {
            const double wtw = dot(w, w);
            const double asum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
            info->epoch_objective.push_back(0.5 * wtw - asum);
        }
        if (max_pg < tol) {
            ++epoch;
            if (info) info->converged = true;
            break;
        }
    }
    if (info) info->epochs = epoch;

    LinearModel model;
    model.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n));
    model.bias = w[n];
    model.C = C;
    return model;
}

struct Prediction {
    double score = 0.0;
    int label = 1; // +1 / -1; zero score maps to +1
};

template <typename ModelT>
Prediction predict_discriminant(const ModelT& model, std::span<const double> x) {
    const double s = model.decision(x);
    return {s, s >= 0.0 ? 1 : -1};
}

} // namespace sfm
