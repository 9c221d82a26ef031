#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sfm/core.hpp"
#include "sfm/dataset.hpp"

namespace sfm {

inline double gaussian_kernel(std::span<const double> a, std::span<const double> b, double beta) {
    return std::exp(-beta * squared_distance(a, b));
}

/// Dual Gaussian-kernel SVM. Keeps every training vector with its dual
/// coefficient (zeros included) so KKT checks can run against the model.
struct KernelModel {
    std::vector<double> alpha;
    std::vector<int> sv_labels; // +1 / -1
    Matrix support_vectors;
    double bias = 0.0;
    double beta = 0.0;
    double C = 1.0;

    double decision(std::span<const double> x) const {
        if (x.size() != support_vectors.cols())
            throw std::invalid_argument("KernelModel::decision: dimension mismatch");
        double s = bias;
        for (std::size_t i = 0; i < alpha.size(); ++i)
            if (alpha[i] != 0.0)
                s += alpha[i] * sv_labels[i] * gaussian_kernel(x, support_vectors.row(i), beta);
        return s;
    }

    std::string serialize() const {
        std::string out = "kernel_model " + std::to_string(alpha.size()) + ' ' +
                          std::to_string(support_vectors.cols()) + '\n';
        out += "C " + fmt_full(C) + " beta " + fmt_full(beta) + " bias " + fmt_full(bias) + '\n';
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            out += "sv " + std::to_string(sv_labels[i]) + ' ' + fmt_full(alpha[i]);
            for (double v : support_vectors.row(i)) out += ' ' + fmt_full(v);
            out += '\n';
        }
        return out;
    }

    static KernelModel parse(std::istream& in) {
        std::string tag;
        std::size_t m, n;
        KernelModel model;
        if (!(in >> tag >> m >> n) || tag != "kernel_model")
            throw std::runtime_error("not a kernel_model file");
        if (!(in >> tag >> model.C) || tag != "C") throw std::runtime_error("kernel_model: bad C");
        if (!(in >> tag >> model.beta) || tag != "beta") throw std::runtime_error("kernel_model: bad beta");
        if (!(in >> tag >> model.bias) || tag != "bias") throw std::runtime_error("kernel_model: bad bias");
        std::vector<double> row(n);
        for (std::size_t i = 0; i < m; ++i) {
            int yi;
            double a;
            if (!(in >> tag >> yi >> a) || tag != "sv") throw std::runtime_error("kernel_model: bad sv row");
            for (auto& v : row)
                if (!(in >> v)) throw std::runtime_error("kernel_model: truncated sv row");
            model.sv_labels.push_back(yi);
            model.alpha.push_back(a);
            model.support_vectors.push_row(row);
        }
        return model;
    }
};

struct SmoInfo {
    std::size_t iterations = 0;
    double final_violation = 0.0;
};

struct SmoNonConvergence : std::runtime_error {
    SmoNonConvergence(std::string msg, KernelModel iterate)
        : std::runtime_error(std::move(msg)), best(std::move(iterate)) {}
    KernelModel best;
};

/// Dual objective W(alpha) = sum(alpha) - 0.5 * sum_i alpha_i y_i u_i.
inline double smo_dual_objective(const KernelModel& model) {
    const std::size_t m = model.alpha.size();
    double obj = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (model.alpha[i] == 0.0) continue;
        double u = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (model.alpha[j] != 0.0)
                u += model.alpha[j] * model.sv_labels[j] *
                     gaussian_kernel(model.support_vectors.row(i), model.support_vectors.row(j), model.beta);
        obj += model.alpha[i] - 0.5 * model.alpha[i] * model.sv_labels[i] * u;
    }
    // The linear term of zero-alpha points contributes nothing; done.
    return obj;
}

/// Worst KKT violation over the model's training points, measured on the
/// margin: free vectors must sit on it, bound vectors on the correct side.
inline double kkt_max_residual(const KernelModel& model) {
    const std::size_t m = model.alpha.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double margin = model.sv_labels[i] * model.decision(model.support_vectors.row(i));
        double viol = 0.0;
        if (model.alpha[i] <= 0.0) viol = std::max(0.0, 1.0 - margin);
        else if (model.alpha[i] >= model.C) viol = std::max(0.0, margin - 1.0);
        else viol = std::abs(margin - 1.0);
        worst = std::max(worst, viol);
    }
    return worst;
}

/// SMO with maximal-violating-pair first choice and a second-order second
/// choice (largest guaranteed decrease). Stops when the duality-gap bound
/// m(alpha) - M(alpha) drops below tol; bounded by 10*m sweeps of m updates.
inline KernelModel train_kernel_svm(const Matrix& X, const std::vector<int>& y, double C, double beta,
                                    SmoInfo* info = nullptr, double tol = 1e-3) {
    const std::size_t m = X.rows();
    if (m < 2) throw std::invalid_argument("train_kernel_svm: need at least 2 samples");
    if (y.size() != m) throw std::invalid_argument("train_kernel_svm: label count mismatch");
    bool has_pos = false, has_neg = false;
    for (int yi : y) {
        if (yi == 1) has_pos = true;
        else if (yi == -1) has_neg = true;
        else throw std::invalid_argument("train_kernel_svm: labels must be +1/-1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("train_kernel_svm: single-class input");
    if (C <= 0 || beta <= 0) throw std::invalid_argument("train_kernel_svm: C and beta must be positive");

    Matrix K(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        K.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double v = gaussian_kernel(X.row(i), X.row(j), beta);
            K.at(i, j) = v;
            K.at(j, i) = v;
        }
    }

    std::vector<double> alpha(m, 0.0);
    std::vector<double> u(m, 0.0); // u_i = sum_j alpha_j y_j K_ij

    auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0); };
    auto in_low = [&](std::size_t t) { return (y[t] == -1 && alpha[t] < C) || (y[t] == 1 && alpha[t] > 0.0); };

    auto make_model = [&](double bias) {
        KernelModel model;
        model.alpha = alpha;
        model.sv_labels = y;
        model.support_vectors = X;
        model.bias = bias;
        model.beta = beta;
        model.C = C;
        return model;
    };

    const std::size_t max_iterations = 10 * m * m;
    std::size_t iter = 0;
    double violation = std::numeric_limits<double>::infinity();

    for (;; ++iter) {
        double up_max = -std::numeric_limits<double>::infinity();
        double low_min = std::numeric_limits<double>::infinity();
        std::size_t i = m;
        for (std::size_t t = 0; t < m; ++t) {
            const double v = y[t] - u[t];
            if (in_up(t) && v > up_max) {
                up_max = v;
                i = t;
            }
            if (in_low(t)) low_min = std::min(low_min, v);
        }
        violation = up_max - low_min;
        if (violation <= tol) {
            if (info) {
                info->iterations = iter;
                info->final_violation = violation;
            }
            return make_model((up_max + low_min) / 2.0);
        }
        if (iter >= max_iterations)
            throw SmoNonConvergence("SMO did not converge in " + std::to_string(max_iterations) +
                                        " iterations (violation " + fmt_full(violation) + ")",
                                    make_model((up_max + low_min) / 2.0));

        // Second choice: largest second-order gain among sufficiently
        // violating candidates.
        std::size_t j = m;
        double best_gain = -1.0;
        for (std::size_t t = 0; t < m; ++t) {
            if (!in_low(t)) continue;
            const double v = y[t] - u[t];
            const double diff = up_max - v;
            if (diff <= 0.0) continue;
            double a = K.at(i, i) + K.at(t, t) - 2.0 * K.at(i, t);
            if (a <= 1e-12) a = 1e-12;
            const double gain = diff * diff / a;
            if (gain > best_gain) {
                best_gain = gain;
                j = t;
            }
        }
        if (j == m)
            throw SmoNonConvergence("SMO working-set selection failed", make_model((up_max + low_min) / 2.0));

        double a = K.at(i, i) + K.at(j, j) - 2.0 * K.at(i, j);
        if (a <= 1e-12) a = 1e-12;
        const double vi = y[i] - u[i];
        const double vj = y[j] - u[j];
        double step = (vi - vj) / a; // along alpha_i += y_i t, alpha_j -= y_j t

        auto bounds = [&](double alpha_cur, int label, bool increases) {
            // Feasible t range keeping alpha_cur + (increases ? +t : -t)*label in [0, C].
            const double sgn = increases ? label : -label;
            if (sgn > 0) return std::pair<double, double>(-alpha_cur, C - alpha_cur);
            return std::pair<double, double>(alpha_cur - C, alpha_cur);
        };
        auto [ilo, ihi] = bounds(alpha[i], y[i], true);
        auto [jlo, jhi] = bounds(alpha[j], y[j], false);
        const double t_lo = std::max(ilo, jlo);
        const double t_hi = std::min(ihi, jhi);
        step = std::clamp(step, t_lo, t_hi);
        if (step == 0.0)
            throw SmoNonConvergence("SMO stalled on a zero step", make_model((up_max + low_min) / 2.0));

        alpha[i] = std::clamp(alpha[i] + y[i] * step, 0.0, C);
        alpha[j] = std::clamp(alpha[j] - y[j] * step, 0.0, C);
        for (std::size_t t = 0; t < m; ++t) u[t] += step * (K.at(i, t) - K.at(j, t));
    }
}

/// Exhaustive inner-CV grid search for (C, beta); ties prefer smaller C,
/// then smaller beta. Uses stratified folds from the given seed.
inline std::pair<double, double> tune_svm(const Matrix& X, const std::vector<int>& y,
                                          const std::vector<double>& c_grid,
                                          const std::vector<double>& beta_grid, std::size_t folds,
                                          std::uint64_t seed) {
    if (c_grid.empty() || beta_grid.empty()) throw std::invalid_argument("tune_svm: empty grid");
    const std::size_t m = X.rows();
    if (m <= folds) throw std::invalid_argument("tune_svm: need more samples than folds");

    std::vector<int> class_ids(m);
    for (std::size_t i = 0; i < m; ++i) class_ids[i] = y[i] == 1 ? 0 : 1;
    auto assignments = stratified_assignments(class_ids, folds, seed);

    auto c_sorted = c_grid;
    auto b_sorted = beta_grid;
    std::sort(c_sorted.begin(), c_sorted.end());
    std::sort(b_sorted.begin(), b_sorted.end());

    double best_c = c_sorted.front(), best_beta = b_sorted.front();
    double best_acc = -1.0;
    for (double c : c_sorted) {
        for (double beta : b_sorted) {
            double acc_sum = 0.0;
            for (std::size_t f = 0; f < folds; ++f) {
                Matrix train_x, test_x;
                std::vector<int> train_y, test_y;
                for (std::size_t i = 0; i < m; ++i) {
                    if (assignments[i] == f) {
                        test_x.push_row(X.row(i));
                        test_y.push_back(y[i]);
                    } else {
                        train_x.push_row(X.row(i));
                        train_y.push_back(y[i]);
                    }
                }
                KernelModel model;
                try {
                    model = train_kernel_svm(train_x, train_y, c, beta);
                } catch (const SmoNonConvergence& e) {
                    model = e.best; // score the grid point with the best iterate
                }
                std::size_t hits = 0;
                for (std::size_t i = 0; i < test_x.rows(); ++i)
                    if ((model.decision(test_x.row(i)) >= 0.0 ? 1 : -1) == test_y[i]) ++hits;
                acc_sum += test_x.rows() ? static_cast<double>(hits) / test_x.rows() : 0.0;
            }
            const double acc = acc_sum / static_cast<double>(folds);
            if (acc > best_acc) {
                best_acc = acc;
                best_c = c;
                best_beta = beta;
            }
        }
    }
    return {best_c, best_beta};
}

} // namespace sfm
