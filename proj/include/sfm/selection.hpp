#pragma once

#include <algorithm>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sfm/core.hpp"
#include "sfm/dataset.hpp"
#include "sfm/features.hpp"

namespace sfm {

/// Bin count for plug-in MI over a continuous feature.
inline std::size_t default_bins(std::size_t m) {
    auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
    return std::min<std::size_t>(10, std::max<std::size_t>(2, root));
}

/// Plug-in mutual information, in bits, between an equal-width-discretized
/// feature and the class variable. Constant labels make MI useless as a
/// selector; that case returns 0 with a warning.
inline double mutual_information(std::span<const double> values, std::span<const int> labels,
                                 std::size_t bins) {
    const std::size_t m = values.size();
    if (m < 2) throw std::invalid_argument("mutual_information: need at least 2 samples");
    if (labels.size() != m) throw std::invalid_argument("mutual_information: size mismatch");
    if (bins < 2) throw std::invalid_argument("mutual_information: bins must be >= 2");

    int max_label = 0;
    bool constant_labels = true;
    for (int y : labels) {
        max_label = std::max(max_label, y);
        if (y != labels[0]) constant_labels = false;
    }
    if (constant_labels) {
        std::cerr << "warning: mutual_information with constant labels; returning 0\n";
        return 0.0;
    }
    const auto n_classes = static_cast<std::size_t>(max_label) + 1;

    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return 0.0; // constant feature: a single occupied bin

    std::vector<std::size_t> joint(bins * n_classes, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < m; ++i) {
        auto b = static_cast<std::size_t>((values[i] - lo) / width);
        if (b >= bins) b = bins - 1;
        joint[b * n_classes + static_cast<std::size_t>(labels[i])]++;
    }

    std::vector<double> p_bin(bins, 0.0), p_class(n_classes, 0.0);
    for (std::size_t b = 0; b < bins; ++b)
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double p = static_cast<double>(joint[b * n_classes + c]) / static_cast<double>(m);
            p_bin[b] += p;
            p_class[c] += p;
        }
    double mi = 0.0;
    for (std::size_t b = 0; b < bins; ++b)
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double p = static_cast<double>(joint[b * n_classes + c]) / static_cast<double>(m);
            if (p > 0.0) mi += p * std::log2(p / (p_bin[b] * p_class[c]));
        }
    return std::max(mi, 0.0);
}

/// Largest empirical class fraction over the feature's active samples:
/// the given restriction set when present, else {i : f_i != 0}. An empty
/// active set yields 0 (callers record "empty neighborhood").
inline double max_posterior(std::span<const double> values, std::span<const int> labels,
                            const std::optional<std::vector<std::size_t>>& restricted_to = std::nullopt) {
    std::vector<std::size_t> active;
    if (restricted_to) {
        active = *restricted_to;
    } else {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] != 0.0) active.push_back(i);
    }
    if (active.empty()) return 0.0;
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_label) + 1, 0);
    for (std::size_t i : active) counts[static_cast<std::size_t>(labels[i])]++;
    const auto best = *std::max_element(counts.begin(), counts.end());
    return static_cast<double>(best) / static_cast<double>(active.size());
}

/// Training rows whose kernel value exceeds epsilon, i.e. squared distance
/// to the anchor below -ln(eps)/beta.
inline std::vector<std::size_t> kernel_neighborhood(const KernelFeature& def, const Dataset& train,
                                                    double epsilon) {
    if (epsilon <= 0.0 || epsilon >= 1.0)
        throw std::invalid_argument("kernel_neighborhood: epsilon must be in (0,1)");
    const double radius_sq = -std::log(epsilon) / def.beta;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (squared_distance(train.samples.row(i), def.anchor) < radius_sq) out.push_back(i);
    return out;
}

struct FeatureScore {
    FeatureKind kind = FeatureKind::original;
    double mi = 0.0;
    std::optional<double> posterior;         // windows and kernels only
    std::optional<std::size_t> neighborhood; // windows and kernels only
};

/// Score every def against the training data. Unrestricted features (X, Z)
/// get full-sample MI. Local features get their neighborhood: the active set
/// {h=1} for windows, the epsilon-ball for kernels. Window MI compares the
/// membership indicator with an in-class-vs-rest label over all samples;
/// kernel MI is the plug-in estimate of the kernel value against the class,
/// restricted to the neighborhood subsample.
inline std::vector<FeatureScore> score_features(const FeatureSpace& space, const Dataset& train,
                                                const GenParams& params) {
    const std::size_t m = train.size();
    std::vector<FeatureScore> scores;
    scores.reserve(space.size());
    std::vector<double> column(m);

    for (const auto& def : space.defs()) {
        FeatureScore s;
        s.kind = kind_of(def);
        for (std::size_t i = 0; i < m; ++i) column[i] = evaluate(def, train.samples.row(i));

        switch (s.kind) {
            case FeatureKind::original:
            case FeatureKind::projection:
                s.mi = mutual_information(column, train.labels, default_bins(m));
                break;
            case FeatureKind::window: {
                const auto& w = std::get<WindowFeature>(def);
                std::vector<std::size_t> active;
                for (std::size_t i = 0; i < m; ++i)
                    if (column[i] == 1.0) active.push_back(i);
                s.neighborhood = active.size();
                s.posterior = max_posterior(column, train.labels, active);
                std::vector<int> in_class(m);
                for (std::size_t i = 0; i < m; ++i)
                    in_class[i] = train.labels[i] == w.target_class ? 1 : 0;
                s.mi = active.empty() ? 0.0 : mutual_information(column, in_class, 2);
                break;
            }
            case FeatureKind::kernel: {
                const auto& kf = std::get<KernelFeature>(def);
                auto nbhd = kernel_neighborhood(kf, train, params.epsilon);
                s.neighborhood = nbhd.size();
                s.posterior = max_posterior(column, train.labels, nbhd);
                if (nbhd.size() >= 2) {
                    std::vector<double> sub_vals(nbhd.size());
                    std::vector<int> sub_labels(nbhd.size());
                    for (std::size_t i = 0; i < nbhd.size(); ++i) {
                        sub_vals[i] = column[nbhd[i]];
                        sub_labels[i] = train.labels[nbhd[i]];
                    }
                    s.mi = mutual_information(sub_vals, sub_labels, default_bins(nbhd.size()));
                } else {
                    s.mi = 0.0;
                }
                break;
            }
        }
        scores.push_back(s);
    }
    return scores;
}

struct SelectionRecord {
    std::size_t feature_index = 0;
    FeatureKind kind = FeatureKind::original;
    double mi = 0.0;
    std::optional<double> posterior;
    std::optional<std::size_t> neighborhood;
    bool accepted = false;
    std::string reason; // empty iff accepted
};

struct SelectionReport {
    std::vector<SelectionRecord> records;

    std::size_t accepted_count(FeatureKind k) const {
        std::size_t c = 0;
        for (const auto& r : records)
            if (r.accepted && r.kind == k) ++c;
        return c;
    }

    std::string to_csv() const {
        std::string out = "feature,kind,mi,posterior,neighborhood,accepted,reason\n";
        for (const auto& r : records) {
            out += std::to_string(r.feature_index);
            out += ',';
            out += family_tag(r.kind);
            out += ',' + fmt_full(r.mi) + ',';
            if (r.posterior) out += fmt_full(*r.posterior);
            out += ',';
            if (r.neighborhood) out += std::to_string(*r.neighborhood);
            out += ',';
            out += r.accepted ? "true" : "false";
            out += ',' + r.reason + '\n';
        }
        return out;
    }
};

struct AllFeaturesRejected : std::runtime_error {
    explicit AllFeaturesRejected(SelectionReport rep)
        : std::runtime_error("selection rejected every feature"), report(std::move(rep)) {}
    SelectionReport report;
};

namespace detail {

inline SelectionRecord judge(std::size_t index, const FeatureScore& s, const GenParams& params) {
    SelectionRecord r;
    r.feature_index = index;
    r.kind = s.kind;
    r.mi = s.mi;
    r.posterior = s.posterior;
    r.neighborhood = s.neighborhood;
    switch (s.kind) {
        case FeatureKind::original:
            r.accepted = true;
            break;
        case FeatureKind::projection:
            // Unrestricted projections cover all data; MI is the only test.
            if (s.mi > params.mi_threshold) r.accepted = true;
            else r.reason = "mutual information at or below alpha";
            break;
        case FeatureKind::window:
        case FeatureKind::kernel:
            if (*s.neighborhood == 0) r.reason = "empty neighborhood";
            else if (*s.neighborhood < params.min_cluster) r.reason = "neighborhood too small";
            else if (!(s.mi > params.mi_threshold)) r.reason = "mutual information at or below alpha";
            else if (*s.posterior < params.posterior_threshold) r.reason = "max posterior below delta";
            else r.accepted = true;
            break;
    }
    return r;
}

} // namespace detail

struct SelectionResult {
    FeatureSpace space;
    SelectionReport report;
};

/// Acceptance pass: original features pass through; projections
/// are filtered by MI alone; windows and kernels must clear the size, MI and
/// posterior thresholds. Throws AllFeaturesRejected when nothing survives.
inline SelectionResult apply_acceptance(const FeatureSpace& space, const Dataset& train,
                                        const GenParams& params) {
    if (space.empty()) throw std::invalid_argument("apply_acceptance: empty feature space");
    auto scores = score_features(space, train, params);

    SelectionResult out;
    for (std::size_t i = 0; i < space.size(); ++i) {
        auto rec = detail::judge(i, scores[i], params);
        if (rec.accepted) out.space.add(space.def(i), space.provenance(i));
        out.report.records.push_back(std::move(rec));
    }
    if (out.space.empty()) throw AllFeaturesRejected(std::move(out.report));
    return out;
}

inline const std::vector<double>& calibration_alpha_grid() {
    static const std::vector<double> grid{0.0, 0.005, 0.01, 0.05, 0.1};
    return grid;
}

inline const std::vector<double>& calibration_delta_grid() {
    static const std::vector<double> grid{0.5, 0.6, 0.7};
    return grid;
}

/// Pick the (alpha, delta) grid pair whose acceptance leaves the kernel
/// feature count closest to target_fraction * m, preferring larger alpha
/// then larger delta on ties. Pairs that keep nothing are only eligible
/// when every pair keeps nothing; an empty retention defeats the point of
/// the calibration.
inline std::pair<double, double> calibrate_retention(const FeatureSpace& space, const Dataset& train,
                                                     const GenParams& params, double target_fraction) {
    if (target_fraction <= 0.0 || target_fraction >= 1.0)
        throw std::invalid_argument("calibrate_retention: target_fraction must be in (0,1)");
    auto scores = score_features(space, train, params);
    const double target = target_fraction * static_cast<double>(train.size());

    double best_alpha = params.mi_threshold, best_delta = params.posterior_threshold;
    double best_dist = std::numeric_limits<double>::infinity();
    bool best_nonzero = false;
    for (double alpha : calibration_alpha_grid()) {
        for (double delta : calibration_delta_grid()) {
            GenParams trial = params;
            trial.mi_threshold = alpha;
            trial.posterior_threshold = delta;
            std::size_t kept = 0;
            for (std::size_t i = 0; i < scores.size(); ++i)
                if (scores[i].kind == FeatureKind::kernel && detail::judge(i, scores[i], trial).accepted)
                    ++kept;
            const bool nonzero = kept > 0;
            const double dist = std::abs(static_cast<double>(kept) - target);
            bool better;
            if (nonzero != best_nonzero) {
                better = nonzero;
            } else {
                better = dist < best_dist ||
                         (dist == best_dist &&
                          (alpha > best_alpha || (alpha == best_alpha && delta > best_delta)));
            }
            if (better) {
                best_dist = dist;
                best_alpha = alpha;
                best_delta = delta;
                best_nonzero = nonzero;
            }
        }
    }
    return {best_alpha, best_delta};
}

struct FdaScore {
    std::size_t feature = 0;
    double score = 0.0;
};

/// Fisher-style per-feature ranking: squared class-mean separation over the
/// summed class variances. Returns the `keep` best feature indices.
inline std::vector<std::size_t> fda_rank(const Dataset& train, std::size_t keep) {
    if (keep == 0) throw std::invalid_argument("fda_rank: keep must be positive");
    if (train.n_classes() != 2) throw std::invalid_argument("fda_rank: two-class datasets only");
    if (keep > train.n_features()) throw std::invalid_argument("fda_rank: keep exceeds feature count");

    const std::size_t m = train.size(), n = train.n_features();
    std::vector<FdaScore> scored(n);
    for (std::size_t j = 0; j < n; ++j) {
        double sum[2] = {0, 0}, sq[2] = {0, 0};
        std::size_t cnt[2] = {0, 0};
        for (std::size_t i = 0; i < m; ++i) {
            auto c = static_cast<std::size_t>(train.labels[i]);
            double v = train.samples.at(i, j);
            sum[c] += v;
            sq[c] += v * v;
            cnt[c]++;
        }
        double mean0 = cnt[0] ? sum[0] / cnt[0] : 0.0;
        double mean1 = cnt[1] ? sum[1] / cnt[1] : 0.0;
        double var0 = cnt[0] ? sq[0] / cnt[0] - mean0 * mean0 : 0.0;
        double var1 = cnt[1] ? sq[1] / cnt[1] - mean1 * mean1 : 0.0;
        double sep = mean0 - mean1;
        scored[j] = {j, sep * sep / (std::max(var0, 0.0) + std::max(var1, 0.0) + 1e-12)};
    }
    std::stable_sort(scored.begin(), scored.end(), [](const FdaScore& a, const FdaScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.feature < b.feature;
    });
    std::vector<std::size_t> out(keep);
    for (std::size_t i = 0; i < keep; ++i) out[i] = scored[i].feature;
    return out;
}

} // namespace sfm
