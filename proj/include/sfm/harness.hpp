#pragma once

#include <algorithm>
#include <chrono>
#include <future>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sfm/core.hpp"
#include "sfm/dataset.hpp"
#include "sfm/features.hpp"
#include "sfm/kernel_svm.hpp"
#include "sfm/knn.hpp"
#include "sfm/linear_svm.hpp"
#include "sfm/selection.hpp"
#include "sfm/tree.hpp"

namespace sfm {

enum class ClassifierKind { sfm_linear, svml, svmg, knn, tree };

inline std::string to_string(ClassifierKind c) {
    switch (c) {
        case ClassifierKind::sfm_linear: return "sfm";
        case ClassifierKind::svml: return "svml";
        case ClassifierKind::svmg: return "svmg";
        case ClassifierKind::knn: return "knn";
        case ClassifierKind::tree: return "tree";
    }
    return "?";
}

inline ClassifierKind parse_classifier(const std::string& s) {
    if (s == "sfm" || s == "sfm-linear") return ClassifierKind::sfm_linear;
    if (s == "svml") return ClassifierKind::svml;
    if (s == "svmg") return ClassifierKind::svmg;
    if (s == "knn") return ClassifierKind::knn;
    if (s == "tree") return ClassifierKind::tree;
    throw std::invalid_argument("unknown classifier: " + s);
}

struct ExperimentConfig {
    std::string name;
    DatasetManifest manifest;
    std::string manifest_dir;
    ClassifierKind classifier = ClassifierKind::sfm_linear;
    FamilySet families = FamilySet::parse("K");
    GenParams gen;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    std::size_t fda_keep = 0; // 0 = no FDA pre-selection
    bool calibrate = true;    // fit (alpha, delta) to the retention target when K is present
    double target_fraction = 0.3;
    double sfm_c = 1.0; // the SFM linear stage runs at a fixed C
    std::vector<double> linear_c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> svm_c_grid{0.1, 1.0, 10.0, 100.0};
    std::vector<double> svm_beta_grid{0.0078125, 0.03125, 0.125, 0.5};
    std::size_t inner_folds = 5;
    std::size_t knn_k_min = 1, knn_k_max = 20;
    std::size_t tree_max_depth = 12, tree_min_leaf = 2;
    std::size_t jobs = 1;

    std::string display_name() const {
        if (!name.empty()) return name;
        std::string s = manifest.name + "/" + to_string(classifier);
        if (classifier != ClassifierKind::svml && classifier != ClassifierKind::svmg)
            s += "(" + families.to_string() + ")";
        return s;
    }
};

struct FoldResult {
    bool failed = false;
    std::string failure_reason;
    double accuracy = 0.0;
    std::size_t test_size = 0;
    std::size_t kept_x = 0, kept_z = 0, kept_h = 0, kept_k = 0;
    double alpha_used = 0.0, delta_used = 0.0;
    double chosen_c = 0.0, chosen_beta = 0.0;
    std::size_t chosen_k = 0;
    std::size_t chosen_depth = 0;
    std::uint64_t model_hash = 0;
    // linear classifiers also carry their artifacts for inspect-model
    std::string model_text;
    std::string space_text;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<FoldResult> folds;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation, (k-1) denominator
    double wall_seconds = 0.0;

    std::string folds_csv() const {
        std::string out = "dataset,classifier,families,fold,accuracy\n";
        for (std::size_t f = 0; f < folds.size(); ++f) {
            out += config.manifest.name + ',' + to_string(config.classifier) + ',' +
                   config.families.to_string() + ',' + std::to_string(f) + ',';
            out += folds[f].failed ? ("failed:" + folds[f].failure_reason) : fmt_full(folds[f].accuracy);
            out += '\n';
        }
        return out;
    }

    std::string summary_csv() const {
        std::string out = "dataset,classifier,families,folds,mean,std,kept_x,kept_z,kept_h,kept_k\n";
        double kx = 0, kz = 0, kh = 0, kk = 0;
        for (const auto& f : folds) {
            kx += static_cast<double>(f.kept_x);
            kz += static_cast<double>(f.kept_z);
            kh += static_cast<double>(f.kept_h);
            kk += static_cast<double>(f.kept_k);
        }
        const double nf = folds.empty() ? 1.0 : static_cast<double>(folds.size());
        out += config.manifest.name + ',' + to_string(config.classifier) + ',' +
               config.families.to_string() + ',' + std::to_string(folds.size()) + ',' +
               fmt_full(mean) + ',' + fmt_full(stddev) + ',' + fmt_full(kx / nf) + ',' +
               fmt_full(kz / nf) + ',' + fmt_full(kh / nf) + ',' + fmt_full(kk / nf) + '\n';
        return out;
    }
};

struct ExperimentFailure : std::runtime_error {
    ExperimentFailure(std::string msg, ExperimentResult partial)
        : std::runtime_error(std::move(msg)), result(std::move(partial)) {}
    ExperimentResult result;
};

namespace detail {

inline std::vector<int> to_pm1(const std::vector<int>& class_ids) {
    std::vector<int> out(class_ids.size());
    for (std::size_t i = 0; i < class_ids.size(); ++i) out[i] = class_ids[i] == 0 ? 1 : -1;
    return out;
}

/// Inner-CV selection of the linear SVM C; ties prefer the smaller C.
inline double tune_linear_c(const Matrix& Z, const std::vector<int>& y_pm1,
                            const std::vector<double>& grid, std::size_t folds, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("tune_linear_c: empty grid");
    if (grid.size() == 1) return grid.front();
    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = Z.rows();
    std::vector<int> class_ids(m);
    for (std::size_t i = 0; i < m; ++i) class_ids[i] = y_pm1[i] == 1 ? 0 : 1;
    auto assignments = stratified_assignments(class_ids, folds, seed);

    double best_c = sorted.front();
    double best_acc = -1.0;
    for (double c : sorted) {
        double acc_sum = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            Matrix train_x, test_x;
            std::vector<int> train_y, test_y;
            for (std::size_t i = 0; i < m; ++i) {
                if (assignments[i] == f) {
                    test_x.push_row(Z.row(i));
                    test_y.push_back(y_pm1[i]);
                } else {
                    train_x.push_row(Z.row(i));
                    train_y.push_back(y_pm1[i]);
                }
            }
            bool pos = false, neg = false;
            for (int yy : train_y) (yy == 1 ? pos : neg) = true;
            if (!pos || !neg) continue;
            auto model = train_linear_svm(train_x, train_y, c, derive_seed(seed, f + 11));
            std::size_t hits = 0;
            for (std::size_t i = 0; i < test_x.rows(); ++i)
                if ((model.decision(test_x.row(i)) >= 0.0 ? 1 : -1) == test_y[i]) ++hits;
            acc_sum += test_x.rows() ? static_cast<double>(hits) / test_x.rows() : 0.0;
        }
        const double acc = acc_sum / static_cast<double>(folds);
        if (acc > best_acc) {
            best_acc = acc;
            best_c = c;
        }
    }
    return best_c;
}

struct ExpandedFold {
    Matrix train;
    Matrix test;
    FeatureSpace space;
    SelectionReport report;
    double alpha = 0.0, delta = 0.0;
};

/// Depth selection by inner CV, consistent with tuning
/// every classifier parameter on the training partition. This stands in for
/// the SSV tree's pruning: ties go to the shallower tree.
inline std::size_t tune_tree_depth(const Matrix& Z, const std::vector<int>& labels,
                                   std::size_t max_depth, std::size_t min_leaf, std::size_t folds,
                                   std::uint64_t seed) {
    auto assignments = stratified_assignments(labels, folds, seed);
    const std::size_t m = Z.rows();
    std::size_t best_depth = 0, best_hits = 0;
    for (std::size_t depth = 0; depth <= max_depth; ++depth) {
        std::size_t hits = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            Matrix train_x;
            std::vector<int> train_y;
            std::vector<std::size_t> val_rows;
            for (std::size_t i = 0; i < m; ++i) {
                if (assignments[i] == f) {
                    val_rows.push_back(i);
                } else {
                    train_x.push_row(Z.row(i));
                    train_y.push_back(labels[i]);
                }
            }
            if (train_x.rows() < 2 * min_leaf) continue;
            auto tree = train_tree(train_x, train_y, depth, min_leaf);
            for (std::size_t i : val_rows)
                if (tree.predict(Z.row(i)) == labels[i]) ++hits;
        }
        if (hits > best_hits) {
            best_hits = hits;
            best_depth = depth;
        }
    }
    return best_depth;
}

/// Generate, calibrate and select features strictly from the training side,
/// then map both partitions into the accepted space.
inline ExpandedFold expand_fold(const Dataset& train, const Dataset& test,
                                const ExperimentConfig& config, std::uint64_t fold_seed) {
    GenParams params = config.gen;
    params.seed = derive_seed(fold_seed, 2);
    auto space = build_feature_space(train, params, config.families);
    if (space.empty()) throw AllFeaturesRejected(SelectionReport{}); // e.g. H with no pure clusters
    if (config.families.k && config.calibrate) {
        auto [alpha, delta] = calibrate_retention(space, train, params, config.target_fraction);
        params.mi_threshold = alpha;
        params.posterior_threshold = delta;
    }
    auto selected = apply_acceptance(space, train, params);
    ExpandedFold out;
    out.space = std::move(selected.space);
    out.report = std::move(selected.report);
    out.alpha = params.mi_threshold;
    out.delta = params.posterior_threshold;
    out.train = out.space.transform(train.samples);
    out.test = out.space.transform(test.samples);
    return out;
}

} // namespace detail

/// One fold of the protocol: impute and standardize with training statistics,
/// optionally FDA-trim, expand and select features on the training side only,
/// fit the configured classifier, and score the mapped test partition.
inline FoldResult run_fold(const ExperimentConfig& config, const Dataset& train_raw,
                           const Dataset& test_raw, std::size_t fold_index = 0) {
    const std::uint64_t fold_seed = derive_seed(config.seed, fold_index + 1);
    FoldResult result;
    result.test_size = test_raw.size();

    // Imputation statistics come from the training partition. Test rows are
    // filled with training feature means so their labels stay out of the
    // feature pipeline.
    Dataset train = train_raw.has_missing() ? impute_class_mean(train_raw) : train_raw;
    Dataset test = test_raw;
    if (test.has_missing()) test = impute_with_means(test, feature_means(train));

    auto std_result = standardize(train, test);
    train = std::move(std_result.train);
    test = std::move(std_result.applied);

    if (config.fda_keep > 0) {
        auto keep = fda_rank(train, std::min<std::size_t>(config.fda_keep, train.n_features()));
        train = select_columns(train, keep);
        test = select_columns(test, keep);
    }

    const auto y_train = detail::to_pm1(train.labels);
    const auto y_test = detail::to_pm1(test.labels);

    auto score_pm1 = [&](auto&& decide) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < test.size(); ++i)
            if (decide(test.samples.row(i)) == y_test[i]) ++hits;
        return test.size() ? static_cast<double>(hits) / test.size() : 0.0;
    };

    switch (config.classifier) {
        case ClassifierKind::svml: {
            const double c = detail::tune_linear_c(train.samples, y_train, config.linear_c_grid,
                                                   config.inner_folds, derive_seed(fold_seed, 3));
            auto model = train_linear_svm(train.samples, y_train, c, derive_seed(fold_seed, 4));
            result.chosen_c = c;
            result.model_text = model.serialize();
            FeatureSpace identity;
            for (std::size_t j = 0; j < train.n_features(); ++j)
                identity.add(OriginalFeature{j}, {'X', j});
            result.space_text = identity.serialize_all();
            result.model_hash = fnv1a(result.model_text);
            result.accuracy = score_pm1([&](auto x) { return model.decision(x) >= 0.0 ? 1 : -1; });
            result.kept_x = train.n_features();
            break;
        }
        case ClassifierKind::svmg: {
            auto [c, beta] = tune_svm(train.samples, y_train, config.svm_c_grid, config.svm_beta_grid,
                                      config.inner_folds, derive_seed(fold_seed, 3));
            KernelModel model;
            try {
                model = train_kernel_svm(train.samples, y_train, c, beta);
            } catch (const SmoNonConvergence& e) {
                std::cerr << "warning: " << e.what() << "; scoring the best iterate\n";
                model = e.best;
            }
            result.chosen_c = c;
            result.chosen_beta = beta;
            result.model_hash = fnv1a(model.serialize());
            result.accuracy = score_pm1([&](auto x) { return model.decision(x) >= 0.0 ? 1 : -1; });
            result.kept_x = train.n_features();
            break;
        }
        case ClassifierKind::sfm_linear:
        case ClassifierKind::knn:
        case ClassifierKind::tree: {
            detail::ExpandedFold expanded;
            try {
                expanded = detail::expand_fold(train, test, config, fold_seed);
            } catch (const AllFeaturesRejected&) {
                result.failed = true;
                result.failure_reason = "selection rejected every feature";
                return result;
            }
            result.alpha_used = expanded.alpha;
            result.delta_used = expanded.delta;
            result.kept_x = expanded.space.count(FeatureKind::original);
            result.kept_z = expanded.space.count(FeatureKind::projection);
            result.kept_h = expanded.space.count(FeatureKind::window);
            result.kept_k = expanded.space.count(FeatureKind::kernel);

            if (config.classifier == ClassifierKind::sfm_linear) {
                auto model = train_linear_svm(expanded.train, y_train, config.sfm_c,
                                              derive_seed(fold_seed, 4));
                result.chosen_c = config.sfm_c;
                result.model_text = model.serialize();
                result.space_text = expanded.space.serialize_all();
                result.model_hash = fnv1a(result.model_text + result.space_text);
                std::size_t hits = 0;
                for (std::size_t i = 0; i < expanded.test.rows(); ++i)
                    if ((model.decision(expanded.test.row(i)) >= 0.0 ? 1 : -1) == y_test[i]) ++hits;
                result.accuracy = test.size() ? static_cast<double>(hits) / test.size() : 0.0;
            } else if (config.classifier == ClassifierKind::knn) {
                auto model = train_knn(expanded.train, train.labels, config.knn_k_min, config.knn_k_max,
                                       config.inner_folds, derive_seed(fold_seed, 3));
                result.chosen_k = model.k;
                result.model_hash = fnv1a(model.serialize() + expanded.space.serialize_all());
                std::size_t hits = 0;
                for (std::size_t i = 0; i < expanded.test.rows(); ++i)
                    if (model.predict(expanded.test.row(i)) == test.labels[i]) ++hits;
                result.accuracy = test.size() ? static_cast<double>(hits) / test.size() : 0.0;
            } else {
                const std::size_t depth =
                    detail::tune_tree_depth(expanded.train, train.labels, config.tree_max_depth,
                                            config.tree_min_leaf, config.inner_folds,
                                            derive_seed(fold_seed, 3));
                auto model = train_tree(expanded.train, train.labels, depth, config.tree_min_leaf);
                result.chosen_depth = depth;
                result.model_hash = fnv1a(model.serialize() + expanded.space.serialize_all());
                std::size_t hits = 0;
                for (std::size_t i = 0; i < expanded.test.rows(); ++i)
                    if (model.predict(expanded.test.row(i)) == test.labels[i]) ++hits;
                result.accuracy = test.size() ? static_cast<double>(hits) / test.size() : 0.0;
            }
            break;
        }
    }
    return result;
}

/// Full stratified cross-validation run. Completes every fold, then raises
/// ExperimentFailure listing any failed folds.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& ds) {
    const auto t0 = std::chrono::steady_clock::now();
    auto plan = make_folds(ds, config.folds, config.seed);

    ExperimentResult result;
    result.config = config;
    result.folds.resize(config.folds);

    auto run_one = [&](std::size_t f) {
        auto split = fold_split(ds, plan, f);
        return run_fold(config, split.train, split.test, f);
    };

    if (config.jobs <= 1) {
        for (std::size_t f = 0; f < config.folds; ++f) result.folds[f] = run_one(f);
    } else {
        // Waves of `jobs` folds; results land in fold order regardless of
        // completion order.
        std::size_t next = 0;
        while (next < config.folds) {
            const std::size_t end = std::min(config.folds, next + config.jobs);
            std::vector<std::future<FoldResult>> wave;
            for (std::size_t f = next; f < end; ++f)
                wave.push_back(std::async(std::launch::async, run_one, f));
            for (std::size_t f = next; f < end; ++f) result.folds[f] = wave[f - next].get();
            next = end;
        }
    }

    std::string failures;
    double sum = 0.0;
    for (std::size_t f = 0; f < config.folds; ++f) {
        if (result.folds[f].failed)
            failures += " fold " + std::to_string(f) + ": " + result.folds[f].failure_reason + ";";
        sum += result.folds[f].accuracy;
    }
    result.mean = sum / static_cast<double>(config.folds);
    double ss = 0.0;
    for (const auto& f : result.folds) ss += (f.accuracy - result.mean) * (f.accuracy - result.mean);
    result.stddev = config.folds > 1 ? std::sqrt(ss / static_cast<double>(config.folds - 1)) : 0.0;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!failures.empty())
        throw ExperimentFailure("experiment " + config.display_name() + " had failed folds:" + failures,
                                result);
    return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    return run_experiment(config, load_dataset(config.manifest, config.manifest_dir));
}

struct TableCell {
    bool ok = false;
    std::string error;
    ExperimentResult result;
};

struct TableResult {
    std::vector<std::string> dataset_names;
    std::vector<std::string> space_names;
    std::vector<std::vector<TableCell>> cells; // [dataset][space]
    bool complete = true;

    std::string to_csv() const {
        std::string out = "dataset";
        for (const auto& s : space_names) out += ',' + s;
        out += '\n';
        for (std::size_t d = 0; d < dataset_names.size(); ++d) {
            out += dataset_names[d];
            for (std::size_t s = 0; s < space_names.size(); ++s) {
                const auto& c = cells[d][s];
                out += ',';
                if (c.ok)
                    out += fmt_full(100.0 * c.result.mean) + "±" + fmt_full(100.0 * c.result.stddev);
                else
                    out += "n/a";
            }
            out += '\n';
        }
        return out;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "dataset";
        for (const auto& s : space_names) os << '\t' << s;
        os << '\n';
        for (std::size_t d = 0; d < dataset_names.size(); ++d) {
            os << dataset_names[d];
            for (std::size_t s = 0; s < space_names.size(); ++s) {
                const auto& c = cells[d][s];
                os << '\t';
                if (c.ok) {
                    os.precision(1);
                    os << std::fixed << 100.0 * c.result.mean << "±" << 100.0 * c.result.stddev;
                    os.unsetf(std::ios::fixed);
                    os.precision(6);
                } else {
                    os << "n/a";
                }
            }
            os << '\n';
        }
        return os.str();
    }
};

/// Grid of experiments: rows are datasets, columns are feature-space
/// combinations. A dataset whose file is missing or whose run fails marks
/// the table partial instead of aborting it.
inline TableResult run_table(const std::vector<ExperimentConfig>& base_per_dataset,
                             const std::vector<FamilySet>& spaces) {
    if (base_per_dataset.empty()) throw std::invalid_argument("run_table: no datasets");
    if (spaces.empty()) throw std::invalid_argument("run_table: no feature spaces");
    TableResult table;
    for (const auto& s : spaces) table.space_names.push_back(s.to_string());
    for (const auto& base : base_per_dataset) {
        table.dataset_names.push_back(base.manifest.name);
        std::vector<TableCell> row;
        std::optional<Dataset> ds;
        try {
            ds = load_dataset(base.manifest, base.manifest_dir);
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << base.manifest.name << ": " << e.what() << '\n';
            table.complete = false;
            row.resize(spaces.size());
            for (auto& c : row) c.error = e.what();
            table.cells.push_back(std::move(row));
            continue;
        }
        for (const auto& s : spaces) {
            ExperimentConfig cfg = base;
            cfg.families = s;
            TableCell cell;
            try {
                cell.result = run_experiment(cfg, *ds);
                cell.ok = true;
            } catch (const ExperimentFailure& e) {
                cell.error = e.what();
                table.complete = false;
            }
            row.push_back(std::move(cell));
        }
        table.cells.push_back(std::move(row));
    }
    return table;
}

/// The seeded synthetic used for the selection sweeps: two overlapping unit
/// Gaussians, 100 points per class, means (-1,0) and (+1,0).
inline Dataset two_gaussians(std::uint64_t seed, std::size_t per_class = 100) {
    Dataset ds;
    ds.feature_names = {"x0", "x1"};
    ds.class_names = {"left", "right"};
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t c = 0; c < 2; ++c) {
        const double mean_x = c == 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < per_class; ++i) {
            const double coords[2] = {mean_x + gauss(rng), gauss(rng)};
            ds.samples.push_row(coords);
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

struct SweepRow {
    double alpha = 0.0;
    double delta = 0.0;
    std::size_t anchor_row = 0;
    std::vector<double> anchor; // raw coordinates
    int class_id = 0;
    bool accepted = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t n_features = 0;

    std::size_t accepted_count(double alpha, double delta) const {
        std::size_t c = 0;
        for (const auto& r : rows)
            if (r.alpha == alpha && r.delta == delta && r.accepted) ++c;
        return c;
    }

    std::string to_csv() const {
        std::string out = "alpha,delta";
        for (std::size_t j = 0; j < n_features; ++j) out += ",anchor_" + std::to_string(j);
        out += ",class,accepted\n";
        for (const auto& r : rows) {
            out += fmt_full(r.alpha) + ',' + fmt_full(r.delta);
            for (double v : r.anchor) out += ',' + fmt_full(v);
            out += ',' + std::to_string(r.class_id) + ',' + (r.accepted ? std::string("true") : std::string("false"));
            out += '\n';
        }
        return out;
    }
};

/// Kernel-anchor acceptance across an (alpha, delta) grid; anchors are
/// reported in raw coordinates for plotting.
inline SweepResult sweep_selection(const Dataset& ds, const std::vector<double>& alphas,
                                   const std::vector<double>& deltas, const GenParams& params) {
    if (alphas.empty() || deltas.empty())
        throw std::invalid_argument("sweep_selection: empty value lists");
    auto std_result = standardize(ds, ds);
    const Dataset& train = std_result.train;
    auto space = build_feature_space(train, params, FamilySet::parse("K"));
    auto scores = score_features(space, train, params);

    SweepResult out;
    out.n_features = ds.n_features();
    for (double alpha : alphas) {
        for (double delta : deltas) {
            GenParams trial = params;
            trial.mi_threshold = alpha;
            trial.posterior_threshold = delta;
            for (std::size_t i = 0; i < space.size(); ++i) {
                if (scores[i].kind != FeatureKind::kernel) continue;
                SweepRow row;
                row.alpha = alpha;
                row.delta = delta;
                row.anchor_row = space.provenance(i).index;
                auto raw = ds.samples.row(row.anchor_row);
                row.anchor.assign(raw.begin(), raw.end());
                row.class_id = ds.labels[row.anchor_row];
                row.accepted = detail::judge(i, scores[i], trial).accepted;
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

/// Leakage audit: permuting test labels must leave the trained model's
/// fingerprint untouched (only the reported accuracy may move).
inline bool leakage_audit(const ExperimentConfig& config, const Dataset& ds) {
    auto plan = make_folds(ds, config.folds, config.seed);
    auto split = fold_split(ds, plan, 0);
    auto baseline = run_fold(config, split.train, split.test, 0);

    Dataset permuted = split.test;
    Rng rng(derive_seed(config.seed, 0xAD17));
    std::shuffle(permuted.labels.begin(), permuted.labels.end(), rng);
    auto shuffled = run_fold(config, split.train, permuted, 0);
    return baseline.model_hash == shuffled.model_hash && !baseline.failed && !shuffled.failed;
}

/// Determinism audit: identical seeds must reproduce byte-identical CSVs.
inline bool determinism_audit(const ExperimentConfig& config, const Dataset& ds) {
    auto a = run_experiment(config, ds);
    auto b = run_experiment(config, ds);
    return a.folds_csv() == b.folds_csv() && a.summary_csv() == b.summary_csv();
}

} // namespace sfm
