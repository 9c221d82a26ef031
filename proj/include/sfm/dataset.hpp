#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sfm/core.hpp"

namespace sfm {

/// Dense numeric samples with class labels. Missing cells are NaN until
/// imputation; everything downstream requires finite values.
struct Dataset {
    Matrix samples;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    std::size_t size() const { return samples.rows(); }
    std::size_t n_features() const { return samples.cols(); }
    std::size_t n_classes() const { return class_names.size(); }

    bool has_missing() const {
        for (double v : samples.data())
            if (!std::isfinite(v)) return true;
        return false;
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(n_classes(), 0);
        for (int y : labels) counts[static_cast<std::size_t>(y)]++;
        return counts;
    }
};

struct DatasetManifest {
    std::string name;
    std::string path;
    int class_column = -1; // -1 = last column
    bool has_header = false;
    std::string missing_marker = "?";
    std::string paper_reference; // optional "mean±std (table cell)" annotation
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_bool(const std::string& v) {
    return v == "1" || v == "true" || v == "yes" || v == "on";
}

} // namespace detail

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest not readable: " + path);
    DatasetManifest m;
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("manifest line missing '=': " + line);
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key == "name") m.name = val;
        else if (key == "path") m.path = val;
        else if (key == "class_column") m.class_column = std::stoi(val);
        else if (key == "has_header") m.has_header = detail::parse_bool(val);
        else if (key == "missing_marker") m.missing_marker = val;
        else if (key == "paper_reference") m.paper_reference = val;
        else throw std::runtime_error("manifest: unknown key '" + key + "'");
    }
    if (m.path.empty()) throw std::runtime_error("manifest has no path: " + path);
    if (m.name.empty()) m.name = std::filesystem::path(path).stem().string();
    return m;
}

/// Comma-separated file, one categorical class column, missing marker cells
/// become NaN. Labels are mapped to dense ids in first-seen order.
inline Dataset load_csv(const std::string& path, const DatasetManifest& manifest) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset not readable: " + path);

    Dataset ds;
    std::map<std::string, int> class_ids;
    std::vector<std::string> header;
    std::size_t n_cols = 0;
    std::size_t line_no = 0;
    std::size_t data_rows = 0;
    std::string line;

    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        auto cells = detail::split(line, ',');
        if (n_cols == 0) {
            n_cols = cells.size();
            if (n_cols < 2)
                throw std::runtime_error(path + ": need at least one feature and a class column");
        } else if (cells.size() != n_cols) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     " has " + std::to_string(cells.size()) +
                                     " columns, expected " + std::to_string(n_cols));
        }
        if (manifest.has_header && header.empty() && data_rows == 0) {
            header = cells;
            continue;
        }
        ++data_rows;

        const std::size_t class_col = manifest.class_column < 0
            ? n_cols - 1
            : static_cast<std::size_t>(manifest.class_column);
        if (class_col >= n_cols)
            throw std::runtime_error(path + ": class column out of range");

        std::vector<double> row;
        row.reserve(n_cols - 1);
        for (std::size_t c = 0; c < n_cols; ++c) {
            std::string cell = detail::trim(cells[c]);
            if (c == class_col) {
                auto [it, inserted] = class_ids.try_emplace(cell, static_cast<int>(ds.class_names.size()));
                if (inserted) ds.class_names.push_back(cell);
                ds.labels.push_back(it->second);
                continue;
            }
            if (cell == manifest.missing_marker || cell.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": non-numeric value '" + cell + "'");
            }
        }
        ds.samples.push_row(row);
    }
    if (data_rows == 0) throw std::runtime_error(path + ": no data rows");

    const std::size_t class_col = manifest.class_column < 0
        ? n_cols - 1
        : static_cast<std::size_t>(manifest.class_column);
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (c == class_col) continue;
        if (!header.empty()) ds.feature_names.push_back(detail::trim(header[c]));
        else ds.feature_names.push_back("f" + std::to_string(ds.feature_names.size()));
    }
    return ds;
}

/// Resolve manifest path relative to the manifest's directory, then
/// SFM_DATA_DIR, then as given.
inline Dataset load_dataset(const DatasetManifest& manifest, const std::string& manifest_dir = "") {
    namespace fs = std::filesystem;
    fs::path p(manifest.path);
    std::vector<fs::path> candidates;
    if (p.is_absolute()) {
        candidates.push_back(p);
    } else {
        if (!manifest_dir.empty()) candidates.push_back(fs::path(manifest_dir) / p);
        if (const char* env = std::getenv("SFM_DATA_DIR")) candidates.push_back(fs::path(env) / p);
        candidates.push_back(p);
    }
    for (const auto& c : candidates)
        if (fs::exists(c)) return load_csv(c.string(), manifest);
    throw std::runtime_error("dataset file not found: " + manifest.path +
                             " (searched manifest dir, SFM_DATA_DIR, cwd)");
}

/// Replace each missing cell by the mean of the non-missing values of the
/// same feature within the same class.
inline Dataset impute_class_mean(const Dataset& input) {
    Dataset ds = input;
    const std::size_t m = ds.size(), n = ds.n_features(), k = ds.n_classes();
    // sums[class][feature]
    std::vector<std::vector<double>> sums(k, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < m; ++i) {
        auto c = static_cast<std::size_t>(ds.labels[i]);
        for (std::size_t j = 0; j < n; ++j) {
            double v = ds.samples.at(i, j);
            if (std::isfinite(v)) {
                sums[c][j] += v;
                counts[c][j]++;
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        auto c = static_cast<std::size_t>(ds.labels[i]);
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isfinite(ds.samples.at(i, j))) continue;
            if (counts[c][j] == 0)
                throw std::runtime_error("impute_class_mean: feature '" +
                                         ds.feature_names[j] + "' has no observed values in class '" +
                                         ds.class_names[c] + "'");
            ds.samples.at(i, j) = sums[c][j] / static_cast<double>(counts[c][j]);
        }
    }
    return ds;
}

/// Per-feature means over non-missing entries; used to fill test rows
/// without touching their labels.
inline std::vector<double> feature_means(const Dataset& ds) {
    const std::size_t m = ds.size(), n = ds.n_features();
    std::vector<double> sums(n, 0.0);
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double v = ds.samples.at(i, j);
            if (std::isfinite(v)) {
                sums[j] += v;
                counts[j]++;
            }
        }
    for (std::size_t j = 0; j < n; ++j)
        sums[j] = counts[j] ? sums[j] / static_cast<double>(counts[j]) : 0.0;
    return sums;
}

inline Dataset impute_with_means(const Dataset& input, const std::vector<double>& means) {
    Dataset ds = input;
    if (means.size() != ds.n_features())
        throw std::invalid_argument("impute_with_means: dimension mismatch");
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.n_features(); ++j)
            if (!std::isfinite(ds.samples.at(i, j))) ds.samples.at(i, j) = means[j];
    return ds;
}

/// Training-fold standardization statistics. Constant features keep scale 1
/// and map to 0.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> scale;

    std::vector<double> transform(std::span<const double> x) const {
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
        return out;
    }

    Dataset transform(const Dataset& ds) const {
        Dataset out = ds;
        for (std::size_t i = 0; i < out.size(); ++i)
            for (std::size_t j = 0; j < out.n_features(); ++j)
                out.samples.at(i, j) = (out.samples.at(i, j) - mean[j]) / scale[j];
        return out;
    }

    std::vector<double> inverse(std::span<const double> z) const {
        std::vector<double> out(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * scale[j] + mean[j];
        return out;
    }
};

inline Scaler fit_scaler(const Dataset& train) {
    if (train.size() < 2) throw std::invalid_argument("fit_scaler: need at least 2 rows");
    const std::size_t m = train.size(), n = train.n_features();
    Scaler s;
    s.mean.assign(n, 0.0);
    s.scale.assign(n, 1.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) s.mean[j] += train.samples.at(i, j);
    for (std::size_t j = 0; j < n; ++j) s.mean[j] /= static_cast<double>(m);
    for (std::size_t j = 0; j < n; ++j) {
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double d = train.samples.at(i, j) - s.mean[j];
            var += d * d;
        }
        var /= static_cast<double>(m);
        s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

struct StandardizeResult {
    Dataset train;
    Dataset applied;
    Scaler scaler;
};

inline StandardizeResult standardize(const Dataset& train, const Dataset& apply_to) {
    Scaler s = fit_scaler(train);
    return {s.transform(train), s.transform(apply_to), s};
}

/// All 2^bits binary vectors labeled by the parity of their popcount.
inline Dataset generate_parity(int bits) {
    if (bits < 2 || bits > 20) throw std::invalid_argument("generate_parity: bits must be in [2, 20]");
    Dataset ds;
    ds.class_names = {"even", "odd"};
    for (int j = 0; j < bits; ++j) ds.feature_names.push_back("b" + std::to_string(j));
    const std::uint32_t total = 1u << bits;
    std::vector<double> row(static_cast<std::size_t>(bits));
    for (std::uint32_t v = 0; v < total; ++v) {
        int ones = 0;
        for (int j = 0; j < bits; ++j) {
            int bit = (v >> j) & 1u;
            row[static_cast<std::size_t>(j)] = bit;
            ones += bit;
        }
        ds.samples.push_row(row);
        ds.labels.push_back(ones % 2);
    }
    return ds;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.n_features(); ++j)
            out << fmt_full(ds.samples.at(i, j)) << ',';
        out << ds.class_names[static_cast<std::size_t>(ds.labels[i])] << '\n';
    }
}

/// Stratified fold assignment: per-class counts across folds differ by at
/// most one; deterministic for a given (dataset, k, seed).
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;
    std::uint64_t seed = 0;
};

/// Per-class shuffled round-robin fold ids; per-class counts across folds
/// differ by at most one.
inline std::vector<std::size_t> stratified_assignments(const std::vector<int>& labels, std::size_t k,
                                                       std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_assignments: k must be >= 2");
    if (k > labels.size()) throw std::invalid_argument("stratified_assignments: k exceeds sample count");
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    std::vector<std::size_t> assignments(labels.size(), 0);
    Rng rng(seed);
    std::size_t start = 0; // rotates so small classes spread over different folds
    for (int c = 0; c <= max_label; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i)
            assignments[members[i]] = (start + i) % k;
        start = (start + members.size()) % k;
    }
    return assignments;
}

inline FoldPlan make_folds(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    for (std::size_t c = 0; c < ds.n_classes(); ++c) {
        std::size_t count = 0;
        for (int y : ds.labels)
            if (y == static_cast<int>(c)) ++count;
        if (count < k)
            std::cerr << "warning: class '" << ds.class_names[c] << "' has " << count
                      << " members, fewer than " << k << " folds\n";
    }
    return FoldPlan{k, stratified_assignments(ds.labels, k, seed), seed};
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_names = ds.feature_names;
    out.class_names = ds.class_names;
    for (std::size_t i : rows) {
        out.samples.push_row(ds.samples.row(i));
        out.labels.push_back(ds.labels[i]);
    }
    return out;
}

struct FoldSplit {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

inline FoldSplit fold_split(const Dataset& ds, const FoldPlan& plan, std::size_t fold) {
    FoldSplit s;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (plan.assignments[i] == fold ? s.test_rows : s.train_rows).push_back(i);
    s.train = subset(ds, s.train_rows);
    s.test = subset(ds, s.test_rows);
    return s;
}

/// Keep only the listed feature columns, in the listed order.
inline Dataset select_columns(const Dataset& ds, const std::vector<std::size_t>& cols) {
    Dataset out;
    out.class_names = ds.class_names;
    out.labels = ds.labels;
    for (std::size_t c : cols) out.feature_names.push_back(ds.feature_names[c]);
    std::vector<double> row(cols.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) row[j] = ds.samples.at(i, cols[j]);
        out.samples.push_row(row);
    }
    return out;
}

} // namespace sfm
