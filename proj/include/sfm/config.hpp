#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sfm/harness.hpp"

namespace sfm {

/// key=value experiment configs; '#' starts a comment line.
class Config {
public:
    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config not readable: " + path);
        Config cfg;
        cfg.dir_ = std::filesystem::path(path).parent_path().string();
        std::string line;
        while (std::getline(in, line)) {
            line = detail::trim(line);
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config line missing '=': " + line);
            cfg.values_[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::string& dir() const { return dir_; }

    std::string get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw std::runtime_error("config missing key: " + key);
        return it->second;
    }
    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? std::stod(get(key)) : fallback;
    }
    long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? std::stoll(get(key)) : fallback;
    }
    bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? detail::parse_bool(get(key)) : fallback;
    }
    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        for (const auto& tok : detail::split(get(key), ',')) {
            auto t = detail::trim(tok);
            if (!t.empty()) out.push_back(std::stod(t));
        }
        return out;
    }
    std::vector<std::string> get_strings(const std::string& key, char sep) const {
        std::vector<std::string> out;
        for (const auto& tok : detail::split(get(key), sep)) {
            auto t = detail::trim(tok);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

private:
    std::map<std::string, std::string> values_;
    std::string dir_;
};

/// Shared experiment keys; the manifest path resolves relative to the
/// config file's directory.
inline ExperimentConfig experiment_from_config(const Config& cfg) {
    ExperimentConfig exp;
    if (cfg.has("manifest")) {
        namespace fs = std::filesystem;
        fs::path mp(cfg.get("manifest"));
        if (!mp.is_absolute() && !cfg.dir().empty() && fs::exists(fs::path(cfg.dir()) / mp))
            mp = fs::path(cfg.dir()) / mp;
        exp.manifest = load_manifest(mp.string());
        exp.manifest_dir = mp.parent_path().string();
    }
    exp.name = cfg.get("name", "");
    exp.classifier = parse_classifier(cfg.get("classifier", "sfm"));
    exp.families = FamilySet::parse(cfg.get("families", "K"));
    exp.folds = static_cast<std::size_t>(cfg.get_int("folds", 10));
    exp.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    exp.gen.n_directions = static_cast<std::size_t>(cfg.get_int("directions", 0));
    exp.gen.min_cluster = static_cast<std::size_t>(cfg.get_int("eta", 10));
    exp.gen.mi_threshold = cfg.get_double("alpha", 0.005);
    exp.gen.posterior_threshold = cfg.get_double("delta", 0.5);
    exp.gen.beta = cfg.get_double("beta", 0.03125);
    exp.gen.epsilon = cfg.get_double("epsilon", 0.001);
    exp.fda_keep = static_cast<std::size_t>(cfg.get_int("fda_keep", 0));
    exp.calibrate = cfg.get_bool("calibrate", true);
    exp.target_fraction = cfg.get_double("target_fraction", 0.3);
    exp.sfm_c = cfg.get_double("sfm_c", 1.0);
    if (cfg.has("linear_c_grid")) exp.linear_c_grid = cfg.get_doubles("linear_c_grid");
    if (cfg.has("svm_c_grid")) exp.svm_c_grid = cfg.get_doubles("svm_c_grid");
    if (cfg.has("svm_beta_grid")) exp.svm_beta_grid = cfg.get_doubles("svm_beta_grid");
    exp.inner_folds = static_cast<std::size_t>(cfg.get_int("inner_folds", 5));
    exp.knn_k_min = static_cast<std::size_t>(cfg.get_int("knn_k_min", 1));
    exp.knn_k_max = static_cast<std::size_t>(cfg.get_int("knn_k_max", 20));
    exp.tree_max_depth = static_cast<std::size_t>(cfg.get_int("tree_max_depth", 12));
    exp.tree_min_leaf = static_cast<std::size_t>(cfg.get_int("tree_min_leaf", 2));
    return exp;
}

} // namespace sfm
