#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sfm/config.hpp"
#include "sfm/harness.hpp"
#include "sfm/linear_svm.hpp"

namespace fs = std::filesystem;
using namespace sfm;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    long long seed_override = -1;
    std::size_t jobs = 1;
    bool verbose = false;
};

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '(' || c == ')' || c == '+' || c == ' ') c = '_';
    return s;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void print_summary(const ExperimentResult& r) {
    std::cout << r.config.display_name() << ": " << 100.0 * r.mean << " ± " << 100.0 * r.stddev
              << " %  (" << r.folds.size() << " folds, " << r.wall_seconds << " s)";
    if (!r.config.manifest.paper_reference.empty())
        std::cout << "  [reported: " << r.config.manifest.paper_reference << "]";
    std::cout << '\n';
}

ExperimentConfig load_experiment(const CommonOpts& opts) {
    auto cfg = Config::load(opts.config_path);
    auto exp = experiment_from_config(cfg);
    if (opts.seed_override >= 0) exp.seed = static_cast<std::uint64_t>(opts.seed_override);
    exp.jobs = opts.jobs;
    return exp;
}

int cmd_run(const CommonOpts& opts) {
    auto exp = load_experiment(opts);
    ExperimentResult result;
    try {
        result = run_experiment(exp);
    } catch (const ExperimentFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        write_file(fs::path(opts.out_dir) / (sanitize(e.result.config.display_name()) + "_folds.csv"),
                   e.result.folds_csv());
        return 1;
    }
    const std::string stem = sanitize(result.config.display_name());
    write_file(fs::path(opts.out_dir) / (stem + "_folds.csv"), result.folds_csv());
    write_file(fs::path(opts.out_dir) / (stem + "_summary.csv"), result.summary_csv());
    if (!result.folds.empty() && !result.folds[0].model_text.empty()) {
        // fold-0 artifacts, ready for inspect-model
        write_file(fs::path(opts.out_dir) / (stem + "_model_fold0.txt"), result.folds[0].model_text);
        write_file(fs::path(opts.out_dir) / (stem + "_space_fold0.txt"), result.folds[0].space_text);
    }
    print_summary(result);
    if (opts.verbose)
        for (std::size_t f = 0; f < result.folds.size(); ++f)
            std::cout << "  fold " << f << ": " << 100.0 * result.folds[f].accuracy
                      << " %  kept X/Z/H/K = " << result.folds[f].kept_x << '/'
                      << result.folds[f].kept_z << '/' << result.folds[f].kept_h << '/'
                      << result.folds[f].kept_k << '\n';
    return 0;
}

int cmd_table(const CommonOpts& opts) {
    auto cfg = Config::load(opts.config_path);
    auto base = experiment_from_config(cfg);
    if (opts.seed_override >= 0) base.seed = static_cast<std::uint64_t>(opts.seed_override);
    base.jobs = opts.jobs;

    std::vector<ExperimentConfig> per_dataset;
    for (const auto& mpath : cfg.get_strings("datasets", ',')) {
        fs::path mp(mpath);
        if (!mp.is_absolute() && fs::exists(fs::path(cfg.dir()) / mp)) mp = fs::path(cfg.dir()) / mp;
        ExperimentConfig e = base;
        e.manifest = load_manifest(mp.string());
        e.manifest_dir = mp.parent_path().string();
        per_dataset.push_back(std::move(e));
    }
    std::vector<FamilySet> spaces;
    for (const auto& s : cfg.get_strings("spaces", ';')) spaces.push_back(FamilySet::parse(s));

    auto table = run_table(per_dataset, spaces);
    write_file(fs::path(opts.out_dir) / "table.csv", table.to_csv());
    std::string folds_csv = "dataset,classifier,families,fold,accuracy\n";
    for (const auto& row : table.cells)
        for (const auto& cell : row)
            if (cell.ok) {
                auto full = cell.result.folds_csv();
                folds_csv += full.substr(full.find('\n') + 1);
            }
    write_file(fs::path(opts.out_dir) / "table_folds.csv", folds_csv);
    std::cout << table.to_text();
    if (!table.complete) {
        std::cerr << "warning: table incomplete\n";
        return 1;
    }
    return 0;
}

int cmd_sweep(const CommonOpts& opts) {
    auto cfg = Config::load(opts.config_path);
    GenParams params;
    params.min_cluster = static_cast<std::size_t>(cfg.get_int("eta", 10));
    params.beta = cfg.get_double("beta", 0.03125);
    params.epsilon = cfg.get_double("epsilon", 0.001);
    params.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    if (opts.seed_override >= 0) params.seed = static_cast<std::uint64_t>(opts.seed_override);

    Dataset ds;
    if (cfg.get("synthetic", "") == "two_gaussians" || !cfg.has("manifest")) {
        ds = two_gaussians(params.seed, static_cast<std::size_t>(cfg.get_int("per_class", 100)));
    } else {
        auto exp_cfg = experiment_from_config(cfg);
        ds = load_dataset(exp_cfg.manifest, exp_cfg.manifest_dir);
    }

    auto result = sweep_selection(ds, cfg.get_doubles("alphas"), cfg.get_doubles("deltas"), params);
    write_file(fs::path(opts.out_dir) / "sweep.csv", result.to_csv());
    for (double a : cfg.get_doubles("alphas"))
        for (double d : cfg.get_doubles("deltas"))
            std::cout << "alpha=" << a << " delta=" << d
                      << " accepted=" << result.accepted_count(a, d) << '\n';
    return 0;
}

int cmd_gen_parity(int bits, const std::string& out_path) {
    auto ds = generate_parity(bits);
    fs::path p(out_path);
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    save_csv(ds, out_path);
    std::cout << "wrote " << ds.size() << " rows to " << out_path << '\n';
    return 0;
}

int cmd_inspect(const std::string& model_path, const std::string& space_path) {
    std::ifstream min(model_path);
    if (!min) throw std::runtime_error("cannot read model: " + model_path);
    auto model = LinearModel::parse(min);
    std::ifstream sin(space_path);
    if (!sin) throw std::runtime_error("cannot read feature space: " + space_path);
    auto space = FeatureSpace::parse(sin);
    if (space.size() != model.weights.size())
        throw std::runtime_error("feature space size (" + std::to_string(space.size()) +
                                 ") does not match weight count (" +
                                 std::to_string(model.weights.size()) + ")");

    std::vector<std::size_t> order(space.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(model.weights[a]) > std::abs(model.weights[b]);
    });

    std::cout << "bias " << model.bias << "\nrank\tweight\tfeature\n";
    std::size_t rank = 1;
    for (std::size_t i : order) {
        std::cout << rank++ << '\t' << model.weights[i] << '\t';
        const auto& def = space.def(i);
        std::visit(
            [&](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, OriginalFeature>) {
                    std::cout << "original column " << f.column;
                } else if constexpr (std::is_same_v<T, ProjectionFeature>) {
                    std::cout << "projection dir=[";
                    for (std::size_t j = 0; j < f.direction.size(); ++j)
                        std::cout << (j ? " " : "") << f.direction[j];
                    std::cout << ']';
                } else if constexpr (std::is_same_v<T, WindowFeature>) {
                    std::cout << "window class " << f.target_class << " interval [" << f.lo << ", "
                              << f.hi << "] dir=[";
                    for (std::size_t j = 0; j < f.direction.size(); ++j)
                        std::cout << (j ? " " : "") << f.direction[j];
                    std::cout << ']';
                } else {
                    std::cout << "kernel beta " << f.beta << " anchor=[";
                    for (std::size_t j = 0; j < f.anchor.size(); ++j)
                        std::cout << (j ? " " : "") << f.anchor[j];
                    std::cout << ']';
                }
            },
            def);
        std::cout << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"support feature machines workbench"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help); // full usage on bad invocations

    CommonOpts opts;
    int bits = 8;
    std::string parity_out = "parity.csv";
    std::string model_path, space_path;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opts.config_path, "experiment config file");
        if (needs_config) c->required();
        sub->add_option("--seed", opts.seed_override, "override the config seed");
        sub->add_option("--out", opts.out_dir, "output directory (default: out)");
        sub->add_option("--jobs", opts.jobs, "parallel fold jobs");
        sub->add_flag("--verbose", opts.verbose, "per-fold detail");
    };

    auto* run = app.add_subcommand("run", "run one cross-validated experiment");
    add_common(run, true);
    auto* table = app.add_subcommand("table", "run a dataset x feature-space grid");
    add_common(table, true);
    auto* sweep = app.add_subcommand("sweep", "kernel-anchor selection sweep over (alpha, delta)");
    add_common(sweep, true);

    auto* gen = app.add_subcommand("gen-parity", "write an n-bit parity dataset as CSV");
    gen->add_option("--bits", bits, "bit count (2..20)")->required();
    gen->add_option("--out", parity_out, "output CSV path")->required();

    auto* inspect = app.add_subcommand("inspect-model", "list model features by |weight|");
    inspect->add_option("--model", model_path, "linear model file")->required();
    inspect->add_option("--space", space_path, "feature space file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(opts);
        if (table->parsed()) return cmd_table(opts);
        if (sweep->parsed()) return cmd_sweep(opts);
        if (gen->parsed()) return cmd_gen_parity(bits, parity_out);
        if (inspect->parsed()) return cmd_inspect(model_path, space_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
