#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "sfm/core.hpp"
#include "sfm/dataset.hpp"

namespace sfm {

enum class FeatureKind { original, projection, window, kernel };

inline char family_tag(FeatureKind k) {
    switch (k) {
        case FeatureKind::original: return 'X';
        case FeatureKind::projection: return 'Z';
        case FeatureKind::window: return 'H';
        case FeatureKind::kernel: return 'K';
    }
    return '?';
}

struct OriginalFeature {
    std::size_t column;
    bool operator==(const OriginalFeature&) const = default;
};

/// z(x) = w.x with w drawn from [0,1]^n.
struct ProjectionFeature {
    std::vector<double> direction;
    bool operator==(const ProjectionFeature&) const = default;
};

/// Binary indicator of w.x falling inside the closed interval [lo, hi],
/// fitted around a pure single-class cluster of the training projections.
struct WindowFeature {
    std::vector<double> direction;
    double lo = 0.0;
    double hi = 0.0;
    int target_class = 0;
    bool operator==(const WindowFeature&) const = default;
};

/// k(x) = exp(-beta * ||x - anchor||^2), one per training vector.
struct KernelFeature {
    std::vector<double> anchor;
    double beta = 0.0;
    bool operator==(const KernelFeature&) const = default;
};

using FeatureDef = std::variant<OriginalFeature, ProjectionFeature, WindowFeature, KernelFeature>;

inline FeatureKind kind_of(const FeatureDef& def) {
    return static_cast<FeatureKind>(def.index());
}

inline double project(std::span<const double> x, std::span<const double> w) {
    return dot(x, w);
}

inline double window_value(std::span<const double> x, const WindowFeature& f) {
    double z = dot(x, f.direction);
    return (z >= f.lo && z <= f.hi) ? 1.0 : 0.0;
}

inline double kernel_value(std::span<const double> x, const KernelFeature& f) {
    return std::exp(-f.beta * squared_distance(x, f.anchor));
}

inline double evaluate(const FeatureDef& def, std::span<const double> x) {
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, OriginalFeature>) {
                if (f.column >= x.size()) throw std::invalid_argument("evaluate: column out of range");
                return x[f.column];
            } else if constexpr (std::is_same_v<T, ProjectionFeature>) {
                return project(x, f.direction);
            } else if constexpr (std::is_same_v<T, WindowFeature>) {
                return window_value(x, f);
            } else {
                return kernel_value(x, f);
            }
        },
        def);
}

inline std::string serialize(const FeatureDef& def) {
    std::string line;
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, OriginalFeature>) {
                line = "original " + std::to_string(f.column);
            } else if constexpr (std::is_same_v<T, ProjectionFeature>) {
                line = "projection " + std::to_string(f.direction.size());
                for (double w : f.direction) line += ' ' + fmt_full(w);
            } else if constexpr (std::is_same_v<T, WindowFeature>) {
                line = "window " + std::to_string(f.target_class) + ' ' + fmt_full(f.lo) +
                       ' ' + fmt_full(f.hi) + ' ' + std::to_string(f.direction.size());
                for (double w : f.direction) line += ' ' + fmt_full(w);
            } else {
                line = "kernel " + fmt_full(f.beta) + ' ' + std::to_string(f.anchor.size());
                for (double v : f.anchor) line += ' ' + fmt_full(v);
            }
        },
        def);
    return line;
}

inline FeatureDef parse_feature(const std::string& line) {
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    auto read_vec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v)
            if (!(in >> x)) throw std::runtime_error("feature line truncated: " + line);
        return v;
    };
    if (kind == "original") {
        std::size_t col;
        if (!(in >> col)) throw std::runtime_error("bad original feature: " + line);
        return OriginalFeature{col};
    }
    if (kind == "projection") {
        std::size_t n;
        if (!(in >> n)) throw std::runtime_error("bad projection feature: " + line);
        return ProjectionFeature{read_vec(n)};
    }
    if (kind == "window") {
        int cls;
        double lo, hi;
        std::size_t n;
        if (!(in >> cls >> lo >> hi >> n)) throw std::runtime_error("bad window feature: " + line);
        return WindowFeature{read_vec(n), lo, hi, cls};
    }
    if (kind == "kernel") {
        double beta;
        std::size_t n;
        if (!(in >> beta >> n)) throw std::runtime_error("bad kernel feature: " + line);
        return KernelFeature{read_vec(n), beta};
    }
    throw std::runtime_error("unknown feature kind: " + kind);
}

/// Which family pass produced a def, and at what generation index
/// (direction index for Z/H, training row for K, column for X).
struct Provenance {
    char family = '?';
    std::size_t index = 0;
};

/// Ordered feature definitions; expansion evaluates them in order.
/// Duplicate defs (same kind and parameters) are dropped on insertion.
class FeatureSpace {
public:
    bool add(FeatureDef def, Provenance prov) {
        std::string key = serialize(def);
        if (!keys_.insert(key).second) return false;
        defs_.push_back(std::move(def));
        provenance_.push_back(prov);
        return true;
    }

    std::size_t size() const { return defs_.size(); }
    bool empty() const { return defs_.empty(); }
    const std::vector<FeatureDef>& defs() const { return defs_; }
    const FeatureDef& def(std::size_t i) const { return defs_[i]; }
    const Provenance& provenance(std::size_t i) const { return provenance_[i]; }

    std::size_t count(FeatureKind k) const {
        std::size_t c = 0;
        for (const auto& d : defs_)
            if (kind_of(d) == k) ++c;
        return c;
    }

    std::vector<double> transform(std::span<const double> x) const {
        std::vector<double> out(defs_.size());
        for (std::size_t i = 0; i < defs_.size(); ++i) out[i] = evaluate(defs_[i], x);
        return out;
    }

    Matrix transform(const Matrix& rows) const {
        Matrix out(rows.rows(), defs_.size());
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            auto v = transform(rows.row(r));
            std::copy(v.begin(), v.end(), out.row(r).begin());
        }
        return out;
    }

    std::string serialize_all() const {
        std::string out = "featurespace " + std::to_string(defs_.size()) + '\n';
        for (const auto& d : defs_) out += sfm::serialize(d) + '\n';
        return out;
    }

    static FeatureSpace parse(std::istream& in) {
        std::string tag;
        std::size_t n;
        if (!(in >> tag >> n) || tag != "featurespace")
            throw std::runtime_error("not a featurespace file");
        std::string line;
        std::getline(in, line);
        FeatureSpace space;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line)) throw std::runtime_error("featurespace file truncated");
            FeatureDef def = parse_feature(line);
            space.add(def, Provenance{family_tag(kind_of(def)), i});
        }
        return space;
    }

private:
    std::vector<FeatureDef> defs_;
    std::vector<Provenance> provenance_;
    std::set<std::string> keys_;
};

/// Feature-generation and selection parameters. N == 0 means "auto":
/// max(30, 3n) random directions.
struct GenParams {
    std::size_t n_directions = 0;
    std::size_t min_cluster = 10;   // eta
    double mi_threshold = 0.005;    // alpha, bits
    double posterior_threshold = 0.5; // delta
    double beta = 0.03125;          // 2^-5
    double epsilon = 0.001;         // kernel neighborhood cutoff
    std::uint64_t seed = 0;

    std::size_t resolve_directions(std::size_t n_features) const {
        return n_directions > 0 ? n_directions : std::max<std::size_t>(30, 3 * n_features);
    }

    void validate() const {
        if (min_cluster < 1) throw std::invalid_argument("GenParams: eta must be >= 1");
        if (mi_threshold < 0) throw std::invalid_argument("GenParams: alpha must be >= 0");
        if (posterior_threshold < 0 || posterior_threshold > 1)
            throw std::invalid_argument("GenParams: delta must be in [0,1]");
        if (beta <= 0) throw std::invalid_argument("GenParams: beta must be > 0");
        if (epsilon <= 0 || epsilon >= 1) throw std::invalid_argument("GenParams: epsilon must be in (0,1)");
    }
};

/// Uniform draw from [0,1]^n, redrawn in the (measure-zero) all-zero case.
inline std::vector<double> random_direction(std::size_t n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("random_direction: n must be >= 1");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> w(n);
    for (;;) {
        bool all_zero = true;
        for (auto& v : w) {
            v = uni(rng);
            if (v != 0.0) all_zero = false;
        }
        if (!all_zero) return w;
    }
}

struct PureCluster {
    double lo = 0.0;
    double hi = 0.0;
    int class_id = 0;
    std::size_t count = 0;
};

/// Maximal same-class runs of size >= min_size in the sorted projection.
/// Interval bounds sit midway between a run's extreme points and their
/// differently-classed neighbors; at the data extremes the bound extends by
/// half the run's span. Equal projected values of mixed class end a run.
inline std::vector<PureCluster> find_pure_clusters(const std::vector<double>& z,
                                                   const std::vector<int>& labels,
                                                   std::size_t min_size) {
    const std::size_t m = z.size();
    if (labels.size() != m) throw std::invalid_argument("find_pure_clusters: size mismatch");
    std::vector<PureCluster> out;
    if (m == 0 || m < min_size) return out;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (z[a] != z[b]) return z[a] < z[b];
        return a < b;
    });

    // Collapse ties into groups; a mixed-class tie group is a run barrier.
    struct Group {
        double value;
        int class_id; // -1 = mixed
        std::size_t count;
    };
    std::vector<Group> groups;
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        int cls = labels[order[i]];
        bool mixed = false;
        while (j < m && z[order[j]] == z[order[i]]) {
            if (labels[order[j]] != cls) mixed = true;
            ++j;
        }
        groups.push_back({z[order[i]], mixed ? -1 : cls, j - i});
        i = j;
    }

    const double z_min = groups.front().value;
    const double z_max = groups.back().value;
    std::size_t g = 0;
    while (g < groups.size()) {
        if (groups[g].class_id < 0) {
            ++g;
            continue;
        }
        std::size_t e = g;
        std::size_t count = 0;
        while (e < groups.size() && groups[e].class_id == groups[g].class_id) {
            count += groups[e].count;
            ++e;
        }
        if (count >= min_size) {
            const double run_lo = groups[g].value;
            const double run_hi = groups[e - 1].value;
            double span = run_hi - run_lo;
            if (span == 0.0) span = 1.0; // single-valued run: fixed pad
            double lo = (run_lo == z_min) ? run_lo - span / 2
                                          : (run_lo + groups[g - 1].value) / 2;
            double hi = (run_hi == z_max) ? run_hi + span / 2
                                          : (run_hi + groups[e].value) / 2;
            out.push_back({lo, hi, groups[g].class_id, count});
        }
        g = e;
    }
    return out;
}

/// Families requested from build_feature_space.
struct FamilySet {
    bool x = false, z = false, h = false, k = false;

    static FamilySet parse(const std::string& text) {
        FamilySet f;
        for (char c : text) {
            switch (c) {
                case 'X': case 'x': f.x = true; break;
                case 'Z': case 'z': f.z = true; break;
                case 'H': case 'h': f.h = true; break;
                case 'K': case 'k': f.k = true; break;
                case '+': case ' ': break;
                default: throw std::invalid_argument(std::string("unknown feature family '") + c + "'");
            }
        }
        return f;
    }

    bool any() const { return x || z || h || k; }

    std::string to_string() const {
        std::string s;
        auto app = [&](bool on, char c) {
            if (!on) return;
            if (!s.empty()) s += '+';
            s += c;
        };
        app(x, 'X');
        app(z, 'Z');
        app(h, 'H');
        app(k, 'K');
        return s;
    }
};

/// Expand the training set: X originals, Z random projections, H pure-cluster
/// windows harvested from the same directions, K one Gaussian kernel feature
/// per training vector. Selection happens later, in the selection pass.
inline FeatureSpace build_feature_space(const Dataset& train, const GenParams& params,
                                        const FamilySet& families) {
    if (!families.any()) throw std::invalid_argument("build_feature_space: empty family set");
    if (train.size() == 0) throw std::invalid_argument("build_feature_space: empty training set");
    params.validate();

    const std::size_t n = train.n_features();
    const std::size_t m = train.size();
    FeatureSpace space;

    if (families.x)
        for (std::size_t j = 0; j < n; ++j)
            space.add(OriginalFeature{j}, {'X', j});

    if (families.z || families.h) {
        // One RNG stream for directions, independent of which of Z/H is on,
        // so the harvested windows do not depend on Z's presence.
        Rng rng(derive_seed(params.seed, 0x5A));
        const std::size_t N = params.resolve_directions(n);
        std::vector<double> z(m);
        for (std::size_t d = 0; d < N; ++d) {
            auto w = random_direction(n, rng);
            if (families.z) space.add(ProjectionFeature{w}, {'Z', d});
            if (families.h) {
                for (std::size_t i = 0; i < m; ++i) z[i] = project(train.samples.row(i), w);
                for (const auto& cluster : find_pure_clusters(z, train.labels, params.min_cluster))
                    space.add(WindowFeature{w, cluster.lo, cluster.hi, cluster.class_id}, {'H', d});
            }
        }
    }

    if (families.k)
        for (std::size_t i = 0; i < m; ++i) {
            auto row = train.samples.row(i);
            space.add(KernelFeature{{row.begin(), row.end()}, params.beta}, {'K', i});
        }

    return space;
}

} // namespace sfm
