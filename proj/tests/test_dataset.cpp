#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <filesystem>
#include <fstream>

#include "sfm/dataset.hpp"

using namespace sfm;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    fs::path dir = fs::temp_directory_path() / "sfm_dataset_tests";
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream out(p);
    out << content;
    return p;
}

DatasetManifest plain_manifest() {
    DatasetManifest m;
    m.name = "test";
    m.class_column = -1;
    m.has_header = false;
    m.missing_marker = "?";
    return m;
}

} // namespace

TEST_CASE("load_csv parses a 106-row two-class file") {
    std::string content;
    for (int i = 0; i < 85; ++i) {
        for (int j = 0; j < 8; ++j) content += std::to_string(j + i * 0.5) + ",";
        content += "C1\n";
    }
    for (int i = 0; i < 21; ++i) {
        for (int j = 0; j < 8; ++j) content += std::to_string(j - i * 0.25) + ",";
        content += "C2\n";
    }
    auto path = temp_file("appendicitis_like.csv", content);
    auto ds = load_csv(path.string(), plain_manifest());
    CHECK(ds.size() == 106);
    CHECK(ds.n_features() == 8);
    CHECK(ds.n_classes() == 2);
    auto counts = ds.class_counts();
    CHECK(counts[0] == 85);
    CHECK(counts[1] == 21);
    CHECK(ds.class_names[0] == "C1"); // first-seen order
}

TEST_CASE("load_csv single row") {
    auto path = temp_file("single.csv", "1.0,2.0,A\n");
    auto ds = load_csv(path.string(), plain_manifest());
    CHECK(ds.size() == 1);
    CHECK(ds.n_features() == 2);
    CHECK(ds.n_classes() == 1);
    CHECK(ds.samples.at(0, 0) == 1.0);
    CHECK(ds.samples.at(0, 1) == 2.0);
}

TEST_CASE("load_csv records missing cells and impute makes them finite") {
    auto path = temp_file("missing.csv", "1.0,A\n?,A\n3.0,A\n");
    auto ds = load_csv(path.string(), plain_manifest());
    CHECK(ds.has_missing());
    auto imputed = impute_class_mean(ds);
    CHECK_FALSE(imputed.has_missing());
    CHECK(imputed.samples.at(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("load_csv error paths") {
    auto bad_cols = temp_file("bad_cols.csv", "1,2,A\n1,B\n");
    CHECK_THROWS_AS(load_csv(bad_cols.string(), plain_manifest()), std::runtime_error);

    auto bad_token = temp_file("bad_token.csv", "1,x7,A\n");
    CHECK_THROWS_AS(load_csv(bad_token.string(), plain_manifest()), std::runtime_error);

    auto empty = temp_file("empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty.string(), plain_manifest()), std::runtime_error);
}

TEST_CASE("load_csv honors header flag and class column index") {
    auto path = temp_file("header.csv", "label,a,b\nyes,1,2\nno,3,4\n");
    DatasetManifest m = plain_manifest();
    m.has_header = true;
    m.class_column = 0;
    auto ds = load_csv(path.string(), m);
    CHECK(ds.size() == 2);
    CHECK(ds.n_features() == 2);
    CHECK(ds.feature_names[0] == "a");
    CHECK(ds.class_names[0] == "yes");
    CHECK(ds.samples.at(1, 1) == 4.0);
}

TEST_CASE("manifest round trip") {
    auto path = temp_file("d.manifest",
                          "name=demo\npath=demo.csv\nclass_column=0\nhas_header=true\n"
                          "missing_marker=NA\npaper_reference=12.3±4.5\n");
    auto m = load_manifest(path.string());
    CHECK(m.name == "demo");
    CHECK(m.path == "demo.csv");
    CHECK(m.class_column == 0);
    CHECK(m.has_header);
    CHECK(m.missing_marker == "NA");
    CHECK(m.paper_reference == "12.3±4.5");
}

TEST_CASE("impute_class_mean uses per-class means, not pooled") {
    // Hand-computed: class A feature values {1, 3}; class B has {7, missing}.
    // The missing B cell must become 7 (class mean), not (1+3+7)/3.
    auto path = temp_file("disjoint.csv", "1.0,A\n3.0,A\n7.0,B\n?,B\n");
    auto ds = load_csv(path.string(), plain_manifest());
    auto imputed = impute_class_mean(ds);
    CHECK(imputed.samples.at(3, 0) == doctest::Approx(7.0));
}

TEST_CASE("impute_class_mean is identity without missing values and idempotent") {
    auto path = temp_file("clean.csv", "1,2,A\n3,4,B\n5,6,A\n");
    auto ds = load_csv(path.string(), plain_manifest());
    auto once = impute_class_mean(ds);
    CHECK(once.samples == ds.samples);

    auto holes = temp_file("holes.csv", "1,?,A\n3,4,A\n5,6,B\n?,2,B\n");
    auto ds2 = load_csv(holes.string(), plain_manifest());
    auto first = impute_class_mean(ds2);
    auto second = impute_class_mean(first);
    CHECK(first.samples == second.samples);
}

TEST_CASE("impute_class_mean reports an entirely missing pair") {
    auto path = temp_file("allmiss.csv", "?,1,A\n?,2,A\n3,4,B\n");
    auto ds = load_csv(path.string(), plain_manifest());
    CHECK_THROWS_WITH_AS(impute_class_mean(ds) /**/,
                         doctest::Contains("no observed values"), std::runtime_error);
}

TEST_CASE("standardize maps {0,2} to {-1,+1}") {
    Dataset train;
    train.class_names = {"A"};
    train.labels = {0, 0};
    train.feature_names = {"f0"};
    double r0[] = {0.0}, r1[] = {2.0};
    train.samples.push_row(r0);
    train.samples.push_row(r1);
    auto res = standardize(train, train);
    CHECK(res.train.samples.at(0, 0) == doctest::Approx(-1.0));
    CHECK(res.train.samples.at(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("standardize maps constant columns to zero with unit scale") {
    Dataset train;
    train.class_names = {"A"};
    train.labels = {0, 0, 0};
    train.feature_names = {"f0"};
    for (double v : {5.0, 5.0, 5.0}) {
        double row[] = {v};
        train.samples.push_row(row);
    }
    auto res = standardize(train, train);
    for (std::size_t i = 0; i < 3; ++i) CHECK(res.train.samples.at(i, 0) == 0.0);
    CHECK(res.scaler.scale[0] == 1.0);
}

TEST_CASE("standardize does not clip out-of-range test values") {
    Dataset train;
    train.class_names = {"A"};
    train.labels = {0, 0};
    train.feature_names = {"f0"};
    double r0[] = {0.0}, r1[] = {2.0};
    train.samples.push_row(r0);
    train.samples.push_row(r1);
    Dataset test = train;
    double far[] = {10.0};
    test.samples.push_row(far);
    test.labels.push_back(0);
    auto res = standardize(train, test);
    CHECK(res.applied.samples.at(2, 0) == doctest::Approx(9.0)); // (10-1)/1
}

TEST_CASE("standardize round-trips non-constant features") {
    Rng rng(42);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    Dataset train;
    train.class_names = {"A"};
    train.feature_names = {"f0", "f1", "f2"};
    for (int i = 0; i < 37; ++i) {
        double row[] = {uni(rng), uni(rng) * 10, uni(rng) + 3};
        train.samples.push_row(row);
        train.labels.push_back(0);
    }
    auto res = standardize(train, train);
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto back = res.scaler.inverse(res.train.samples.row(i));
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(back[j] == doctest::Approx(train.samples.at(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("generate_parity basics") {
    auto p8 = generate_parity(8);
    CHECK(p8.size() == 256);
    auto counts = p8.class_counts();
    CHECK(counts[0] == 128);
    CHECK(counts[1] == 128);

    auto p2 = generate_parity(2);
    // rows ordered by integer value: 00, 10, 01, 11 (bit j in column j)
    REQUIRE(p2.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        int ones = static_cast<int>(p2.samples.at(i, 0) + p2.samples.at(i, 1));
        CHECK(p2.labels[i] == ones % 2);
    }

    auto p3 = generate_parity(3);
    CHECK(p3.size() == 8);
    CHECK(p3.class_counts()[0] == 4);
    CHECK(p3.class_counts()[1] == 4);

    CHECK_THROWS_AS(generate_parity(1), std::invalid_argument);
    CHECK_THROWS_AS(generate_parity(21), std::invalid_argument);
}

TEST_CASE("parity label equals popcount mod 2, exhaustively up to 12 bits") {
    for (int bits : {2, 5, 9, 12}) {
        auto ds = generate_parity(bits);
        REQUIRE(ds.size() == (1u << bits));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            unsigned v = 0;
            for (int j = 0; j < bits; ++j)
                if (ds.samples.at(i, static_cast<std::size_t>(j)) == 1.0) v |= 1u << j;
            CHECK(ds.labels[i] == static_cast<int>(std::popcount(v) % 2));
        }
    }
}

TEST_CASE("make_folds: balanced 50/50 gives exactly 5+5 per fold") {
    Dataset ds;
    ds.class_names = {"A", "B"};
    ds.feature_names = {"f0"};
    for (int i = 0; i < 100; ++i) {
        double row[] = {static_cast<double>(i)};
        ds.samples.push_row(row);
        ds.labels.push_back(i < 50 ? 0 : 1);
    }
    auto plan = make_folds(ds, 10, 7);
    for (std::size_t f = 0; f < 10; ++f) {
        std::size_t a = 0, b = 0;
        for (std::size_t i = 0; i < 100; ++i)
            if (plan.assignments[i] == f) (ds.labels[i] == 0 ? a : b)++;
        CHECK(a == 5);
        CHECK(b == 5);
    }
}

TEST_CASE("make_folds determinism and coverage") {
    auto ds = generate_parity(6);
    auto p1 = make_folds(ds, 10, 99);
    auto p2 = make_folds(ds, 10, 99);
    CHECK(p1.assignments == p2.assignments);

    std::vector<std::size_t> sizes(10, 0);
    for (auto f : p1.assignments) {
        REQUIRE(f < 10);
        sizes[f]++;
    }
    CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == ds.size());

    auto p3 = make_folds(ds, 10, 100);
    CHECK(p1.assignments != p3.assignments);
}

TEST_CASE("make_folds stratification on an 85/21 split") {
    Dataset ds;
    ds.class_names = {"C1", "C2"};
    ds.feature_names = {"f0"};
    for (int i = 0; i < 106; ++i) {
        double row[] = {static_cast<double>(i)};
        ds.samples.push_row(row);
        ds.labels.push_back(i < 85 ? 0 : 1);
    }
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto plan = make_folds(ds, 10, seed);
        for (std::size_t f = 0; f < 10; ++f) {
            std::size_t c1 = 0, c2 = 0;
            for (std::size_t i = 0; i < 106; ++i)
                if (plan.assignments[i] == f) (ds.labels[i] == 0 ? c1 : c2)++;
            CHECK((c1 == 8 || c1 == 9));
            CHECK((c2 == 2 || c2 == 3));
        }
    }
}

TEST_CASE("make_folds rejects k larger than m") {
    auto ds = generate_parity(2);
    CHECK_THROWS_AS(make_folds(ds, 5, 0), std::invalid_argument);
}

TEST_CASE("save_csv then load_csv round trip") {
    auto ds = generate_parity(3);
    auto path = temp_file("parity3.csv", "");
    save_csv(ds, path.string());
    auto re = load_csv(path.string(), plain_manifest());
    CHECK(re.size() == ds.size());
    CHECK(re.samples == ds.samples);
    CHECK(re.labels == ds.labels);
}

TEST_CASE("select_columns keeps order and labels") {
    auto ds = generate_parity(3);
    auto cut = select_columns(ds, {2, 0});
    CHECK(cut.n_features() == 2);
    CHECK(cut.labels == ds.labels);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(cut.samples.at(i, 0) == ds.samples.at(i, 2));
        CHECK(cut.samples.at(i, 1) == ds.samples.at(i, 0));
    }
}
