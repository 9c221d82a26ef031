#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "sfm/dataset.hpp"
#include "sfm/kernel_svm.hpp"
#include "sfm/knn.hpp"
#include "sfm/linear_svm.hpp"
#include "sfm/tree.hpp"

using namespace sfm;

namespace {

Matrix column(std::initializer_list<double> vals) {
    Matrix m;
    for (double v : vals) {
        double row[] = {v};
        m.push_row(row);
    }
    return m;
}

} // namespace

TEST_CASE("linear svm on symmetric 1-D pairs finds w=1, b=0") {
    Matrix Z = column({-1.0, 1.0});
    std::vector<int> y{-1, 1};
    auto model = train_linear_svm(Z, y, 100.0, 1);
    CHECK(model.weights[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(model.bias == doctest::Approx(0.0).scale(1).epsilon(1e-3));
    // margin hyperplanes at +-1
    std::vector<double> at{1.0};
    CHECK(model.decision(at) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("linear svm cannot fit XOR") {
    Matrix Z;
    std::vector<int> y;
    const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const int labels[4] = {-1, 1, 1, -1};
    for (int i = 0; i < 4; ++i) {
        Z.push_row(pts[i]);
        y.push_back(labels[i]);
    }
    for (double c : {0.1, 1.0, 10.0, 1000.0}) {
        auto model = train_linear_svm(Z, y, c, 3);
        int hits = 0;
        for (int i = 0; i < 4; ++i)
            if ((model.decision(Z.row(i)) >= 0.0 ? 1 : -1) == y[i]) ++hits;
        CHECK(hits <= 3);
    }
}

TEST_CASE("linear svm solver objective never increases across epochs") {
    Rng rng(8);
    auto [X, y] = test::random_instance(rng, 60, 4);
    LinearTrainInfo info;
    train_linear_svm(X, y, 5.0, 17, &info);
    REQUIRE(info.epoch_objective.size() >= 2);
    for (std::size_t e = 1; e < info.epoch_objective.size(); ++e) {
        const double slack = 1e-10 * (1.0 + std::abs(info.epoch_objective[e - 1]));
        CHECK(info.epoch_objective[e] <= info.epoch_objective[e - 1] + slack);
    }
}

TEST_CASE("linear svm objective matches a long-run reference within 1e-4 relative") {
    Rng rng(21);
    auto [X, y] = test::random_instance(rng, 40, 5);
    const double C = 2.0;
    auto fast = train_linear_svm(X, y, C, 7);
    auto slow = train_linear_svm(X, y, C, 7, nullptr, 50000, 1e-12);
    const double obj_fast = linear_svm_objective(X, y, C, fast);
    const double obj_slow = linear_svm_objective(X, y, C, slow);
    CHECK(obj_fast <= obj_slow * (1.0 + 1e-4) + 1e-12);
    CHECK(std::abs(obj_fast - obj_slow) <= 1e-4 * std::max(1.0, std::abs(obj_slow)));
}

TEST_CASE("linear svm training is bit-for-bit reproducible and validates input") {
    Rng rng(4);
    auto [X, y] = test::random_instance(rng, 30, 3);
    auto a = train_linear_svm(X, y, 1.0, 42);
    auto b = train_linear_svm(X, y, 1.0, 42);
    CHECK(a.serialize() == b.serialize());

    std::vector<int> ones(X.rows(), 1);
    CHECK_THROWS_AS(train_linear_svm(X, ones, 1.0, 0), std::invalid_argument);
}

TEST_CASE("linear model serialize/parse round trip") {
    LinearModel m;
    m.weights = {0.25, -1.5, 3.0};
    m.bias = 0.125;
    m.C = 10.0;
    std::istringstream in(m.serialize());
    auto r = LinearModel::parse(in);
    CHECK(r.weights == m.weights);
    CHECK(r.bias == m.bias);
    CHECK(r.C == m.C);
}

TEST_CASE("predict_discriminant sign conventions") {
    LinearModel m;
    m.weights = {2.0};
    m.bias = -1.0;
    std::vector<double> x{0.5}; // score exactly 0
    auto p = predict_discriminant(m, x);
    CHECK(p.score == 0.0);
    CHECK(p.label == 1); // zero maps to +1

    LinearModel neg = m;
    neg.weights[0] = -m.weights[0];
    neg.bias = -m.bias;
    Rng rng(3);
    std::uniform_real_distribution<double> uni(-4.0, 4.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> probe{uni(rng)};
        if (m.decision(probe) == 0.0) continue;
        CHECK(predict_discriminant(m, probe).label == -predict_discriminant(neg, probe).label);
    }
}

TEST_CASE("smo: two opposite points give equal coefficients") {
    Matrix X;
    const double a[] = {0.0, 0.0}, b[] = {3.0, 0.0};
    X.push_row(a);
    X.push_row(b);
    std::vector<int> y{1, -1};
    auto model = train_kernel_svm(X, y, 1000.0, 0.1);
    CHECK(model.alpha[0] == doctest::Approx(model.alpha[1]));
    CHECK(std::abs(model.alpha[0] * y[0] + model.alpha[1] * y[1]) <= 1e-8);
    CHECK(model.bias == doctest::Approx(0.0).scale(1).epsilon(1e-6));
    // each point sits on its margin hyperplane
    CHECK(model.decision(X.row(0)) == doctest::Approx(1.0).epsilon(2e-3));
    CHECK(model.decision(X.row(1)) == doctest::Approx(-1.0).epsilon(2e-3));
}

TEST_CASE("smo matches the projected-gradient QP oracle on random instances") {
    Rng rng(2718);
    for (int trial = 0; trial < 10; ++trial) {
        auto [X, y] = test::random_instance(rng);
        const double C = trial % 2 == 0 ? 1.0 : 10.0;
        const double beta = 0.25;
        auto model = train_kernel_svm(X, y, C, beta);
        auto oracle = test::solve_svm_dual_reference(X, y, C, beta);

        const double smo_obj = smo_dual_objective(model);
        CHECK(std::abs(smo_obj - oracle.objective) <=
              1e-3 * std::max(1.0, std::abs(oracle.objective)));

        double eq = 0.0;
        for (std::size_t i = 0; i < model.alpha.size(); ++i) {
            eq += model.alpha[i] * model.sv_labels[i];
            CHECK(model.alpha[i] >= 0.0);
            CHECK(model.alpha[i] <= C);
        }
        CHECK(std::abs(eq) <= 1e-8);
        CHECK(kkt_max_residual(model) <= 1e-3);
    }
}

TEST_CASE("smo: free support vectors score their own label") {
    Rng rng(5);
    auto [X, y] = test::random_instance(rng, 30, 3);
    auto model = train_kernel_svm(X, y, 5.0, 0.25);
    bool found_free = false;
    for (std::size_t i = 0; i < model.alpha.size(); ++i) {
        if (model.alpha[i] > 1e-9 && model.alpha[i] < model.C - 1e-9) {
            found_free = true;
            CHECK(model.decision(model.support_vectors.row(i)) ==
                  doctest::Approx(model.sv_labels[i]).epsilon(1e-3));
        }
    }
    CHECK(found_free);
}

TEST_CASE("kernel model serialize/parse round trip") {
    Matrix X;
    const double a[] = {0.0, 1.0}, b[] = {2.0, -1.0};
    X.push_row(a);
    X.push_row(b);
    std::vector<int> y{1, -1};
    auto model = train_kernel_svm(X, y, 3.0, 0.5);
    std::istringstream in(model.serialize());
    auto r = KernelModel::parse(in);
    CHECK(r.serialize() == model.serialize());
    std::vector<double> probe{0.3, 0.3};
    CHECK(r.decision(probe) == model.decision(probe));
}

TEST_CASE("tune_svm degenerate and tie rules") {
    Rng rng(12);
    auto [X, y] = test::random_instance(rng, 30, 2);
    auto single = tune_svm(X, y, {4.0}, {0.25}, 3, 1);
    CHECK(single.first == 4.0);
    CHECK(single.second == 0.25);

    // widely separated blobs: every large C ties at 100%, smallest wins
    Matrix sep;
    std::vector<int> sy;
    for (int i = 0; i < 12; ++i) {
        const double row[] = {i < 6 ? -10.0 + 0.1 * i : 10.0 + 0.1 * i};
        sep.push_row(row);
        sy.push_back(i < 6 ? 1 : -1);
    }
    auto [c, beta] = tune_svm(sep, sy, {1.0, 10.0, 100.0}, {0.1}, 3, 2);
    CHECK(c == 1.0);
    CHECK(beta == 0.1);
}

TEST_CASE("knn selects k > 16 on full parity-8 and scores it perfectly") {
    auto ds = generate_parity(8);
    auto model = train_knn(ds.samples, ds.labels, 1, 20, 5, 7);
    CHECK(model.k > 16);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (model.predict(ds.samples.row(i)) == ds.labels[i]) ++hits;
    CHECK(hits == ds.size());
}

TEST_CASE("knn rejects an empty k range") {
    auto ds = generate_parity(4);
    CHECK_THROWS_AS(train_knn(ds.samples, ds.labels, 5, 3, 4, 0), std::invalid_argument);
}

TEST_CASE("knn base behavior") {
    // one stored point per class behaves like nearest centroid
    NeighborModel m;
    const double a[] = {0.0}, b[] = {10.0};
    m.train.push_row(a);
    m.train.push_row(b);
    m.labels = {0, 1};
    m.k = 1;
    std::vector<double> near_a{2.0}, near_b{8.0};
    CHECK(m.predict(near_a) == 0);
    CHECK(m.predict(near_b) == 1);

    // duplicate of a training point returns its label with k=1
    std::vector<double> dup{10.0};
    CHECK(m.predict(dup) == 1);
}

TEST_CASE("knn with k=1 has perfect resubstitution on distinct points") {
    Rng rng(9);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    Matrix X;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        const double row[] = {uni(rng), uni(rng)};
        X.push_row(row);
        labels.push_back(i % 3);
    }
    NeighborModel m;
    m.train = X;
    m.labels = labels;
    m.k = 1;
    for (std::size_t i = 0; i < X.rows(); ++i) CHECK(m.predict(X.row(i)) == labels[i]);
}

TEST_CASE("tree splits 1-D two-block data at the gap midpoint") {
    Matrix Z = column({0.0, 1.0, 2.0, 3.0});
    std::vector<int> y{0, 0, 1, 1};
    auto model = train_tree(Z, y, 12, 2);
    REQUIRE_FALSE(model.nodes[0].leaf);
    CHECK(model.nodes[0].feature == 0);
    CHECK(TreeModel::threshold(model.nodes[0]) == doctest::Approx(1.5));
    for (std::size_t i = 0; i < 4; ++i) CHECK(model.predict(Z.row(i)) == y[i]);
}

TEST_CASE("tree on pure input is a single leaf") {
    Matrix Z = column({1.0, 2.0, 3.0, 4.0});
    std::vector<int> y{1, 1, 1, 1};
    auto model = train_tree(Z, y);
    REQUIRE(model.nodes.size() == 1);
    CHECK(model.nodes[0].leaf);
    CHECK(model.nodes[0].label == 1);
}

TEST_CASE("tree predictions survive strictly increasing per-feature transforms") {
    Rng rng(31);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    Matrix train, test;
    std::vector<int> y;
    for (int i = 0; i < 80; ++i) {
        const double row[] = {uni(rng), uni(rng), uni(rng)};
        train.push_row(row);
        y.push_back((row[0] + 0.5 * row[1] > 0.2) ? 1 : 0);
    }
    for (int i = 0; i < 40; ++i) {
        const double row[] = {uni(rng), uni(rng), uni(rng)};
        test.push_row(row);
    }
    auto transform = [](double v, std::size_t feature) {
        switch (feature) {
            case 0: return v * v * v;          // odd power, increasing
            case 1: return std::exp(v);        // increasing
            default: return 2.0 * v + 1.0;     // affine increasing
        }
    };
    auto apply = [&](const Matrix& src) {
        Matrix out(src.rows(), src.cols());
        for (std::size_t i = 0; i < src.rows(); ++i)
            for (std::size_t j = 0; j < src.cols(); ++j)
                out.at(i, j) = transform(src.at(i, j), j);
        return out;
    };

    auto base = train_tree(train, y);
    auto warped = train_tree(apply(train), y);
    auto warped_test = apply(test);
    for (std::size_t i = 0; i < test.rows(); ++i)
        CHECK(base.predict(test.row(i)) == warped.predict(warped_test.row(i)));
}

TEST_CASE("tree respects min_leaf and serializes in preorder") {
    Matrix Z = column({0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0});
    std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
    auto model = train_tree(Z, y, 12, 4);
    REQUIRE_FALSE(model.nodes[0].leaf);
    std::istringstream in(model.serialize());
    auto round = TreeModel::parse(in);
    CHECK(round.serialize() == model.serialize());
    for (std::size_t i = 0; i < Z.rows(); ++i) CHECK(round.predict(Z.row(i)) == y[i]);

    CHECK_THROWS_AS(train_tree(column({1.0, 2.0}), std::vector<int>{0, 1}, 12, 2),
                    std::invalid_argument);
}
