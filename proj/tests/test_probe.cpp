#include <doctest.h>

#include <numeric>
#include <sstream>

#include "diffprobe/error.hpp"
#include "diffprobe/probe.hpp"
#include "diffprobe/rng.hpp"
#include "diffprobe/stats.hpp"
#include "diffprobe/synthetic.hpp"
#include "oracles.hpp"

using namespace diffprobe;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal();
    return X;
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("larger lambda shrinks weights toward zero") {
    Eigen::MatrixXd X(2, 1);
    X << 0, 1;
    Eigen::VectorXd y(2);
    y << 0, 1;
    const auto strong = fit_ridge(X, y, 1.0);
    const auto weak = fit_ridge(X, y, 0.01);
    CHECK(std::abs(strong.weights(0)) < std::abs(weak.weights(0)));
    CHECK(strong.bias == doctest::Approx(0.5));
    // standardized column is [-1, 1]; w = 1 / (2 + lambda)
    CHECK(strong.weights(0) == doctest::Approx(1.0 / 3.0));
    CHECK(weak.weights(0) == doctest::Approx(1.0 / 2.01));
}

TEST_CASE("constant column gets weight exactly zero and unit scale") {
    Rng rng(1);
    for (Eigen::Index d : {3, 40}) {  // primal and dual paths
        Eigen::MatrixXd X = random_matrix(rng, 12, d);
        X.col(1).setConstant(7.5);
        const auto y = random_vector(rng, 12);
        const auto w = fit_ridge(X, y, 1.0);
        CHECK(w.weights(1) == 0.0);
        CHECK(w.feature_scales(1) == 1.0);
        CHECK((w.feature_scales.array() > 0).all());
    }
}

TEST_CASE("ridge predictions match a direct normal-equations solve") {
    Rng rng(0);
    const auto X = random_matrix(rng, 20, 5);
    const auto y = random_vector(rng, 20);
    const auto Xnew = random_matrix(rng, 7, 5);
    const auto w = fit_ridge(X, y, 1.0);
    const Eigen::VectorXd ours = predict(w, Xnew);
    const Eigen::VectorXd ref = oracle::ridge_predictions(X, y, 1.0, Xnew);
    CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("dual path agrees with the direct solve when d > n") {
    Rng rng(2);
    const auto X = random_matrix(rng, 10, 30);
    const auto y = random_vector(rng, 10);
    const auto Xnew = random_matrix(rng, 4, 30);
    const Eigen::VectorXd ours = predict(fit_ridge(X, y, 0.5), Xnew);
    const Eigen::VectorXd ref = oracle::ridge_predictions(X, y, 0.5, Xnew);
    CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predictions are invariant to affine rescaling of a column") {
    Rng rng(3);
    Eigen::MatrixXd X = random_matrix(rng, 30, 4);
    const auto y = random_vector(rng, 30);
    Eigen::MatrixXd X2 = X;
    X2.col(2) = X2.col(2).array() * 250.0 - 13.0;
    const Eigen::VectorXd p1 = predict(fit_ridge(X, y, 1.0), X);
    const Eigen::VectorXd p2 = predict(fit_ridge(X2, y, 1.0), X2);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fit_ridge input errors") {
    Eigen::MatrixXd X(1, 2);
    X << 1, 2;
    Eigen::VectorXd y(1);
    y << 1;
    CHECK_THROWS_AS(fit_ridge(X, y, 1.0), Error);
    Eigen::MatrixXd X2(3, 1);
    X2 << 1, std::numeric_limits<double>::quiet_NaN(), 3;
    CHECK_THROWS_AS(fit_ridge(X2, Eigen::Vector3d(1, 2, 3), 1.0), Error);
    CHECK_THROWS_AS(fit_ridge(Eigen::MatrixXd::Random(3, 1), Eigen::Vector3d(1, 2, 3), 0.0), Error);
    CHECK_THROWS_AS(fit_ridge(Eigen::MatrixXd::Random(3, 1), Eigen::Vector2d(1, 2), 1.0), Error);
}

TEST_CASE("folds partition the rows with the first n % k folds larger") {
    const auto folds = make_folds(23, 5, 9);
    REQUIRE(folds.size() == 5);
    std::vector<std::size_t> sizes;
    std::vector<Eigen::Index> all;
    for (const auto& f : folds) {
        sizes.push_back(f.size());
        all.insert(all.end(), f.begin(), f.end());
    }
    CHECK(sizes == std::vector<std::size_t>{5, 5, 5, 4, 4});
    std::sort(all.begin(), all.end());
    std::vector<Eigen::Index> expected(23);
    std::iota(expected.begin(), expected.end(), Eigen::Index{0});
    CHECK(all == expected);
    CHECK(make_folds(23, 5, 9) == folds);
    CHECK(make_folds(23, 5, 10) != folds);
}

TEST_CASE("realizable target scores 1 in every fold") {
    Rng rng(4);
    Eigen::MatrixXd X = random_matrix(rng, 50, 3);
    const Eigen::VectorXd y = 2.0 * X.col(1).array() + 0.5;
    const auto cv = cross_validate(X, y, 5, 0, 1.0);
    CHECK(cv.fold_scores.size() == 5);
    CHECK(cv.mean_score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cross validation is deterministic and its mean is the fold average") {
    Rng rng(6);
    const auto X = random_matrix(rng, 60, 8);
    const Eigen::VectorXd y = X.col(0) + random_vector(rng, 60);
    const auto a = cross_validate(X, y, 5, 17, 1.0);
    const auto b = cross_validate(X, y, 5, 17, 1.0);
    CHECK(a == b);
    const double mean = std::accumulate(a.fold_scores.begin(), a.fold_scores.end(), 0.0) / 5.0;
    CHECK(std::abs(a.mean_score - mean) <= 1e-12);
    const auto c = cross_validate(X, y, 5, 18, 1.0);
    CHECK(std::abs(c.mean_score - a.mean_score) < 0.2);
}

TEST_CASE("cross validation reports constant validation folds as errors") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    y(0) = 1.0;
    CHECK_THROWS_AS(cross_validate(X, y, 5, 0, 1.0), Error);
}

TEST_CASE("planted direction at high snr is recovered from 25 problems") {
    PlantSpec spec;
    spec.n = 25;
    spec.d = 16;
    spec.snr = 10.0;
    spec.seed = 0;
    const auto planted = plant_direction_set(spec);
    const auto X = slice(planted.set, 0, -1);
    const auto y = label_vector(planted.labels, X.row_ids);
    CHECK(cross_validate(X, y, 5, 0, 1.0).mean_score >= 0.9);
}

TEST_CASE("sweep finds the planted cell") {
    PlantSpec spec;
    spec.n = 200;
    spec.d = 32;
    spec.L = 5;
    spec.P = 3;
    spec.target_cell = {3, -1};
    spec.snr = 2.0;
    const auto planted = plant_direction_set(spec);
    SweepConfig config;
    const auto grid = sweep_grid(planted.set, planted.labels, config);
    REQUIRE(grid.best.has_value());
    CHECK(grid.best->cell == CellKey{3, -1});
    CHECK(grid.cells.size() == 15);
    for (const auto& [key, cell] : grid.cells) {
        REQUIRE(cell.score.has_value());
        if (!(key == CellKey{3, -1})) CHECK(cell.score->mean_score < grid.best->mean_score);
    }
    CHECK(grid.refit_weights.size() == 15);
}

TEST_CASE("single-cell grid selects its only cell") {
    PlantSpec spec;
    spec.n = 40;
    spec.snr = 1.0;
    const auto planted = plant_direction_set(spec);
    const auto grid = sweep_grid(planted.set, planted.labels, SweepConfig{});
    REQUIRE(grid.cells.size() == 1);
    REQUIRE(grid.best.has_value());
    CHECK(grid.best->cell == CellKey{0, -1});
    CHECK(grid.best->mean_score == grid.cells.begin()->second.score->mean_score);
}

TEST_CASE("sweep lists missing labels") {
    PlantSpec spec;
    spec.n = 20;
    auto planted = plant_direction_set(spec);
    planted.labels.ratings.erase("p00003");
    planted.labels.ratings.erase("p00007");
    CHECK_THROWS_WITH_AS(sweep_grid(planted.set, planted.labels, SweepConfig{}),
                         "labels missing for 2 problem(s): p00003, p00007", Error);
}

TEST_CASE("select_best tie-break prefers the smaller layer then position nearer -1") {
    auto scored = [](double m) { return CellResult{CvScore{{m}, m, 0}, {}}; };
    std::map<CellKey, CellResult> cells{
        {{4, -1}, scored(0.5)}, {{2, -3}, scored(0.5)}, {{2, -2}, scored(0.5)}, {{1, -1}, scored(0.4)},
        {{0, -1}, CellResult{std::nullopt, "failed"}}};
    const auto best = select_best(cells);
    REQUIRE(best.has_value());
    CHECK(best->cell == CellKey{2, -2});
    CHECK_FALSE(select_best({{{0, -1}, CellResult{std::nullopt, "x"}}}).has_value());
}

TEST_CASE("failed cells are recorded without aborting the sweep") {
    ActivationSet set;
    set.model_id = "m";
    set.layer_ids = {0, 1};
    set.position_offsets = {-1};
    set.hidden_dim = 2;
    DifficultyLabels labels;
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        set.problem_ids.push_back("q" + std::to_string(i));
        labels.ratings["q" + std::to_string(i)] = rng.normal();
        set.data.push_back(static_cast<float>(rng.normal()));  // layer 0 varies
        set.data.push_back(static_cast<float>(rng.normal()));
        set.data.push_back(1.0f);  // layer 1 is constant, so its predictions cannot be ranked
        set.data.push_back(2.0f);
    }
    const auto grid = sweep_grid(set, labels, SweepConfig{});
    REQUIRE(grid.cells.size() == 2);
    CHECK(grid.cells.at({0, -1}).score.has_value());
    CHECK_FALSE(grid.cells.at({1, -1}).score.has_value());
    CHECK_FALSE(grid.cells.at({1, -1}).failure.empty());
    REQUIRE(grid.best.has_value());
    CHECK(grid.best->cell == CellKey{0, -1});
}

TEST_CASE("parallel sweep equals sequential sweep bitwise") {
    PlantSpec spec;
    spec.n = 80;
    spec.d = 12;
    spec.L = 4;
    spec.P = 3;
    spec.target_cell = {2, -2};
    spec.snr = 1.5;
    const auto planted = plant_direction_set(spec);
    SweepConfig seq;
    SweepConfig par;
    par.threads = 4;
    const auto a = sweep_grid(planted.set, planted.labels, seq);
    const auto b = sweep_grid(planted.set, planted.labels, par);
    CHECK(a.cells == b.cells);
    CHECK(a.best == b.best);
    std::ostringstream sa, sb;
    write_grid_csv(a, sa);
    write_grid_csv(b, sb);
    CHECK(sa.str() == sb.str());
    CHECK(weights_json(a.refit_weights) == weights_json(b.refit_weights));
}

TEST_CASE("full-data refit weights are invariant to row permutation") {
    PlantSpec spec;
    spec.n = 60;
    spec.d = 10;
    spec.snr = 2.0;
    const auto planted = plant_direction_set(spec);
    ActivationSet shuffled = planted.set;
    std::vector<std::size_t> order(spec.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(21);
    rng.shuffle(std::span(order));
    const std::size_t row = spec.d;
    for (std::size_t i = 0; i < spec.n; ++i) {
        shuffled.problem_ids[i] = planted.set.problem_ids[order[i]];
        std::copy_n(planted.set.data.begin() + static_cast<std::ptrdiff_t>(order[i] * row), row,
                    shuffled.data.begin() + static_cast<std::ptrdiff_t>(i * row));
    }
    const auto a = sweep_grid(planted.set, planted.labels, SweepConfig{});
    const auto b = sweep_grid(shuffled, planted.labels, SweepConfig{});
    const auto& wa = a.refit_weights.at({0, -1});
    const auto& wb = b.refit_weights.at({0, -1});
    CHECK((wa.weights - wb.weights).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(wa.bias - wb.bias) < 1e-9);
}

TEST_CASE("grid CSV round trip keeps failed cells empty") {
    ProbeGrid grid;
    grid.cells[{0, -1}] = CellResult{CvScore{{0.25, 0.5}, 0.375, 0}, {}};
    grid.cells[{1, -1}] = CellResult{std::nullopt, "constant fold"};
    grid.best = select_best(grid.cells);
    std::ostringstream out;
    write_grid_csv(grid, out);
    CHECK(out.str() == "layer,position,fold1,fold2,mean\n0,-1,0.25,0.5,0.375\n1,-1,,,\n");
    std::istringstream in(out.str());
    const auto back = read_grid_csv(in, "m", "d");
    CHECK(back.cells.at({0, -1}).score->fold_scores == std::vector<double>{0.25, 0.5});
    CHECK_FALSE(back.cells.at({1, -1}).score.has_value());
    CHECK(back.best == grid.best);
}

TEST_CASE("grid CSV reader rejects an inconsistent mean") {
    std::istringstream in("layer,position,fold1,fold2,mean\n0,-1,0.25,0.5,0.4\n");
    CHECK_THROWS_AS(read_grid_csv(in, "m", "d"), FormatError);
}

TEST_CASE("weights JSON round trip") {
    Rng rng(12);
    const auto X = random_matrix(rng, 15, 4);
    const auto y = random_vector(rng, 15);
    std::map<CellKey, ProbeWeights> m{{{2, -3}, fit_ridge(X, y, 0.7)}};
    m.begin()->second.layer = 2;
    m.begin()->second.position = -3;
    const auto back = parse_weights_json(weights_json(m));
    REQUIRE(back.size() == 1);
    const auto& a = m.begin()->second;
    const auto& b = back.at({2, -3});
    CHECK(a.weights == b.weights);
    CHECK(a.feature_means == b.feature_means);
    CHECK(a.feature_scales == b.feature_scales);
    CHECK(a.bias == b.bias);
    CHECK(a.ridge_lambda == b.ridge_lambda);
}
