#include <doctest.h>

#include <cmath>

#include "diffprobe/error.hpp"
#include "diffprobe/probe.hpp"
#include "diffprobe/scaling.hpp"
#include "diffprobe/stats.hpp"
#include "diffprobe/synthetic.hpp"

using namespace diffprobe;

TEST_CASE("same spec gives identical bytes") {
    PlantSpec spec;
    spec.n = 30;
    spec.d = 8;
    spec.L = 2;
    spec.P = 3;
    spec.target_cell = {1, -2};
    spec.seed = 99;
    const auto a = plant_direction_set(spec);
    const auto b = plant_direction_set(spec);
    CHECK(encode_activation_set(a.set) == encode_activation_set(b.set));
    CHECK(a.labels.ratings == b.labels.ratings);
    CHECK(a.direction == b.direction);
    spec.seed = 100;
    CHECK(encode_activation_set(plant_direction_set(spec).set) != encode_activation_set(a.set));
}

TEST_CASE("planted direction is a unit vector and carries the label signal") {
    PlantSpec spec;
    spec.n = 400;
    spec.d = 6;
    spec.snr = 3.0;
    const auto p = plant_direction_set(spec);
    CHECK(std::abs(p.direction.norm() - 1.0) < 1e-12);
    const auto X = slice(p.set, 0, -1);
    const auto y = label_vector(p.labels, X.row_ids);
    const Eigen::VectorXd proj = X.values * p.direction;
    // population correlation snr / sqrt(1 + snr^2) = 0.949
    CHECK(pearson(proj, y) == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(0.03));
}

TEST_CASE("plant spec validation") {
    PlantSpec spec;
    spec.target_cell = {1, -1};
    CHECK_THROWS_AS(plant_direction_set(spec), Error);
    spec.target_cell = {0, -1};
    spec.snr = 0.0;
    CHECK_THROWS_AS(plant_direction_set(spec), Error);
}

TEST_CASE("noiseless scaling points invert exactly") {
    const auto sizes = log_spaced(1e8, 1e11, 6);
    CHECK(sizes.front() == doctest::Approx(1e8));
    CHECK(sizes.back() == doctest::Approx(1e11));
    const auto fit = fit_power_law(plant_scaling_points(0.5, 0.045, sizes, 0.0, 3));
    CHECK(std::abs(fit.alpha - 0.045) <= 1e-6);
    CHECK(std::abs(fit.C - 0.5) <= 1e-6);
    for (const auto& p : plant_scaling_points(0.3, 0.0, sizes, 0.0, 0)) CHECK(p.perf == doctest::Approx(0.7));
}

TEST_CASE("checkpoint planting follows the drift schedule") {
    CheckpointPlantSpec spec;
    spec.n = 20;
    spec.d = 4;
    spec.L = 4;
    spec.P = 1;
    spec.snr = 2.0;
    spec.steps = 3;
    spec.datasets = {{"gsm", LabelSource::human, 1.0, std::nullopt}, {"math", LabelSource::llm, 0.5, 2}};
    const auto series = plant_checkpoint_series(spec);
    CHECK(series.steps == std::vector<int>{0, 1, 2, 3});
    CHECK(series.sets.size() == 4);
    CHECK(series.labels.size() == 2);
    CHECK(series.labels.at("math").source == LabelSource::llm);
    CHECK(planted_snr(spec, spec.datasets[1], 3, 0) == 2.0 * 0.125);
    CHECK(planted_snr(spec, spec.datasets[1], 3, 2) == 2.0);
    CHECK(planted_snr(spec, spec.datasets[0], 3, 0) == 2.0);
    const auto again = plant_checkpoint_series(spec);
    CHECK(encode_activation_set(again.sets[2]) == encode_activation_set(series.sets[2]));
}

TEST_CASE("synth spec JSON parsing") {
    const auto d = parse_synth_spec(R"({"kind":"direction","n":50,"d":8,"L":2,"P":2,"target_layer":1,)"
                                    R"("target_position":-2,"snr":3,"seed":4})");
    const auto& ps = std::get<PlantSpec>(d);
    CHECK(ps.n == 50);
    CHECK(ps.target_cell == CellKey{1, -2});
    CHECK(ps.snr == 3.0);
    CHECK(std::holds_alternative<ScalingPlantSpec>(
        parse_synth_spec(R"({"kind":"scaling","C":0.5,"alpha":0.045,"sizes":[1e9,2e9,3e9]})")));
    const auto c = parse_synth_spec(
        R"({"kind":"checkpoints","steps":4,"datasets":[{"name":"math","source":"llm","drift":0.9,"layer_limit":2}]})");
    const auto& cs = std::get<CheckpointPlantSpec>(c);
    CHECK(cs.steps == 4);
    CHECK(cs.datasets.at(0).layer_limit == std::optional<int>(2));
    CHECK_THROWS_AS(parse_synth_spec(R"({"kind":"direction","snrr":3})"), Error);
    CHECK_THROWS_AS(parse_synth_spec(R"({"kind":"nope"})"), Error);
    CHECK_THROWS_AS(parse_synth_spec(R"({"n":3})"), Error);
}
