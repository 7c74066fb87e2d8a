#include <doctest.h>

#include <cmath>
#include <sstream>

#include "diffprobe/error.hpp"
#include "diffprobe/scaling.hpp"
#include "diffprobe/synthetic.hpp"
#include "oracles.hpp"

using namespace diffprobe;

namespace {

std::vector<ScalingPoint> exact_points(double C, double alpha, const std::vector<double>& sizes) {
    std::vector<ScalingPoint> pts;
    for (std::size_t i = 0; i < sizes.size(); ++i)
        pts.push_back({"m" + std::to_string(i), sizes[i], 1.0 - C * std::pow(sizes[i], -alpha)});
    return pts;
}

}  // namespace

TEST_CASE("noiseless power law is recovered exactly") {
    const auto fit = fit_power_law(exact_points(2.0, 0.05, {1e9, 7e9, 7e10}));
    CHECK(std::abs(fit.alpha - 0.05) <= 1e-6);
    CHECK(fit.C == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.r2_log >= 1 - 1e-9);
    CHECK(fit.n_points == 3);
}

TEST_CASE("fit_power_law errors") {
    CHECK_THROWS_WITH_AS(fit_power_law(exact_points(2.0, 0.05, {1e9, 7e9})),
                         doctest::Contains("insufficient points"), Error);
    CHECK_THROWS_WITH_AS(fit_power_law(exact_points(2.0, 0.05, {1e9, 1e9, 1e9})),
                         doctest::Contains("insufficient points"), Error);
    std::vector<ScalingPoint> ceiling{{"a", 1e9, 1.0}, {"b", 2e9, 1.0}, {"c", 3e9, 1.2}};
    CHECK_THROWS_WITH_AS(fit_power_law(ceiling), "degenerate: all performances at ceiling", Error);
    std::vector<ScalingPoint> bad{{"a", -1, 0.5}, {"b", 2e9, 0.5}, {"c", 3e9, 0.6}};
    CHECK_THROWS_AS(fit_power_law(bad), Error);
}

TEST_CASE("alpha equals the oracle log-log slope on noisy points") {
    const auto sizes = log_spaced(1e8, 1e11, 20);
    const auto pts = plant_scaling_points(0.5, 0.045, sizes, 0.05, 0);
    std::vector<double> lx, ly;
    for (const auto& p : pts) {
        lx.push_back(std::log(p.n_params));
        ly.push_back(std::log(1.0 - p.perf));
    }
    CHECK(fit_power_law(pts).alpha == doctest::Approx(-oracle::ols_slope(lx, ly)).epsilon(1e-10));
}

TEST_CASE("predict_perf plug-in values") {
    ScalingFit fit;
    fit.C = 2.0;
    fit.alpha = 0.05;
    CHECK(predict_perf(fit, 1.0) == -1.0);
    const double n = std::pow(2.0 / 0.11, 1.0 / 0.05);
    CHECK(predict_perf(fit, n) == doctest::Approx(0.89).epsilon(1e-12));
    fit.alpha = 0.0;
    CHECK(predict_perf(fit, 1e3) == -1.0);
    CHECK(predict_perf(fit, 1e12) == -1.0);
    fit.C = 0.3;
    CHECK(predict_perf(fit, 5e9) == doctest::Approx(0.7));
}

TEST_CASE("multiplying N by k scales the gap by k^-alpha") {
    ScalingFit fit;
    fit.C = 0.7;
    fit.alpha = 0.08;
    for (double n : {1e8, 3e9, 7e10})
        for (double k : {2.0, 10.0}) {
            const double g1 = 1.0 - predict_perf(fit, n);
            const double g2 = 1.0 - predict_perf(fit, k * n);
            CHECK(g2 == doctest::Approx(g1 * std::pow(k, -fit.alpha)).epsilon(1e-12));
        }
}

TEST_CASE("points at or above the ceiling are clipped to epsilon") {
    auto pts = exact_points(0.5, 0.05, {1e9, 1e10, 1e11});
    pts.push_back({"perfect", 1e12, 1.0});
    const auto fit = fit_power_law(pts, 1e-6);
    std::vector<double> lx, ly;
    for (const auto& p : pts) {
        lx.push_back(std::log(p.n_params));
        ly.push_back(std::log(std::max(1.0 - p.perf, 1e-6)));
    }
    CHECK(fit.alpha == doctest::Approx(-oracle::ols_slope(lx, ly)).epsilon(1e-10));
    CHECK(std::isfinite(fit.C));
}

TEST_CASE("points CSV and fit JSON") {
    std::istringstream in("model_id,n_params,perf\nsmall,1e9,0.5\nmid,8e9,0.6\nbig,7e10,0.7\n");
    const auto pts = read_scaling_points_csv(in);
    REQUIRE(pts.size() == 3);
    CHECK(pts[1].n_params == 8e9);
    std::ostringstream out;
    write_scaling_points_csv(pts, out);
    std::istringstream again(out.str());
    const auto back = read_scaling_points_csv(again);
    CHECK(back[2].perf == 0.7);
    const std::string json = scaling_fit_json(fit_power_law(pts));
    CHECK(json.find("\"alpha\"") != std::string::npos);
    CHECK(json.find("\"r2_log\"") != std::string::npos);
    std::ostringstream plot;
    write_scaling_plot_csv(fit_power_law(pts), pts, plot, 5);
    CHECK(plot.str().rfind("kind,n_params,perf,fitted\n", 0) == 0);
}
