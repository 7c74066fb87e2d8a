#include <doctest.h>

#include <vector>

#include "diffprobe/error.hpp"
#include "diffprobe/rng.hpp"
#include "diffprobe/stats.hpp"
#include "oracles.hpp"

using namespace diffprobe;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> std_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("spearman of identical and reversed order") {
    CHECK(spearman(vec({1, 2, 3}), vec({10, 20, 30})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(spearman(vec({1, 2, 3}), vec({3, 2, 1})) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("spearman with ties uses mid-ranks") {
    const auto a = vec({1, 2, 2, 4});
    const auto b = vec({1, 3, 2, 4});
    CHECK(mid_ranks(a) == vec({1, 2.5, 2.5, 4}));
    const double expected = oracle::textbook_pearson({1, 2.5, 2.5, 4}, {1, 3, 2, 4});
    CHECK(spearman(a, b) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(expected == doctest::Approx(0.9486832980505138));
}

TEST_CASE("spearman rejects constant and mismatched input") {
    CHECK_THROWS_WITH_AS(spearman(vec({1, 1, 1}), vec({1, 2, 3})), "rank correlation undefined for constant input",
                         Error);
    CHECK_THROWS_WITH_AS(spearman(vec({1, 2, 3}), vec({5, 5, 5})), "rank correlation undefined for constant input",
                         Error);
    CHECK_THROWS_AS(spearman(vec({1, 2}), vec({1, 2, 3})), Error);
    CHECK_THROWS_AS(spearman(vec({1}), vec({1})), Error);
}

TEST_CASE("spearman matches brute-force oracle on random tied vectors") {
    Rng rng(0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(60));
        Eigen::VectorXd a(n), b(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            a(i) = static_cast<double>(rng.below(8));  // heavy ties
            b(i) = rng.normal();
        }
        if ((a.array() == a(0)).all()) continue;
        const double ours = spearman(a, b);
        CHECK(ours == doctest::Approx(oracle::brute_spearman(std_vec(a), std_vec(b))).epsilon(1e-12));
        CHECK(ours == doctest::Approx(spearman(b, a)).epsilon(1e-14));
        CHECK(ours >= -1.0);
        CHECK(ours <= 1.0);
    }
}

TEST_CASE("spearman is invariant to strictly increasing transforms") {
    Rng rng(5);
    Eigen::VectorXd a(50), b(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
        a(i) = rng.normal();
        b(i) = a(i) + rng.normal();
    }
    const Eigen::VectorXd ta = a.unaryExpr([](double v) { return std::exp(v); }).array() * 3.0 + 1.0;
    const Eigen::VectorXd tb = b.array().cube();
    CHECK(spearman(a, b) == doctest::Approx(spearman(ta, tb)).epsilon(1e-14));
}

TEST_CASE("population_std uses n in the denominator") {
    CHECK(population_std(vec({1, -1})) == 1.0);
    CHECK(population_std(vec({2, 4, 4, 4, 5, 5, 7, 9})) == doctest::Approx(2.0));
}

TEST_CASE("fit_line recovers an exact line") {
    const auto x = vec({0, 1, 2, 3});
    const auto y = vec({1, 3, 5, 7});
    const LineFit f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.ss_res == doctest::Approx(0.0));
    CHECK(f.sxx == doctest::Approx(5.0));
}

TEST_CASE("incomplete beta boundary and symmetry") {
    CHECK(incomplete_beta(2, 3, 0) == 0.0);
    CHECK(incomplete_beta(2, 3, 1) == 1.0);
    CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(incomplete_beta(2.5, 4, 0.3) + incomplete_beta(4, 2.5, 0.7) == doctest::Approx(1.0).epsilon(1e-13));
    // I_x(a, 1) = x^a
    CHECK(incomplete_beta(3.5, 1, 0.6) == doctest::Approx(std::pow(0.6, 3.5)).epsilon(1e-13));
}

TEST_CASE("student t two-sided p matches numerical integration") {
    for (double dof : {1.0, 2.0, 5.0, 18.0, 65.0}) {
        for (double t : {0.0, 0.3, 1.0, 2.1, 4.5, -2.5}) {
            CHECK(student_t_two_sided_p(t, dof) ==
                  doctest::Approx(oracle::t_two_sided_p_simpson(t, dof)).epsilon(1e-6));
        }
    }
    // Cauchy closed form
    CHECK(student_t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}
