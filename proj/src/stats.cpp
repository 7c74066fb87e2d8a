#include "diffprobe/stats.hpp"

#include <limits>

namespace diffprobe {

LineFit fit_line(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.size() != y.size()) throw Error("regression inputs differ in length");
    if (x.size() < 2) throw Error("regression needs at least 2 observations");
    const Eigen::VectorXd cx = x.array() - x.mean();
    const Eigen::VectorXd cy = y.array() - y.mean();
    LineFit fit;
    fit.sxx = cx.squaredNorm();
    if (fit.sxx == 0.0) throw Error("regressor is constant");
    fit.slope = cx.dot(cy) / fit.sxx;
    fit.intercept = y.mean() - fit.slope * x.mean();
    fit.ss_tot = cy.squaredNorm();
    fit.ss_res = (cy - fit.slope * cx).squaredNorm();
    return fit;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta needs a, b > 0");
    if (x < 0.0 || x > 1.0 || std::isnan(x)) throw Error("incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (!(dof > 0.0)) throw Error("t distribution needs positive degrees of freedom");
    if (std::isnan(t)) throw Error("t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    const double t2 = t * t;
    // P(|T| >= |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2); the complementary form
    // keeps precision when t is small.
    if (t2 < dof) return 1.0 - incomplete_beta(0.5, 0.5 * dof, t2 / (dof + t2));
    return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t2));
}

}  // namespace diffprobe
