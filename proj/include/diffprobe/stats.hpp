#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "diffprobe/error.hpp"

namespace diffprobe {

/// Average ranks (1-based); tied values share the mean of their positions.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> mid_ranks(
    const Eigen::MatrixBase<Derived>& values) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i + 1;
        while (j < n && values(order[j]) == values(order[i])) ++j;
        // positions i..j-1 hold ranks i+1..j
        const Scalar rank = static_cast<Scalar>(i + j + 1) / Scalar(2);
        for (Eigen::Index t = i; t < j; ++t) ranks(order[t]) = rank;
        i = j;
    }
    return ranks;
}

/// Pearson correlation; throws if either input has zero variance.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::MatrixBase<DerivedA>& a,
                                  const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size()) throw Error("correlation inputs differ in length");
    if (a.size() < 2) throw Error("correlation needs at least 2 observations");
    const auto ca = (a.array() - a.mean()).matrix().eval();
    const auto cb = (b.array() - b.mean()).matrix().eval();
    const Scalar saa = ca.squaredNorm();
    const Scalar sbb = cb.squaredNorm();
    if (saa == Scalar(0) || sbb == Scalar(0)) throw Error("correlation undefined for constant input");
    const Scalar r = ca.dot(cb) / std::sqrt(saa * sbb);
    return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Spearman rank correlation with mid-rank tie handling.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar spearman(const Eigen::MatrixBase<DerivedA>& a,
                                   const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) throw Error("rank correlation inputs differ in length");
    if (a.size() < 2) throw Error("rank correlation needs at least 2 observations");
    const auto is_constant = [](const auto& v) { return (v.array() == v(0)).all(); };
    if (is_constant(a) || is_constant(b))
        throw Error("rank correlation undefined for constant input");
    return pearson(mid_ranks(a), mid_ranks(b));
}

/// Population (ddof = 0) standard deviation.
template <typename Derived>
typename Derived::Scalar population_std(const Eigen::MatrixBase<Derived>& v) {
    return std::sqrt((v.array() - v.mean()).square().mean());
}

/// Simple least squares y = intercept + slope * x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double ss_res = 0.0;
    double ss_tot = 0.0;
    double sxx = 0.0;
};

LineFit fit_line(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

}  // namespace diffprobe
