#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pathcbm {

namespace detail {

// Regularized lower incomplete gamma P(a, x) by series expansion.
// Converges for x < a + 1.
inline double gamma_p_series(double a, double x) {
    const double eps = 1e-16;
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 1000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * eps)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("gamma_p_series: no convergence");
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
// Converges for x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
    const double eps = 1e-16;
    const double fpmin = std::numeric_limits<double>::min() / eps;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw std::runtime_error("gamma_q_contfrac: no convergence");
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
// Series / continued-fraction switch at x = a + 1.
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_q: require a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) { return 1.0 - gamma_q(a, x); }

// Survival function of the chi-square distribution with df degrees of freedom.
inline double chi_square_sf(double statistic, double df) {
    if (statistic < 0.0 || df <= 0.0)
        throw std::invalid_argument("chi_square_sf: require statistic >= 0, df > 0");
    return gamma_q(df / 2.0, statistic / 2.0);
}

}  // namespace pathcbm
