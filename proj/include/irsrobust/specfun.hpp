#ifndef IRSROBUST_SPECFUN_HPP
#define IRSROBUST_SPECFUN_HPP

#include <cmath>
#include <limits>
#include <stdexcept>

namespace irsrobust {

/// Regularized lower incomplete gamma P(a, x), series for x < a+1 and
/// Lentz continued fraction otherwise.
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // continued fraction for Q(a, x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

/// log pdf of the chi-square distribution with 2a degrees of freedom,
/// reparametrized: d/dx P(a, x/2).
inline double gamma_p_dx_half(double a, double x) {
    // derivative of P(a, x/2) w.r.t. x
    return 0.5 * std::exp((a - 1.0) * std::log(x / 2.0) - x / 2.0 - std::lgamma(a));
}

/// Inverse CDF of the chi-square distribution with `dof` degrees of
/// freedom: returns x with P(dof/2, x/2) = p. Newton iteration with
/// bisection safeguard, absolute tolerance 1e-12 on the CDF.
inline double chi2_inv_cdf(double dof, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("chi2_inv_cdf: p outside [0,1)");
    if (dof <= 0.0) throw std::invalid_argument("chi2_inv_cdf: dof must be positive");
    if (p == 0.0) return 0.0;
    const double a = dof / 2.0;

    // bracket the root
    double lo = 0.0;
    double hi = std::max(dof, 1.0);
    while (gamma_p(a, hi / 2.0) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("chi2_inv_cdf: bracketing failed");
    }

    // Wilson-Hilferty starting point
    double x = dof * std::pow(1.0 - 2.0 / (9.0 * dof) + 1.2 * (p - 0.5) * std::sqrt(2.0 / (9.0 * dof)), 3);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

    for (int it = 0; it < 200; ++it) {
        const double f = gamma_p(a, x / 2.0) - p;
        if (std::abs(f) < 1e-12) return x;
        if (f > 0.0) hi = x; else lo = x;
        const double dfdx = gamma_p_dx_half(a, x);
        double step = (dfdx > 0.0) ? f / dfdx : 0.0;
        double xn = x - step;
        if (!(xn > lo && xn < hi) || step == 0.0) xn = 0.5 * (lo + hi);
        x = xn;
    }
    return x;
}

}  // namespace irsrobust

#endif
