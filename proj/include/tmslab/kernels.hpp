#pragma once

// Angular sector kernels and the closed-form momentum-ball integrals that
// drive the shell asymptotics of point-interaction domains.

#include <cmath>
#include <stdexcept>

#include "tmslab/legendre.hpp"

namespace tmslab {

namespace detail {

inline const QuadratureRule& panel_rule_16() {
    static const QuadratureRule rule = gauss_legendre(16);
    return rule;
}

// Int_{-1}^{1} P_ell(y) / (a + b y)^power dy by composite 16-point Gauss,
// doubling the uniform subdivision until the change is < 1e-12 of the
// unprojected mass Int |1/(a+by)^power| dy (known in closed form). The
// integrand is analytic on [-1,1] (a > |b| is guaranteed upstream), so
// doubling converges geometrically; the mass anchor matters because the
// projected value can be many orders below the mass through Legendre
// cancellation, where a value-relative test would chase roundoff forever.
inline double angular_integral_adaptive(int ell, double a, double b, int power) {
    const QuadratureRule& rule = panel_rule_16();
    const double mass = (power == 1) ? std::log1p(2.0 * b / (a - b)) / b
                                     : 2.0 / ((a - b) * (a + b));
    double prev = 0.0;
    for (int panels = 1; panels <= 4096; panels *= 2) {
        double acc = 0.0;
        const double h = 2.0 / panels;
        for (int k = 0; k < panels; ++k) {
            const double lo = -1.0 + h * k;
            const double mid = lo + 0.5 * h, hw = 0.5 * h;
            for (int j = 0; j < 16; ++j) {
                const double y = mid + hw * rule.x[j];
                const double den = a + b * y;
                const double f = (power == 1) ? 1.0 / den : 1.0 / (den * den);
                acc += hw * rule.w[j] * legendre(ell, y) * f;
            }
        }
        if (panels > 1 && std::abs(acc - prev) <= 1e-12 * mass) return acc;
        prev = acc;
    }
    return prev;
}

// Int_0^theta sin^n t dt by the Wallis recursion.
inline double wallis_sin_integral(int n, double theta) {
    const double s = std::sin(theta), c = std::cos(theta);
    double even = theta;    // n = 0
    double odd = 1.0 - c;   // n = 1
    if (n == 0) return even;
    if (n == 1) return odd;
    double val = 0.0;
    double spow = 1.0;  // sin^(k-1) built incrementally
    for (int k = 2; k <= n; ++k) {
        spow *= s;
        double& prev = (k % 2 == 0) ? even : odd;
        val = (-spow * c + (k - 1) * prev) / k;
        prev = val;
    }
    return val;
}

}  // namespace detail

// Sector kernel
//   angular_kernel(ell, mu, lambda, r, rp, power)
//     = 2 pi Int_{-1}^{1} P_ell(y) rp^2 / (r^2 + rp^2 + mu r rp y + lambda)^power dy.
// Closed form for ell = 0, power = 1; adaptive Gauss quadrature otherwise.
inline double angular_kernel(int ell, double mu, double lambda, double r, double rp,
                             int power) {
    if (power != 1 && power != 2)
        throw std::invalid_argument("angular_kernel: power must be 1 or 2");
    if (ell < 0) throw std::invalid_argument("angular_kernel: ell must be >= 0");
    if (!(mu > 0.0 && mu < 2.0))
        throw std::invalid_argument("angular_kernel: need mu in (0, 2)");
    if (!(r > 0.0 && rp > 0.0 && lambda > 0.0))
        throw std::invalid_argument("angular_kernel: need r, rp, lambda > 0");
    const double a = r * r + rp * rp + lambda;
    const double b = mu * r * rp;  // a > b since r^2 + rp^2 >= 2 r rp > mu r rp
    if (ell == 0 && power == 1) {
        // 2 pi rp/(mu r) * ln((a+b)/(a-b)); log1p keeps accuracy as b/a -> 0
        return 2.0 * M_PI * (rp / (mu * r)) * std::log1p(2.0 * b / (a - b));
    }
    return 2.0 * M_PI * rp * rp * detail::angular_integral_adaptive(ell, a, b, power);
}

// Int_{|p2| < R} dp2 / (p1^2 + p2^2 + mu p1.p2 + lambda),  the pre-limit
// closed form behind the shell asymptotics 4 pi R - 2 pi^2 sqrt(nu p1^2 + lambda) + o(1).
// With b = mu p1, c = p1^2 + lambda, D = 2 sqrt(nu p1^2 + lambda):
//   I(R) = 2 pi R + pi (R^2 + c - b^2/2) L / b
//          - pi D [ atan((2R+b)/D) + atan((2R-b)/D) ],
//   L = ln( (R^2 + bR + c) / (R^2 - bR + c) ).
// For mu p1 R < 1e-6 (p1^2 + lambda) the formula degenerates (0/0 in L/b) and
// a 3-term Taylor expansion in b is used instead; at p1 = 0 exactly it
// reduces to 4 pi (R - sqrt(lambda) atan(R/sqrt(lambda))).
inline double truncated_ball_integral(double p1, double mu, double nu, double lambda,
                                      double R) {
    if (!(R > 0.0)) throw std::invalid_argument("truncated_ball_integral: need R > 0");
    if (!(lambda > 0.0))
        throw std::invalid_argument("truncated_ball_integral: need lambda > 0");
    if (!(mu > 0.0 && mu < 2.0))
        throw std::invalid_argument("truncated_ball_integral: need mu in (0, 2)");
    if (p1 < 0.0) throw std::invalid_argument("truncated_ball_integral: need p1 >= 0");
    const double b = mu * p1;
    const double c = p1 * p1 + lambda;
    if (b * R < 1e-6 * c) {
        // I0 + b^2 I2 + b^4 I4 with I_k the Taylor moments of the y-average:
        //   I0 = 4 pi (R - sqrt(c) atan(R/sqrt(c)))
        //   I2 = (4 pi / 3) c^{-1/2} Int_0^theta sin^4
        //   I4 = (4 pi / 5) c^{-3/2} Int_0^theta (sin^6 - sin^8),  theta = atan(R/sqrt(c))
        const double sc = std::sqrt(c);
        const double theta = std::atan(R / sc);
        const double i0 = 4.0 * M_PI * (R - sc * theta);
        const double i2 = (4.0 * M_PI / 3.0) / sc * detail::wallis_sin_integral(4, theta);
        const double i4 = (4.0 * M_PI / 5.0) / (c * sc) *
                          (detail::wallis_sin_integral(6, theta) -
                           detail::wallis_sin_integral(8, theta));
        return i0 + b * b * i2 + b * b * b * b * i4;
    }
    const double D = 2.0 * std::sqrt(nu * p1 * p1 + lambda);
    const double L = std::log1p(2.0 * b * R / (R * R - b * R + c));
    return 2.0 * M_PI * R + M_PI * (R * R + c - 0.5 * b * b) * L / b -
           M_PI * D * (std::atan((2.0 * R + b) / D) + std::atan((2.0 * R - b) / D));
}

// Int_{R^3} dp2 / (p1^2 + p2^2 + mu p1.p2 + lambda)^2 = pi^2 / sqrt(nu p1^2 + lambda).
inline double squared_denominator_integral(double p1, double nu, double lambda) {
    const double s = nu * p1 * p1 + lambda;
    if (!(s > 0.0))
        throw std::invalid_argument("squared_denominator_integral: need nu p1^2 + lambda > 0");
    return M_PI * M_PI / std::sqrt(s);
}

}  // namespace tmslab
