#pragma once

// Legendre polynomials and Gauss-Legendre rules on [-1, 1].

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace tmslab {

// P_ell(y) via the three-term recurrence
//   (k+1) P_{k+1}(y) = (2k+1) y P_k(y) - k P_{k-1}(y).
// The recurrence is forward-stable on [-1, 1].
inline double legendre(int ell, double y) {
    if (ell < 0)
        throw std::domain_error("legendre: ell must be >= 0");
    if (!(y >= -1.0 && y <= 1.0))
        throw std::domain_error("legendre: argument outside [-1, 1]");
    if (ell == 0) return 1.0;
    if (ell == 1) return y;
    double pkm1 = 1.0, pk = y;
    for (int k = 1; k < ell; ++k) {
        double pkp1 = ((2 * k + 1) * y * pk - k * pkm1) / (k + 1);
        pkm1 = pk;
        pk = pkp1;
    }
    return pk;
}

struct QuadratureRule {
    std::vector<double> x;  // nodes in (-1, 1), increasing
    std::vector<double> w;  // positive weights, sum = 2
};

// Gauss-Legendre rule by Newton iteration on P_n roots. Deterministic;
// nodes converge to machine precision from the Chebyshev-like initial guess.
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    QuadratureRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // initial guess for the i-th root in decreasing order
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // evaluate P_n and P_n' at x
            double p0 = 1.0, p1 = x;
            for (int k = 1; k < n; ++k) {
                double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                // one cleanup pass keeps nodes symmetric to full precision
                double q0 = 1.0, q1 = x;
                for (int k = 1; k < n; ++k) {
                    double q2 = ((2 * k + 1) * x * q1 - k * q0) / (k + 1);
                    q0 = q1;
                    q1 = q2;
                }
                dp = n * (x * q1 - q0) / (x * x - 1.0);
                x -= q1 / dp;
                break;
            }
        }
        rule.x[n - 1 - i] = x;
        rule.x[i] = -x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.w[i] = w;
        rule.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.x[n / 2] = 0.0;
    return rule;
}

}  // namespace tmslab
