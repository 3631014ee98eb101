#pragma once

// Two-body point interaction at a fixed shift lambda > 0.
//
// Domain elements decompose as g = f + eta/(p^2+lambda)^2 + xi/(p^2+lambda);
// the extension family is labelled either by the charge coupling tau (one
// self-adjoint extension per tau in R, plus the Friedrichs extension at
// "tau = infinity") or equivalently by the inverse scattering parameter
// alpha with tau = 2 sqrt(lambda) (4 pi alpha + sqrt(lambda)).

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tmslab/grid.hpp"

namespace tmslab {

inline double tau_from_alpha(double alpha, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("tau_from_alpha: need lambda > 0");
    const double sl = std::sqrt(lambda);
    return 2.0 * sl * (4.0 * M_PI * alpha + sl);
}

inline double alpha_from_tau(double tau, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("alpha_from_tau: need lambda > 0");
    return (tau - 2.0 * lambda) / (8.0 * M_PI * std::sqrt(lambda));
}

// Extension label. The Friedrichs extension is an explicit sentinel state,
// not a large float in alpha.
class ExtensionParam2B {
  public:
    static ExtensionParam2B regular(double alpha, double lambda) {
        check_lambda(lambda);
        ExtensionParam2B e;
        e.alpha_ = alpha;
        e.lambda_ = lambda;
        e.friedrichs_ = false;
        return e;
    }
    static ExtensionParam2B friedrichs(double lambda) {
        check_lambda(lambda);
        ExtensionParam2B e;
        e.lambda_ = lambda;
        e.friedrichs_ = true;
        return e;
    }

    bool is_friedrichs() const { return friedrichs_; }
    double lambda() const { return lambda_; }
    double alpha() const {
        if (friedrichs_)
            throw std::logic_error("ExtensionParam2B: Friedrichs extension has no alpha");
        return alpha_;
    }
    // tau = infinity identifies the Friedrichs extension in the charge
    // parametrization; this is the honest value, not a sentinel float.
    double tau() const {
        if (friedrichs_) return std::numeric_limits<double>::infinity();
        return tau_from_alpha(alpha_, lambda_);
    }
    // Scattering length -1/(4 pi alpha); the Friedrichs extension and
    // alpha = 0 (infinite scattering length / unitarity) have none.
    std::optional<double> scattering_length() const {
        if (friedrichs_ || alpha_ == 0.0) return std::nullopt;
        return -1.0 / (4.0 * M_PI * alpha_);
    }

  private:
    static void check_lambda(double lambda) {
        if (!(lambda > 0.0))
            throw std::invalid_argument("ExtensionParam2B: need lambda > 0");
    }
    double alpha_ = 0.0;
    double lambda_ = 1.0;
    bool friedrichs_ = false;
};

// Singular part of a domain element: g_sing = eta/(p^2+lambda)^2 + xi/(p^2+lambda).
struct SingularPair2B {
    cplx xi{0.0, 0.0};
    cplx eta{0.0, 0.0};
    double lambda = 1.0;
};

// Deficiency element u_xi(p) = xi/(p^2+lambda), and its exact L2 norm
// ||u_xi||^2 = |xi|^2 pi^2 / sqrt(lambda).
inline cplx u_xi_hat(cplx xi, double lambda, double p) {
    if (!(lambda > 0.0)) throw std::invalid_argument("u_xi_hat: need lambda > 0");
    return xi / (p * p + lambda);
}

inline double u_xi_norm_sq(cplx xi, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("u_xi_norm_sq: need lambda > 0");
    return std::norm(xi) * M_PI * M_PI / std::sqrt(lambda);
}

// Int_{|p|<R} g_sing dp in closed form (the regular part f integrates to o(1)
// and is excluded by design):
//   xi-part:  4 pi xi (R - sqrt(lambda) atan(R/sqrt(lambda)))
//   eta-part: -2 pi eta R/(R^2+lambda) + (2 pi eta/sqrt(lambda)) atan(R/sqrt(lambda))
inline cplx shell_integral_2b(const SingularPair2B& pair, double R) {
    if (!(R > 0.0)) throw std::invalid_argument("shell_integral_2b: need R > 0");
    const double lam = pair.lambda;
    const double sl = std::sqrt(lam);
    const double at = std::atan(R / sl);
    const cplx xi_part = 4.0 * M_PI * pair.xi * (R - sl * at);
    const cplx eta_part =
        pair.eta * (-2.0 * M_PI * R / (R * R + lam) + 2.0 * M_PI / sl * at);
    return xi_part + eta_part;
}

// Large-R expansion Int_{|p|<R} g_sing = linear * R + constant + o(1).
struct AsymptoticCoeffs2B {
    cplx linear;    // 4 pi xi
    cplx constant;  // -2 pi^2 sqrt(lambda) xi + (pi^2/sqrt(lambda)) eta
};

inline AsymptoticCoeffs2B asymptotic_coeffs_2b(const SingularPair2B& pair) {
    const double sl = std::sqrt(pair.lambda);
    return {4.0 * M_PI * pair.xi,
            -2.0 * M_PI * M_PI * sl * pair.xi + M_PI * M_PI / sl * pair.eta};
}

// Boundary-condition residual |eta - tau xi| of the extension labelled by
// ext; for the Friedrichs extension the domain carries no singular charge,
// so the residual is |xi| itself.
inline double tms_check_2b(const SingularPair2B& pair, const ExtensionParam2B& ext) {
    if (ext.is_friedrichs()) return std::abs(pair.xi);
    const double tau = tau_from_alpha(ext.alpha(), ext.lambda());
    return std::abs(pair.eta - tau * pair.xi);
}

// Charge extraction from the shell ladder: fit
//   shell(R)/(4 pi R) = xi + c1/R + c2/R^2
// by least squares over the ladder, report xi and the decay rate of the
// leftover correction (log-log slope of |shell/(4 pi R) - xi|, ~ -1).
struct ChargeExtract2B {
    cplx xi_est;
    double rate;
};

inline ChargeExtract2B charge_extract_2b(const SingularPair2B& pair,
                                         const std::vector<double>& R_ladder) {
    if (R_ladder.size() < 4)
        throw std::invalid_argument("charge_extract_2b: need at least 4 ladder points");
    const int n = static_cast<int>(R_ladder.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXcd b(n);
    for (int i = 0; i < n; ++i) {
        const double R = R_ladder[i];
        A(i, 0) = 1.0;
        A(i, 1) = 1.0 / R;
        A(i, 2) = 1.0 / (R * R);
        b[i] = shell_integral_2b(pair, R) / (4.0 * M_PI * R);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::VectorXd cr = qr.solve(Eigen::VectorXd(b.real()));
    const Eigen::VectorXd ci = qr.solve(Eigen::VectorXd(b.imag()));
    const cplx xi_est(cr[0], ci[0]);
    // decay rate of the correction term
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int i = 0; i < n; ++i) {
        const double res = std::abs(b[i] - xi_est);
        if (res <= 0.0) continue;
        const double lx = std::log(R_ladder[i]), ly = std::log(res);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    const double rate =
        (m >= 2) ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
    return {xi_est, rate};
}

// Unique negative-energy bound state -(4 pi alpha)^2 for alpha < 0, located
// by bisection on tau(lambda) = 0 (the algebraic cross-check lives in the
// tests). No bound state for alpha >= 0 or for the Friedrichs extension.
inline std::optional<double> bound_state_energy(const ExtensionParam2B& ext) {
    if (ext.is_friedrichs()) return std::nullopt;
    const double alpha = ext.alpha();
    if (alpha >= 0.0) return std::nullopt;
    const double root = -4.0 * M_PI * alpha;  // sqrt(lambda*) in exact arithmetic
    double lo = 0.25 * root * root, hi = 4.0 * root * root;
    // tau(lo) < 0 < tau(hi)
    for (int iter = 0; iter < 400 && (hi - lo) > 1e-15 * hi; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (tau_from_alpha(alpha, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return -0.5 * (lo + hi);
}

// Regular-part trial function phi with samples of its Fourier transform on
// the radial grid.
struct RegularPart2B {
    Eigen::VectorXcd phat;
};

inline RegularPart2B gaussian_trial(const RadialGrid& grid, double a) {
    if (!(a > 0.0)) throw std::invalid_argument("gaussian_trial: need a > 0");
    RegularPart2B r;
    r.phat.resize(grid.n());
    for (int i = 0; i < grid.n(); ++i) r.phat[i] = std::exp(-a * grid.p[i] * grid.p[i]);
    return r;
}

// Quadratic form of the tau-extension at shift lambda evaluated on
// g = phi + u_xi, after cancelling the analytic ||u_xi||^2 pieces:
//   ||grad phi||^2 - 2 lambda Re<phi, u_xi> + (tau - lambda)(pi^2/sqrt(lambda))|xi|^2.
// Norms are full 3D (radial grid sums carry the 4 pi angular factor); only
// the phi integrals and the cross term use grid quadrature.
inline double form_value_2b(const RadialGrid& grid, const RegularPart2B& phi, cplx xi,
                            double lambda, double tau) {
    if (!(lambda > 0.0)) throw std::invalid_argument("form_value_2b: need lambda > 0");
    if (phi.phat.size() != grid.n())
        throw std::invalid_argument("form_value_2b: trial/grid size mismatch");
    double grad_sq = 0.0, cross_re = 0.0;
    for (int i = 0; i < grid.n(); ++i) {
        const double p = grid.p[i], wp2 = grid.w[i] * p * p;
        grad_sq += wp2 * p * p * std::norm(phi.phat[i]);
        cross_re += wp2 * std::real(std::conj(phi.phat[i]) * u_xi_hat(xi, lambda, p));
    }
    grad_sq *= 4.0 * M_PI;
    cross_re *= 4.0 * M_PI;
    return grad_sq - 2.0 * lambda * cross_re + (tau - lambda) * u_xi_norm_sq(xi, lambda);
}

// Position-space Green's function G_lambda(x) = exp(-sqrt(lambda) x)/(4 pi x)
// and its exact L2 norm ||G_lambda||^2 = 1/(8 pi sqrt(lambda)).
inline double greens_function(double lambda, double x) {
    if (!(lambda > 0.0 && x > 0.0))
        throw std::invalid_argument("greens_function: need lambda > 0, x > 0");
    return std::exp(-std::sqrt(lambda) * x) / (4.0 * M_PI * x);
}

inline double greens_norm_sq(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("greens_norm_sq: need lambda > 0");
    return 1.0 / (8.0 * M_PI * std::sqrt(lambda));
}

}  // namespace tmslab
