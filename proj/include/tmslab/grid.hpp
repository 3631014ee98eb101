#pragma once

// Radial momentum grids, mass parameters, charges and discrete Sobolev norms.
//
// All radial quadratures in this library are of the form
//   Int_0^inf f(p) dp  ~=  sum_i w_i f(p_i)
// over [p_min, p_max]; the p^2 volume factor is NOT folded into the weights,
// so L2 inner products read sum_i w_i p_i^2 conj(xi_i) eta_i. The angular
// normalization constant of a sector harmonic is absorbed once and for all;
// every norm and inner product in the library uses this same convention.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmslab/legendre.hpp"

namespace tmslab {

using cplx = std::complex<double>;

enum class GridScheme {
    log_uniform,              // geometric nodes, trapezoid weights in log p
    gauss_legendre_composite  // order-8 Gauss panels tiled uniformly in log p
};

struct RadialGrid {
    GridScheme scheme = GridScheme::gauss_legendre_composite;
    double p_min = 0.0;
    double p_max = 0.0;
    std::vector<double> p;  // strictly increasing nodes in [p_min, p_max]
    std::vector<double> w;  // positive weights for Int dp

    int n() const { return static_cast<int>(p.size()); }

    Eigen::Map<const Eigen::ArrayXd> nodes() const {
        return {p.data(), static_cast<Eigen::Index>(p.size())};
    }
    Eigen::Map<const Eigen::ArrayXd> weights() const {
        return {w.data(), static_cast<Eigen::Index>(w.size())};
    }

    // sqrt(w_i p_i^2): the similarity that turns Nystrom kernel matrices
    // into symmetric ones and L2 inner products into Euclidean ones.
    Eigen::ArrayXd measure_sqrt() const {
        return (weights() * nodes().square()).sqrt();
    }
};

// Panel order of the composite scheme. Fixed so that the default production
// grid (n=512 on [1e-4,1e4]) tiles each decade with 8 panels and decade
// boundaries are panel edges.
inline constexpr int kCompositePanelOrder = 8;

inline RadialGrid build_grid(GridScheme scheme, int n, double p_min, double p_max) {
    if (n < 8) throw std::invalid_argument("build_grid: need n >= 8");
    if (!(p_min > 0.0) || !(p_max > p_min))
        throw std::invalid_argument("build_grid: need 0 < p_min < p_max");
    RadialGrid g;
    g.scheme = scheme;
    g.p_min = p_min;
    g.p_max = p_max;
    const double t_lo = std::log(p_min), t_hi = std::log(p_max);
    if (scheme == GridScheme::log_uniform) {
        // trapezoid rule in t = ln p: Int f(p) dp = Int f(e^t) e^t dt
        g.p.resize(n);
        g.w.resize(n);
        const double h = (t_hi - t_lo) / (n - 1);
        for (int i = 0; i < n; ++i) {
            const double t = t_lo + h * i;
            const double pi = std::exp(t);
            g.p[i] = pi;
            const double tw = (i == 0 || i == n - 1) ? 0.5 * h : h;
            g.w[i] = tw * pi;
        }
        g.p.front() = p_min;
        g.p.back() = p_max;
    } else {
        // composite Gauss-Legendre in t = ln p, uniform panels
        const int panels = (n + kCompositePanelOrder - 1) / kCompositePanelOrder;
        const QuadratureRule rule = gauss_legendre(kCompositePanelOrder);
        g.p.reserve(panels * kCompositePanelOrder);
        g.w.reserve(panels * kCompositePanelOrder);
        for (int k = 0; k < panels; ++k) {
            const double a = t_lo + (t_hi - t_lo) * k / panels;
            const double b = t_lo + (t_hi - t_lo) * (k + 1) / panels;
            const double mid = 0.5 * (a + b), hw = 0.5 * (b - a);
            for (int j = 0; j < kCompositePanelOrder; ++j) {
                const double t = mid + hw * rule.x[j];
                const double pj = std::exp(t);
                g.p.push_back(pj);
                g.w.push_back(hw * rule.w[j] * pj);
            }
        }
    }
    return g;
}

// Default production grid used across the labs.
inline RadialGrid default_grid() {
    return build_grid(GridScheme::gauss_legendre_composite, 512, 1e-4, 1e4);
}

// Reduced two-mass parameters for two identical fermions of mass 1 plus a
// third particle of mass m:
//   mu = 2/(m+1),   nu = 1 - mu^2/4 = m(m+2)/(m+1)^2.
struct MassParams {
    double m = 1.0;
    double mu = 1.0;
    double nu = 0.75;
};

inline MassParams mass_params(double m) {
    if (!(m > 0.0)) throw std::invalid_argument("mass_params: need m > 0");
    MassParams mp;
    mp.m = m;
    mp.mu = 2.0 / (m + 1.0);
    mp.nu = 1.0 - 0.25 * mp.mu * mp.mu;
    return mp;
}

// Radial charge samples in a fixed angular-momentum sector.
struct Charge {
    int ell = 0;
    Eigen::VectorXcd values;  // one sample per grid node
};

inline Charge make_charge(int ell, Eigen::VectorXcd values) {
    if (ell < 0) throw std::invalid_argument("make_charge: ell must be >= 0");
    return Charge{ell, std::move(values)};
}

// Discrete Sobolev norm  ( sum_i w_i p_i^2 (1+p_i^2)^s |xi_i|^2 )^(1/2).
inline double sobolev_norm(const RadialGrid& grid, const Eigen::VectorXcd& xi, double s) {
    if (xi.size() != grid.n())
        throw std::invalid_argument("sobolev_norm: charge/grid size mismatch");
    double acc = 0.0;
    for (int i = 0; i < grid.n(); ++i) {
        const double p2 = grid.p[i] * grid.p[i];
        acc += grid.w[i] * p2 * std::pow(1.0 + p2, s) * std::norm(xi[i]);
    }
    return std::sqrt(acc);
}

inline double sobolev_norm(const RadialGrid& grid, const Eigen::VectorXd& xi, double s) {
    return sobolev_norm(grid, Eigen::VectorXcd(xi.cast<std::complex<double>>()), s);
}

}  // namespace tmslab
