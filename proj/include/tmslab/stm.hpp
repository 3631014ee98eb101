#pragma once

// Three-boson contact-interaction spectrum at unitarity and nearby: the
// s-wave integral-equation operator M(E), its geometric tower of roots
// (Thomas cascade), and the log-periodic large-p profile of null charges.
//
// Levels live at Hamiltonian eigenvalues -E_n, E_n > 0; M(E) has exactly
// one negative eigenvalue per level deeper than E, so roots are located by
// inertia counting plus geometric bisection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmslab/grid.hpp"
#include "tmslab/kernels.hpp"
#include "tmslab/linalg.hpp"
#include "tmslab/sectors.hpp"

namespace tmslab {

struct StmLevels {
    double alpha = 0.0;
    std::vector<double> energies;        // binding depths E_n, strictly increasing
    std::vector<double> ratios;          // E_{n+1} / E_n, all > 1
    std::vector<double> s0_from_ratios;  // 2 pi / ln(E_{n+1}/E_n) per adjacent pair
    std::vector<char> trusted;           // false when E_n > (0.01 p_max)^2: cutoff-contaminated
    double cutoff = 0.0;                 // grid p_max
    bool complete = true;                // all requested levels located
};

// Equal-mass s-wave operator: diagonal alpha + 2 pi^2 sqrt(3/4 p^2 + E)
// minus twice the power-1 exchange kernel with denominator p^2+q^2+pq+E,
// measure-symmetrized so symmetry is exact. The bosonic exchange enters
// with the opposite sign to the 2+1-fermion sector operators; this sign is
// what produces the geometric level cascade (ratio e^{2 pi/s0} ~ 515) and
// the log-periodic null charges.
inline SectorMatrix build_stm_operator(double E, double alpha, const RadialGrid& g) {
    if (!(E > 0.0)) throw std::invalid_argument("build_stm_operator: need E > 0");
    const MassParams mp = mass_params(1.0);
    SectorMatrix m{MatrixKind::T, 0, E, mp, g, {}};
    m.entries = detail::kernel_matrix(0, mp.mu, E, g, 1, -2.0);
    for (int i = 0; i < g.n(); ++i)
        m.entries(i, i) += alpha + 2.0 * M_PI * M_PI * std::sqrt(mp.nu * g.p[i] * g.p[i] + E);
    return m;
}

inline double stm_smallest_singular(double E, double alpha, const RadialGrid& g) {
    return smallest_abs_eigenvalue(tridiagonalize(build_stm_operator(E, alpha, g).entries));
}

// Number of levels deeper than E.
inline int stm_level_count_below(double E, double alpha, const RadialGrid& g) {
    return negative_eigenvalue_count(build_stm_operator(E, alpha, g).entries);
}

namespace detail {

// E where the deeper-level count drops to `target`, given
// count(lo) > target >= count(hi); geometric bisection to relative 1e-10.
inline double stm_bisect_root(double lo, double hi, int target, double alpha,
                              const RadialGrid& g) {
    while (hi / lo - 1.0 > 1e-10) {
        const double mid = std::sqrt(lo * hi);
        if (stm_level_count_below(mid, alpha, g) > target)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

}  // namespace detail

// Locate the n_levels shallowest roots above the infrared floor
// (20 p_min)^2 by a geometric scan (16 steps per expected tower period,
// re-estimated once two roots are known) plus bisection.
inline StmLevels stm_spectrum(double alpha, const RadialGrid& g, int n_levels) {
    if (n_levels < 3) throw std::invalid_argument("stm_spectrum: need n_levels >= 3");
    StmLevels out;
    out.alpha = alpha;
    out.cutoff = g.p_max;
    const double floor_e = std::pow(20.0 * g.p_min, 2);
    const double trust_e = std::pow(0.01 * g.p_max, 2);
    double factor = std::exp(2.0 * M_PI / 16.0);
    double lo = floor_e;
    int count = stm_level_count_below(lo, alpha, g);
    while (static_cast<int>(out.energies.size()) < n_levels && count > 0) {
        const double hi = lo * factor;
        const int chi = stm_level_count_below(hi, alpha, g);
        for (int target = count - 1;
             target >= chi && static_cast<int>(out.energies.size()) < n_levels; --target)
            out.energies.push_back(detail::stm_bisect_root(lo, hi, target, alpha, g));
        if (out.energies.size() == 2)
            factor = std::max(1.02, std::pow(out.energies[1] / out.energies[0], 1.0 / 16.0));
        lo = hi;
        count = chi;
    }
    out.complete = static_cast<int>(out.energies.size()) == n_levels;
    for (const double e : out.energies) out.trusted.push_back(e <= trust_e ? 1 : 0);
    for (std::size_t i = 0; i + 1 < out.energies.size(); ++i) {
        const double r = out.energies[i + 1] / out.energies[i];
        out.ratios.push_back(r);
        out.s0_from_ratios.push_back(2.0 * M_PI / std::log(r));
    }
    return out;
}

struct DanilovFit {
    double A = 0.0;  // amplitude of sin(s0 ln p)
    double B = 0.0;  // amplitude of cos(s0 ln p)
    double s0 = 0.0;
    double beta = 0.0;  // A/B
    double residual = 0.0;
};

struct FitError : std::runtime_error {
    double residual;
    FitError(const std::string& what, double r) : std::runtime_error(what), residual(r) {}
};

namespace detail {

// Linear least squares for (A, B) at fixed frequency; returns the relative
// residual and writes the amplitudes.
inline double danilov_amplitudes(const std::vector<double>& t, const std::vector<double>& y,
                                 double ynorm, double s0, double* A, double* B) {
    double ss = 0.0, cc = 0.0, sc = 0.0, sy = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double s = std::sin(s0 * t[i]), c = std::cos(s0 * t[i]);
        ss += s * s;
        cc += c * c;
        sc += s * c;
        sy += s * y[i];
        cy += c * y[i];
    }
    const double det = ss * cc - sc * sc;
    if (std::abs(det) < 1e-14 * (ss * cc + 1e-300)) {
        *A = 0.0;
        *B = 0.0;
        return 1.0;
    }
    *A = (cc * sy - sc * cy) / det;
    *B = (ss * cy - sc * sy) / det;
    double r2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = *A * std::sin(s0 * t[i]) + *B * std::cos(s0 * t[i]) - y[i];
        r2 += r * r;
    }
    return std::sqrt(r2) / ynorm;
}

}  // namespace detail

// Fit p^2 xi(p) ~ A sin(s0 ln p) + B cos(s0 ln p) over grid nodes inside
// [p_lo, p_hi]: frequency grid search with the amplitudes projected out,
// golden-section refinement, then a full Gauss-Newton polish.
inline DanilovFit danilov_fit(const RadialGrid& g, const Charge& xi, double p_lo, double p_hi) {
    if (xi.values.size() != g.n()) throw std::invalid_argument("danilov_fit: size mismatch");
    if (!(p_lo >= 10.0 * g.p_min && p_hi <= g.p_max / 10.0 && p_lo < p_hi))
        throw std::invalid_argument("danilov_fit: window must lie inside [10 p_min, p_max/10]");
    // strip the arbitrary global phase of a null vector before taking the
    // real part
    cplx phase_sq{0.0, 0.0};
    for (int i = 0; i < g.n(); ++i)
        if (g.p[i] >= p_lo && g.p[i] <= p_hi) phase_sq += xi.values[i] * xi.values[i];
    const double phi = 0.5 * std::arg(phase_sq);
    const cplx rot = std::polar(1.0, -phi);
    std::vector<double> t, y;
    for (int i = 0; i < g.n(); ++i) {
        if (g.p[i] < p_lo || g.p[i] > p_hi) continue;
        t.push_back(std::log(g.p[i]));
        y.push_back(g.p[i] * g.p[i] * (rot * xi.values[i]).real());
    }
    if (t.size() < 8) throw std::invalid_argument("danilov_fit: fewer than 8 nodes in window");
    double ynorm = 0.0;
    for (const double v : y) ynorm += v * v;
    ynorm = std::sqrt(ynorm);
    if (!(ynorm > 0.0)) throw std::invalid_argument("danilov_fit: window data is zero");

    double best_s0 = 0.0, best_res = std::numeric_limits<double>::infinity();
    double A = 0.0, B = 0.0;
    const double step = 0.005;
    for (double s0 = 0.2; s0 <= 4.0; s0 += step) {
        const double res = detail::danilov_amplitudes(t, y, ynorm, s0, &A, &B);
        if (res < best_res) {
            best_res = res;
            best_s0 = s0;
        }
    }
    // golden-section refine around the grid minimum
    {
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = best_s0 - step, b = best_s0 + step;
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = detail::danilov_amplitudes(t, y, ynorm, x1, &A, &B);
        double f2 = detail::danilov_amplitudes(t, y, ynorm, x2, &A, &B);
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = detail::danilov_amplitudes(t, y, ynorm, x1, &A, &B);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = detail::danilov_amplitudes(t, y, ynorm, x2, &A, &B);
            }
        }
        best_s0 = 0.5 * (a + b);
        best_res = detail::danilov_amplitudes(t, y, ynorm, best_s0, &A, &B);
    }
    // Gauss-Newton polish on (A, B, s0)
    const std::size_t m = t.size();
    for (int it = 0; it < 50; ++it) {
        Eigen::MatrixXd J(m, 3);
        Eigen::VectorXd r(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double s = std::sin(best_s0 * t[i]), c = std::cos(best_s0 * t[i]);
            J(i, 0) = s;
            J(i, 1) = c;
            J(i, 2) = t[i] * (A * c - B * s);
            r[i] = A * s + B * c - y[i];
        }
        const Eigen::Vector3d d = J.colPivHouseholderQr().solve(-r);
        A += d[0];
        B += d[1];
        best_s0 += d[2];
        if (d.norm() <= 1e-14 * (std::abs(A) + std::abs(B) + std::abs(best_s0))) break;
    }
    best_res = detail::danilov_amplitudes(t, y, ynorm, best_s0, &A, &B);

    DanilovFit fit;
    fit.A = A;
    fit.B = B;
    fit.s0 = best_s0;
    fit.beta = (B != 0.0) ? A / B : std::numeric_limits<double>::infinity();
    fit.residual = best_res;
    if (fit.residual > 0.05)
        throw FitError("danilov_fit: residual above 0.05, asymptotic regime not reached",
                       fit.residual);
    return fit;
}

struct ThomasRatioCheck {
    double s0_estimate = 0.0;
    // spread (max-min)/mean over trusted adjacent pairs; empty with a
    // single trusted ratio
    std::optional<double> max_pairwise_deviation;
};

inline ThomasRatioCheck thomas_ratio_check(const StmLevels& lv) {
    std::vector<double> s0s;
    for (std::size_t i = 0; i + 1 < lv.energies.size(); ++i)
        if (lv.trusted[i] && lv.trusted[i + 1])
            s0s.push_back(2.0 * M_PI / std::log(lv.energies[i + 1] / lv.energies[i]));
    if (s0s.empty())
        throw std::invalid_argument("thomas_ratio_check: no trusted adjacent level pair");
    ThomasRatioCheck out;
    double mean = 0.0;
    for (const double v : s0s) mean += v;
    mean /= static_cast<double>(s0s.size());
    out.s0_estimate = mean;
    if (s0s.size() >= 2) {
        const auto [mn, mx] = std::minmax_element(s0s.begin(), s0s.end());
        out.max_pairwise_deviation = (*mx - *mn) / mean;
    }
    return out;
}

}  // namespace tmslab
