#pragma once

// Charge-space operators of the 2+1 fermion system at shift lambda > 0,
// block-diagonalized over angular momentum sectors ell.
//
// All matrices live in the measure-symmetrized representation
// xi~_i = sqrt(w_i p_i^2) xi(p_i), which makes the quadrature-weighted
// kernels exactly symmetric. Plain charge samples convert via
// to_weighted / from_weighted.
//
//   T: diag 2 pi^2 sqrt(nu p^2 + lambda) plus the power-1 exchange kernel
//   W: diag 2 pi^2 / sqrt(nu p^2 + lambda) minus twice the power-2 kernel;
//      positive definite (checked at build time)
//   Q: the bare power-1 kernel block of T
//   A: 2 W^{-1} (T + alpha), or 2 W^{-1} (S0 + alpha) in the ell = 0 sector;
//      symmetric in the W inner product, not in L^2
//   S0: the free ell = 0 generator, zero by default or multiplication by a
//      smooth compactly supported bump

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tmslab/grid.hpp"
#include "tmslab/kernels.hpp"
#include "tmslab/linalg.hpp"

namespace tmslab {

enum class MatrixKind { T, W, Q, A, S0 };

struct SectorMatrix {
    MatrixKind kind;
    int ell = 0;
    double lambda = 1.0;
    MassParams mass;
    RadialGrid grid;
    Eigen::MatrixXd entries;  // measure-symmetrized representation
};

namespace detail {

// coeff * sqrt(w_i p_i^2 w_j p_j^2) * k(p_i, p_j) with
// k(r, rp) = angular_kernel(ell, mu, lambda, r, rp, power) / rp^2, which is
// symmetric under r <-> rp; the upper triangle is computed and mirrored so
// the matrix is symmetric to the last bit.
inline Eigen::MatrixXd kernel_matrix(int ell, double mu, double lambda,
                                     const RadialGrid& g, int power, double coeff) {
    const int n = g.n();
    const Eigen::ArrayXd d = g.measure_sqrt();
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const double k =
                angular_kernel(ell, mu, lambda, g.p[i], g.p[j], power) / (g.p[j] * g.p[j]);
            K(i, j) = coeff * d[i] * d[j] * k;
            K(j, i) = K(i, j);
        }
    }
    return K;
}

inline void check_sector_args(int ell, double lambda) {
    if (ell < 0) throw std::invalid_argument("sector index must be >= 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("need lambda > 0");
}

}  // namespace detail

inline SectorMatrix build_Q(int ell, double lambda, MassParams mass, const RadialGrid& g) {
    detail::check_sector_args(ell, lambda);
    SectorMatrix m{MatrixKind::Q, ell, lambda, mass, g, {}};
    m.entries = detail::kernel_matrix(ell, mass.mu, lambda, g, 1, 1.0);
    return m;
}

inline SectorMatrix build_T(int ell, double lambda, MassParams mass, const RadialGrid& g) {
    detail::check_sector_args(ell, lambda);
    SectorMatrix m{MatrixKind::T, ell, lambda, mass, g, {}};
    m.entries = detail::kernel_matrix(ell, mass.mu, lambda, g, 1, 1.0);
    for (int i = 0; i < g.n(); ++i)
        m.entries(i, i) += 2.0 * M_PI * M_PI * std::sqrt(mass.nu * g.p[i] * g.p[i] + lambda);
    return m;
}

inline SectorMatrix build_W(int ell, double lambda, MassParams mass, const RadialGrid& g) {
    detail::check_sector_args(ell, lambda);
    SectorMatrix m{MatrixKind::W, ell, lambda, mass, g, {}};
    m.entries = detail::kernel_matrix(ell, mass.mu, lambda, g, 2, -2.0);
    for (int i = 0; i < g.n(); ++i)
        m.entries(i, i) += 2.0 * M_PI * M_PI / std::sqrt(mass.nu * g.p[i] * g.p[i] + lambda);
    if (smallest_eigenvalue(m.entries) <= 0.0)
        throw std::runtime_error("build_W: discretized operator lost positive definiteness");
    return m;
}

struct SzeroSpec {
    enum class Mode { zero, multiplication } mode = Mode::zero;
    // multiplication by height * exp(1 - 1/(1-t^2)), t = (p-center)/width;
    // smooth, compactly supported on |t| < 1
    double height = 1.0;
    double center = 1.0;
    double width = 0.5;
};

inline double szero_profile(const SzeroSpec& s, double p) {
    if (s.mode == SzeroSpec::Mode::zero) return 0.0;
    const double t = (p - s.center) / s.width;
    if (std::abs(t) >= 1.0) return 0.0;
    return s.height * std::exp(1.0 - 1.0 / (1.0 - t * t));
}

inline SectorMatrix build_S0(const SzeroSpec& s, double lambda, MassParams mass,
                             const RadialGrid& g) {
    detail::check_sector_args(0, lambda);
    if (s.mode == SzeroSpec::Mode::multiplication && !(s.width > 0.0 && s.center > 0.0))
        throw std::invalid_argument("build_S0: bump needs center > 0 and width > 0");
    SectorMatrix m{MatrixKind::S0, 0, lambda, mass, g, {}};
    // multiplication operators are diagonal in either representation
    m.entries = Eigen::MatrixXd::Zero(g.n(), g.n());
    for (int i = 0; i < g.n(); ++i) m.entries(i, i) = szero_profile(s, g.p[i]);
    return m;
}

// A = 2 W^{-1} (T + alpha) for ell >= 1, 2 W^{-1} (S0 + alpha) on ell = 0.
// W A = 2 (T + alpha) is symmetric, so A is symmetric in the W inner product.
inline SectorMatrix build_A(int ell, double lambda, MassParams mass, double alpha,
                            const RadialGrid& g, const SzeroSpec& s0 = {}) {
    const SectorMatrix w = build_W(ell, lambda, mass, g);
    const SectorMatrix src =
        (ell == 0) ? build_S0(s0, lambda, mass, g) : build_T(ell, lambda, mass, g);
    Eigen::MatrixXd rhs = 2.0 * src.entries;
    rhs.diagonal().array() += 2.0 * alpha;
    Eigen::LLT<Eigen::MatrixXd> llt(w.entries);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("build_A: W factorization failed");
    SectorMatrix m{MatrixKind::A, ell, lambda, mass, g, {}};
    m.entries = llt.solve(rhs);
    return m;
}

// Apply a sector matrix to plain charge samples.
inline Eigen::VectorXcd apply_sector(const SectorMatrix& m, const Eigen::VectorXcd& plain) {
    if (plain.size() != m.grid.n())
        throw std::invalid_argument("apply_sector: size mismatch");
    return from_weighted(m.grid, apply_real(m.entries, to_weighted(m.grid, plain)));
}

// Precomputed kernel table for the reduced pair inner product; independent
// of build_W (no measure symmetrization, explicit double quadrature).
struct PairKernel {
    int ell = 0;
    double lambda = 1.0;
    MassParams mass;
    Eigen::VectorXd wp2;    // w_i p_i^2
    Eigen::VectorXd w;      // w_j
    Eigen::VectorXd diag;   // pi^2 / sqrt(nu p_i^2 + lambda)
    Eigen::MatrixXd cross;  // angular_kernel(ell, mu, lambda, p_i, p_j, power 2)
};

inline PairKernel build_pair_kernel(int ell, double lambda, MassParams mass,
                                    const RadialGrid& g) {
    detail::check_sector_args(ell, lambda);
    PairKernel k;
    k.ell = ell;
    k.lambda = lambda;
    k.mass = mass;
    const int n = g.n();
    k.wp2.resize(n);
    k.w.resize(n);
    k.diag.resize(n);
    k.cross.resize(n, n);
    for (int i = 0; i < n; ++i) {
        k.wp2[i] = g.w[i] * g.p[i] * g.p[i];
        k.w[i] = g.w[i];
        k.diag[i] = squared_denominator_integral(g.p[i], mass.nu, lambda);
        for (int j = i; j < n; ++j) {
            const double v = angular_kernel(ell, mass.mu, lambda, g.p[i], g.p[j], 2);
            k.cross(i, j) = v;
            // angular_kernel(r, rp) carries an rp^2 factor, so mirror with
            // the radii swapped back in
            k.cross(j, i) = v * (g.p[i] * g.p[i]) / (g.p[j] * g.p[j]);
        }
    }
    return k;
}

// <u_xi, u_eta> via the reduced radial double quadrature:
//   2 [ sum_i w_i p_i^2 conj(xi_i) eta_i pi^2/sqrt(nu p_i^2+lambda)
//       - sum_{i,j} w_i p_i^2 conj(xi_i) w_j eta_j K2(p_i, p_j) ].
inline cplx pair_norm_u(const PairKernel& k, const Eigen::VectorXcd& xi,
                        const Eigen::VectorXcd& eta) {
    const int n = static_cast<int>(k.wp2.size());
    if (xi.size() != n || eta.size() != n)
        throw std::invalid_argument("pair_norm_u: size mismatch");
    cplx direct{0.0, 0.0}, exchange{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
        direct += k.wp2[i] * std::conj(xi[i]) * eta[i] * k.diag[i];
        cplx inner{0.0, 0.0};
        for (int j = 0; j < n; ++j) inner += k.w[j] * eta[j] * k.cross(i, j);
        exchange += k.wp2[i] * std::conj(xi[i]) * inner;
    }
    return 2.0 * (direct - exchange);
}

inline cplx pair_norm_u(const Charge& xi, const Charge& eta, double lambda, MassParams mass,
                        const RadialGrid& g) {
    if (xi.ell != eta.ell) throw std::invalid_argument("pair_norm_u: sector mismatch");
    return pair_norm_u(build_pair_kernel(xi.ell, lambda, mass, g), xi.values, eta.values);
}

// L2 norm of alpha xi + M xi - 1/2 W eta, the residual of the sectorized
// boundary condition; zero exactly when eta = A xi.
inline double tms_residual_21(const Charge& xi, const Charge& eta, double alpha,
                              const SectorMatrix& t_or_s0, const SectorMatrix& w) {
    if (w.kind != MatrixKind::W) throw std::invalid_argument("tms_residual_21: need a W matrix");
    if (t_or_s0.kind != MatrixKind::T && t_or_s0.kind != MatrixKind::S0)
        throw std::invalid_argument("tms_residual_21: need a T or S0 matrix");
    if (xi.ell != eta.ell || xi.ell != t_or_s0.ell || xi.ell != w.ell)
        throw std::invalid_argument("tms_residual_21: sector mismatch");
    const Eigen::VectorXcd xt = to_weighted(w.grid, xi.values);
    const Eigen::VectorXcd et = to_weighted(w.grid, eta.values);
    const Eigen::VectorXcd r =
        alpha * xt + apply_real(t_or_s0.entries, xt) - 0.5 * apply_real(w.entries, et);
    return r.norm();
}

// Integral of the singular pair over the p2-ball of radius R at fixed p1
// (snapped to the nearest grid node):
//   xi(p1) * (exact truncated ball) - R-truncated exchange quadrature
//   + eta(p1) * (truncated power-2 ball, ell = 0 kernels) - same for eta.
// Large-R limit: 4 pi xi(p1) R + (-T xi(p1) + 1/2 W eta(p1)) + O(1/R).
inline cplx shell_integral_21(const Charge& xi, const Charge& eta, double lambda,
                              MassParams mass, const RadialGrid& g, double p1, double R) {
    if (xi.ell != eta.ell) throw std::invalid_argument("shell_integral_21: sector mismatch");
    if (xi.values.size() != g.n() || eta.values.size() != g.n())
        throw std::invalid_argument("shell_integral_21: size mismatch");
    if (!(R > 0.0) || R > 0.5 * g.p_max)
        throw std::invalid_argument("shell_integral_21: need 0 < R <= p_max/2");
    int i1 = 0;
    for (int i = 1; i < g.n(); ++i)
        if (std::abs(std::log(g.p[i] / p1)) < std::abs(std::log(g.p[i1] / p1))) i1 = i;
    const double q1 = g.p[i1];
    cplx val = xi.values[i1] * truncated_ball_integral(q1, mass.mu, mass.nu, lambda, R);
    double diag2 = 0.0;
    for (int j = 0; j < g.n() && g.p[j] <= R; ++j)
        diag2 += g.w[j] * angular_kernel(0, mass.mu, lambda, q1, g.p[j], 2);
    val += eta.values[i1] * diag2;
    for (int j = 0; j < g.n() && g.p[j] <= R; ++j) {
        val -= g.w[j] * (xi.values[j] * angular_kernel(xi.ell, mass.mu, lambda, q1, g.p[j], 1) +
                         eta.values[j] * angular_kernel(xi.ell, mass.mu, lambda, q1, g.p[j], 2));
    }
    return val;
}

// Norm estimates of T as a map H^s -> H^{s-1} over a grid ladder: the
// extremal singular value of G_{s-1}^{1/2} T~ G_s^{-1/2} with diagonal
// Sobolev Grams G_s = (1+p^2)^s in the symmetrized representation.
inline std::vector<double> mapping_norm_estimate(int ell, double s, double lambda,
                                                 MassParams mass,
                                                 const std::vector<RadialGrid>& ladder) {
    if (ladder.empty()) throw std::invalid_argument("mapping_norm_estimate: empty ladder");
    std::vector<double> out;
    for (const RadialGrid& g : ladder) {
        const SectorMatrix t = build_T(ell, lambda, mass, g);
        const int n = g.n();
        Eigen::VectorXd left(n), right(n);
        for (int i = 0; i < n; ++i) {
            const double z = 1.0 + g.p[i] * g.p[i];
            left[i] = std::pow(z, 0.5 * (s - 1.0));
            right[i] = std::pow(z, -0.5 * s);
        }
        const Eigen::MatrixXd B = left.asDiagonal() * t.entries * right.asDiagonal();
        Eigen::MatrixXd BtB = B.transpose() * B;
        BtB = 0.5 * (BtB + BtB.transpose()).eval();
        out.push_back(std::sqrt(std::max(0.0, largest_eigenvalue(BtB))));
    }
    return out;
}

// The ell = 0 image of the unit-ball indicator charge is pointwise the
// truncated ball integral at R = 1; its squared H^{1/2} norm grows like
// ln p_max, which is the unboundedness witness for s = 3/2.
struct CounterexampleReport {
    std::vector<double> p_max;
    std::vector<double> norm_sq;  // squared H^{1/2} norms of Q xi0
};

inline CounterexampleReport counterexample_l0(double lambda, MassParams mass,
                                              const std::vector<RadialGrid>& ladder) {
    if (ladder.empty()) throw std::invalid_argument("counterexample_l0: empty ladder");
    CounterexampleReport rep;
    for (const RadialGrid& g : ladder) {
        Eigen::VectorXcd img(g.n());
        for (int i = 0; i < g.n(); ++i)
            img[i] = truncated_ball_integral(g.p[i], mass.mu, mass.nu, lambda, 1.0);
        const double nrm = sobolev_norm(g, img, 0.5);
        rep.p_max.push_back(g.p_max);
        rep.norm_sq.push_back(nrm * nrm);
    }
    return rep;
}

// Extremal generalized Rayleigh quotients of W against the diagonal
// H^{-1/2} Gram (1+p^2)^{-1/2}, reported per ladder grid.
struct NormEquivalenceReport {
    double c1_est = 0.0;
    double c2_est = 0.0;
    std::vector<double> p_max;
    std::vector<double> c1_seq;
    std::vector<double> c2_seq;
};

inline NormEquivalenceReport norm_equivalence_bounds(int ell, double lambda, MassParams mass,
                                                     const std::vector<RadialGrid>& ladder) {
    if (ladder.empty()) throw std::invalid_argument("norm_equivalence_bounds: empty ladder");
    NormEquivalenceReport rep;
    for (const RadialGrid& g : ladder) {
        const SectorMatrix w = build_W(ell, lambda, mass, g);
        Eigen::VectorXd d(g.n());
        for (int i = 0; i < g.n(); ++i) d[i] = std::pow(1.0 + g.p[i] * g.p[i], 0.25);
        Eigen::MatrixXd B = d.asDiagonal() * w.entries * d.asDiagonal();
        B = 0.5 * (B + B.transpose()).eval();
        const Tridiagonal t = tridiagonalize(B);
        rep.p_max.push_back(g.p_max);
        rep.c1_seq.push_back(smallest_eigenvalue(t));
        rep.c2_seq.push_back(largest_eigenvalue(t));
    }
    rep.c1_est = rep.c1_seq.back();
    rep.c2_est = rep.c2_seq.back();
    return rep;
}

// Bottom of the W-symmetrized generator 2 W^{-1} T at alpha = 0: the
// smallest theta with 2 T~ x = theta W~ x.
inline double sector_bottom(int ell, double lambda, double m, const RadialGrid& g) {
    const MassParams mp = mass_params(m);
    const SectorMatrix t = build_T(ell, lambda, mp, g);
    const SectorMatrix w = build_W(ell, lambda, mp, g);
    return smallest_generalized_eigenvalue(2.0 * t.entries, w.entries);
}

// A mass is classified stable when the spectral bottom settles across the
// cutoff ladder and unstable when it keeps dropping by growing increments
// (the discrete signature of lost semiboundedness; deep in the unstable
// region the bottom dives ~4x per p_max doubling, near threshold the drop
// is slow but its increments still grow, while a settling bottom has
// shrinking increments).
inline bool mass_is_stable(int ell, double lambda, double m,
                           const std::vector<RadialGrid>& ladder) {
    if (ladder.size() < 3) throw std::invalid_argument("mass_is_stable: need >= 3 grids");
    std::vector<double> theta;
    for (const RadialGrid& g : ladder) theta.push_back(sector_bottom(ell, lambda, m, g));
    const std::size_t k = theta.size();
    const double d_last = theta[k - 2] - theta[k - 1];
    const double d_prev = theta[k - 3] - theta[k - 2];
    const double tol = 1e-6 * (1.0 + std::abs(theta[k - 1]));
    return !(d_last > tol && d_last >= 1.05 * d_prev);
}

struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MassCriticality {
    int ell = 1;
    double m_crit = 0.0;
    double bracket_lo = 0.0;  // unstable side
    double bracket_hi = 0.0;  // stable side
};

inline MassCriticality mass_criticality_scan(int ell, double lambda,
                                             const std::vector<RadialGrid>& ladder,
                                             double m_lo, double m_hi) {
    if (ell < 1 || ell % 2 == 0)
        throw std::invalid_argument("mass_criticality_scan: need odd ell >= 1");
    if (!(0.0 < m_lo && m_lo < m_hi))
        throw std::invalid_argument("mass_criticality_scan: need 0 < m_lo < m_hi");
    if (mass_is_stable(ell, lambda, m_lo, ladder))
        throw BracketError("mass_criticality_scan: lower mass already stable");
    if (!mass_is_stable(ell, lambda, m_hi, ladder))
        throw BracketError("mass_criticality_scan: upper mass still unstable");
    while (m_hi - m_lo > 1e-2 * m_lo) {
        const double mid = std::sqrt(m_lo * m_hi);
        if (mass_is_stable(ell, lambda, mid, ladder))
            m_hi = mid;
        else
            m_lo = mid;
    }
    MassCriticality out;
    out.ell = ell;
    out.m_crit = std::sqrt(m_lo * m_hi);
    out.bracket_lo = m_lo;
    out.bracket_hi = m_hi;
    return out;
}

}  // namespace tmslab
