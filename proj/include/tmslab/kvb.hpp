#pragma once

// Form-bound bookkeeping for the two-body extension family.
//
// With S the shifted reference form (bottom m(S) = lambda) and T the charge
// form (bottom m(T) = tau(lambda)), the full extension form S_T satisfies
//   m(T) >= m(S_T) >= m(S) m(T) / (m(S) + m(T))   whenever m(T) > -m(S).
// The bottom of the shifted extension is known in closed form,
//   m(S_T) = lambda - (4 pi alpha)^2 for alpha < 0, else lambda,
// so both margins are directly computable.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "tmslab/grid.hpp"
#include "tmslab/twobody.hpp"

namespace tmslab {

struct KvbCheck {
    bool skipped = false;
    std::string reason;       // set when skipped
    double m_s = 0.0;         // bottom of the reference form (= lambda)
    double m_t = 0.0;         // bottom of the charge form (= tau(lambda))
    double m_st = 0.0;        // bottom of the full shifted form
    double lower_bound = 0.0; // m_s m_t / (m_s + m_t); m_s in the tau -> inf limit
    double margin_upper = 0.0; // m_t - m_st
    double margin_lower = 0.0; // m_st - lower_bound
};

inline KvbCheck kvb_bound_check(const ExtensionParam2B& ext) {
    KvbCheck out;
    const double lam = ext.lambda();
    out.m_s = lam;
    if (ext.is_friedrichs()) {
        // charge form on the trivial domain: inf over the empty set
        out.m_t = std::numeric_limits<double>::infinity();
        out.m_st = lam;
        out.lower_bound = lam;  // limit of m_s m_t/(m_s+m_t) as m_t -> inf
        out.margin_upper = std::numeric_limits<double>::infinity();
        out.margin_lower = 0.0;
        return out;
    }
    const double alpha = ext.alpha();
    const double tau = tau_from_alpha(alpha, lam);
    out.m_t = tau;
    if (!(tau > -lam)) {
        out.skipped = true;
        out.reason = "charge-form bottom tau <= -lambda: sandwich bound inapplicable";
        return out;
    }
    const double a = 4.0 * M_PI * alpha;
    out.m_st = (alpha < 0.0) ? lam - a * a : lam;
    out.lower_bound = out.m_s * out.m_t / (out.m_s + out.m_t);
    out.margin_upper = out.m_t - out.m_st;
    out.margin_lower = out.m_st - out.lower_bound;
    return out;
}

// Three-way sign classification with an absolute floor so that parameter
// choices sitting exactly on the threshold classify as zero.
inline int sign_with_tolerance(double x, double scale) {
    if (std::abs(x) <= 1e-12 * scale) return 0;
    return x > 0.0 ? 1 : -1;
}

// Nonnegativity of the shifted extension is equivalent to nonnegativity of
// the charge coupling at that shift: sign(tau(lambda)) = sign(m(S_T)).
// At tau = 0 the original operator has the eigenvalue -lambda exactly.
struct PositivityCheck {
    int sign_tau = 0;
    int sign_bottom = 0;
    bool equivalent = false;
    std::optional<double> bound_state;
};

inline PositivityCheck positivity_equivalence_check(double alpha, double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("positivity_equivalence_check: need lambda > 0");
    PositivityCheck out;
    const double tau = tau_from_alpha(alpha, lambda);
    const double a = 4.0 * M_PI * alpha;
    const double bottom = (alpha < 0.0) ? lambda - a * a : lambda;
    const double scale = 1.0 + lambda;
    out.sign_tau = sign_with_tolerance(tau, scale);
    out.sign_bottom = sign_with_tolerance(bottom, scale);
    out.equivalent = (out.sign_tau == out.sign_bottom);
    out.bound_state = bound_state_energy(ExtensionParam2B::regular(alpha, lambda));
    return out;
}

// The two distinguished extensions of the shifted symmetric operator:
// Friedrichs (no singular charge admitted) and Krein-von Neumann (charge
// coupling zero at this shift, hence eigenvalue exactly -lambda for the
// unshifted operator).
enum class ExtensionKind { friedrichs, krein_von_neumann, generic };

struct ExtensionIdentity {
    ExtensionKind kind = ExtensionKind::generic;
    std::optional<double> bound_state;
};

inline ExtensionIdentity friedrichs_krein_identify(const ExtensionParam2B& ext) {
    if (ext.is_friedrichs()) return {ExtensionKind::friedrichs, std::nullopt};
    const double lam = ext.lambda();
    const double tau = tau_from_alpha(ext.alpha(), lam);
    if (std::abs(tau) <= 1e-12 * (1.0 + lam))
        return {ExtensionKind::krein_von_neumann, -lam};
    return {ExtensionKind::generic, bound_state_energy(ext)};
}

// Re-expand a singular pair written at shift lambda1 in the basis
// {1/(p^2+lambda2), 1/(p^2+lambda2)^2} by weighted least squares over a far
// tail window. The leading charge xi is shift-independent; the subleading
// coefficient absorbs xi (lambda2 - lambda1) and is reported as fitted.
struct DecompositionRefit {
    cplx xi_refit{0.0, 0.0};
    cplx eta_refit{0.0, 0.0};
    double xi_discrepancy = 0.0;  // |xi_refit - xi|
    double fit_residual = 0.0;    // rms residual relative to rms data, weighted
};

inline DecompositionRefit decomposition_refit(const SingularPair2B& pair, double lambda2,
                                              const RadialGrid& grid, double p_tail_min) {
    if (!(lambda2 > 0.0))
        throw std::invalid_argument("decomposition_refit: need lambda2 > 0");
    std::vector<int> idx;
    for (int i = 0; i < grid.n(); ++i)
        if (grid.p[i] >= p_tail_min) idx.push_back(i);
    if (idx.size() < 8)
        throw std::invalid_argument("decomposition_refit: tail window too small");
    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd br(m), bi(m);
    for (int r = 0; r < m; ++r) {
        const double p = grid.p[idx[r]], p2 = p * p;
        const double d1 = p2 + pair.lambda;
        const cplx g = pair.xi / d1 + pair.eta / (d1 * d1);
        const double d2 = p2 + lambda2;
        // scale rows by p^2 so the leading column is O(1)
        A(r, 0) = p2 / d2;
        A(r, 1) = p2 / (d2 * d2);
        br[r] = p2 * g.real();
        bi[r] = p2 * g.imag();
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::Vector2d xr = qr.solve(br);
    const Eigen::Vector2d xi_ = qr.solve(bi);
    DecompositionRefit out;
    out.xi_refit = cplx(xr[0], xi_[0]);
    out.eta_refit = cplx(xr[1], xi_[1]);
    out.xi_discrepancy = std::abs(out.xi_refit - pair.xi);
    const double rn = std::sqrt((A * xr - br).squaredNorm() + (A * xi_ - bi).squaredNorm());
    const double bn = std::sqrt(br.squaredNorm() + bi.squaredNorm());
    out.fit_residual = (bn > 0.0) ? rn / bn : rn;
    return out;
}

}  // namespace tmslab
