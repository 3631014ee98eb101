#pragma once

// Dense symmetric linear algebra helpers shared by the labs.
//
// Root-finding loops only ever need eigenvalue *counts* or one extremal
// eigenvalue, so instead of full eigensolves we tridiagonalize once
// (Householder, via Eigen) and run Sturm-sequence bisection on the
// tridiagonal form. Full decompositions are reserved for eigenvector
// extraction.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "tmslab/grid.hpp"

namespace tmslab {

struct Tridiagonal {
    Eigen::VectorXd diag;
    Eigen::VectorXd sub;
};

inline Tridiagonal tridiagonalize(const Eigen::MatrixXd& M) {
    Eigen::Tridiagonalization<Eigen::MatrixXd> td(M);
    Tridiagonal t;
    t.diag = td.matrixT().diagonal();
    t.sub = td.matrixT().diagonal(-1);
    return t;
}

// Number of eigenvalues strictly below sigma (Sturm sequence count).
inline int sturm_count(const Tridiagonal& t, double sigma) {
    const int n = static_cast<int>(t.diag.size());
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    int count = 0;
    double d = 1.0;
    for (int i = 0; i < n; ++i) {
        const double off = (i == 0) ? 0.0 : t.sub[i - 1];
        d = (t.diag[i] - sigma) - off * off / d;
        if (d == 0.0) d = tiny;
        if (d < 0.0) ++count;
    }
    return count;
}

inline double gershgorin_lo(const Tridiagonal& t) {
    const int n = static_cast<int>(t.diag.size());
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(t.sub[i - 1]);
        if (i + 1 < n) r += std::abs(t.sub[i]);
        lo = std::min(lo, t.diag[i] - r);
    }
    return lo;
}

inline double gershgorin_hi(const Tridiagonal& t) {
    const int n = static_cast<int>(t.diag.size());
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(t.sub[i - 1]);
        if (i + 1 < n) r += std::abs(t.sub[i]);
        hi = std::max(hi, t.diag[i] + r);
    }
    return hi;
}

// Smallest eigenvalue of a symmetric tridiagonal matrix by bisection.
inline double smallest_eigenvalue(const Tridiagonal& t) {
    double lo = gershgorin_lo(t), hi = gershgorin_hi(t);
    for (int iter = 0; iter < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo) + std::abs(hi));
         ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(t, mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

inline double smallest_eigenvalue(const Eigen::MatrixXd& M) {
    return smallest_eigenvalue(tridiagonalize(M));
}

// Largest eigenvalue of a symmetric tridiagonal matrix by bisection.
inline double largest_eigenvalue(const Tridiagonal& t) {
    const int n = static_cast<int>(t.diag.size());
    double lo = gershgorin_lo(t), hi = gershgorin_hi(t);
    for (int iter = 0; iter < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo) + std::abs(hi));
         ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(t, mid) >= n)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

inline double largest_eigenvalue(const Eigen::MatrixXd& M) {
    return largest_eigenvalue(tridiagonalize(M));
}

// Distance from zero to the nearest eigenvalue (= smallest singular value
// for a symmetric matrix).
inline double smallest_abs_eigenvalue(const Tridiagonal& t) {
    double hi = std::max(std::abs(gershgorin_lo(t)), std::abs(gershgorin_hi(t)));
    if (sturm_count(t, 0.0) != sturm_count(t, std::nextafter(0.0, 1.0))) return 0.0;
    double lo = 0.0;
    for (int iter = 0; iter < 200 && hi - lo > 1e-14 * (1.0 + hi); ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(t, mid) - sturm_count(t, -mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Eigenvalue count below zero (matrix inertia).
inline int negative_eigenvalue_count(const Eigen::MatrixXd& M) {
    return sturm_count(tridiagonalize(M), 0.0);
}

// Eigenvector for the eigenvalue of least magnitude (full decomposition;
// reserved for the rare calls that need a null vector, not for scan loops).
inline Eigen::VectorXd eigenvector_smallest_abs(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigenvector_smallest_abs: eigensolver failed");
    int best = 0;
    for (int i = 1; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()[i]) < std::abs(es.eigenvalues()[best])) best = i;
    return es.eigenvectors().col(best);
}

// Smallest generalized eigenvalue of A x = theta B x with B positive
// definite, via the Cholesky reduction to C = L^-1 A L^-T.
inline double smallest_generalized_eigenvalue(const Eigen::MatrixXd& A,
                                              const Eigen::MatrixXd& B) {
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("smallest_generalized_eigenvalue: B is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd C = L.triangularView<Eigen::Lower>().solve(A);
    C = L.triangularView<Eigen::Lower>().solve(C.transpose()).transpose();
    // symmetrize against round-off before tridiagonalizing
    C = 0.5 * (C + C.transpose()).eval();
    return smallest_eigenvalue(C);
}

// Apply a real matrix to a complex vector.
inline Eigen::VectorXcd apply_real(const Eigen::MatrixXd& M, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out(M.rows());
    out.real() = M * v.real();
    out.imag() = M * v.imag();
    return out;
}

// Conversions between plain charge samples xi(p_i) and the
// measure-symmetrized representation xi~_i = sqrt(w_i p_i^2) xi(p_i).
inline Eigen::VectorXcd to_weighted(const RadialGrid& g, const Eigen::VectorXcd& plain) {
    const Eigen::ArrayXd d = g.measure_sqrt();
    Eigen::VectorXcd out(plain.size());
    for (int i = 0; i < plain.size(); ++i) out[i] = plain[i] * d[i];
    return out;
}

inline Eigen::VectorXcd from_weighted(const RadialGrid& g, const Eigen::VectorXcd& weighted) {
    const Eigen::ArrayXd d = g.measure_sqrt();
    Eigen::VectorXcd out(weighted.size());
    for (int i = 0; i < weighted.size(); ++i) out[i] = weighted[i] / d[i];
    return out;
}

}  // namespace tmslab
