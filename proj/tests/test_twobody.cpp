#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "tmslab/grid.hpp"
#include "tmslab/twobody.hpp"
#include "support/oracles.hpp"

using namespace tmslab;

namespace {

// Independent radial Simpson of 4 pi Int_0^R p^2 g_sing(p) dp.
cplx shell_oracle(const SingularPair2B& pair, double R) {
    auto f = [&](double p) -> cplx {
        const double d = p * p + pair.lambda;
        return p * p * (pair.xi / d + pair.eta / (d * d));
    };
    return 4.0 * M_PI * oracle::integrate_complex(f, 0.0, R, 1e-13);
}

double grid_l2_3d(const RadialGrid& g, const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    double acc = 0.0;
    for (int i = 0; i < g.n(); ++i)
        acc += g.w[i] * g.p[i] * g.p[i] * std::real(std::conj(a[i]) * b[i]);
    return 4.0 * M_PI * acc;
}

}  // namespace

TEST_CASE("tau/alpha conversions invert each other") {
    oracle::Rng rng(2024001);
    for (int k = 0; k < 100; ++k) {
        const double lam = rng.log_uniform(1e-3, 1e3);
        const double sl = std::sqrt(lam);
        // conditioning: keep |4 pi alpha| comparable to sqrt(lambda)
        const double mag = rng.uniform(2.0, 50.0) * sl;
        const double a4pi = (rng.pick(2) == 0 ? -1.0 : 1.0) * mag;
        const double alpha = a4pi / (4.0 * M_PI);
        const double tau = tau_from_alpha(alpha, lam);
        REQUIRE(std::abs(alpha_from_tau(tau, lam) - alpha) <= 1e-15 * std::abs(alpha));
    }
    REQUIRE(tau_from_alpha(0.0, 4.0) == Catch::Approx(8.0).epsilon(1e-14));
    REQUIRE_THROWS_AS(tau_from_alpha(1.0, -1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(alpha_from_tau(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("extension labels carry alpha, tau, scattering length") {
    const auto ext = ExtensionParam2B::regular(-0.25, 2.0);
    REQUIRE(!ext.is_friedrichs());
    REQUIRE(ext.alpha() == -0.25);
    REQUIRE(ext.tau() == Catch::Approx(tau_from_alpha(-0.25, 2.0)));
    REQUIRE(ext.scattering_length().has_value());
    REQUIRE(*ext.scattering_length() == Catch::Approx(1.0 / M_PI).epsilon(1e-14));
    REQUIRE(!ExtensionParam2B::regular(0.0, 1.0).scattering_length().has_value());

    const auto fr = ExtensionParam2B::friedrichs(3.0);
    REQUIRE(fr.is_friedrichs());
    REQUIRE(std::isinf(fr.tau()));
    REQUIRE(!fr.scattering_length().has_value());
    REQUIRE_THROWS_AS(fr.alpha(), std::logic_error);
    REQUIRE_THROWS_AS(ExtensionParam2B::regular(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("shell integral closed form matches radial quadrature") {
    oracle::Rng rng(2024002);
    for (int k = 0; k < 20; ++k) {
        SingularPair2B pair;
        pair.xi = cplx(rng.uniform(-2, 2), rng.uniform(-2, 2));
        pair.eta = cplx(rng.uniform(-2, 2), rng.uniform(-2, 2));
        pair.lambda = rng.log_uniform(0.1, 10.0);
        const double R = rng.log_uniform(0.5, 50.0);
        const cplx ref = shell_oracle(pair, R);
        const cplx val = shell_integral_2b(pair, R);
        REQUIRE(std::abs(val - ref) <= 1e-9 * (1.0 + std::abs(ref)));
    }
}

TEST_CASE("shell integral worked value at xi=0, eta=1, lambda=4, R=1") {
    SingularPair2B pair;
    pair.xi = 0.0;
    pair.eta = 1.0;
    pair.lambda = 4.0;
    const double expect = -2.0 * M_PI / 5.0 + M_PI * std::atan(0.5);
    REQUIRE(shell_integral_2b(pair, 1.0).real() == Catch::Approx(expect).epsilon(1e-14));
    REQUIRE(shell_integral_2b(pair, 1.0).imag() == 0.0);
    REQUIRE_THROWS_AS(shell_integral_2b(pair, 0.0), std::invalid_argument);
}

TEST_CASE("shell integral approaches linear * R + constant") {
    SingularPair2B pair;
    pair.xi = cplx(0.7, -0.3);
    pair.eta = cplx(-1.1, 0.4);
    pair.lambda = 2.5;
    const auto co = asymptotic_coeffs_2b(pair);
    const double sl = std::sqrt(pair.lambda);
    REQUIRE(std::abs(co.linear - 4.0 * M_PI * pair.xi) == 0.0);
    REQUIRE(std::abs(co.constant -
                     (-2.0 * M_PI * M_PI * sl * pair.xi + M_PI * M_PI / sl * pair.eta)) == 0.0);
    double prev = 1e300, first = 0.0, last = 0.0;
    for (double R : {1e2, 1e3, 1e4, 1e5}) {
        const double res = std::abs(shell_integral_2b(pair, R) - co.linear * R - co.constant);
        REQUIRE(res < prev);
        prev = res;
        if (R == 1e2) first = res;
        if (R == 1e5) last = res;
    }
    // remainder = 4 pi (xi lambda - eta)/R + O(R^-3)
    const double c1 = 4.0 * M_PI * std::abs(pair.xi * pair.lambda - pair.eta);
    REQUIRE(last * 1e5 == Catch::Approx(c1).epsilon(1e-6));
    const double slope = std::log(last / first) / std::log(1e5 / 1e2);
    REQUIRE(slope == Catch::Approx(-1.0).margin(0.01));
}

TEST_CASE("charge extraction recovers xi from the shell ladder") {
    oracle::Rng rng(2024003);
    std::vector<double> ladder;
    for (int j = 0; j <= 12; ++j) ladder.push_back(1e2 * std::pow(10.0, j / 4.0));
    for (int k = 0; k < 10; ++k) {
        SingularPair2B pair;
        pair.xi = cplx(rng.uniform(-2, 2), rng.uniform(-2, 2));
        pair.eta = cplx(rng.uniform(-2, 2), rng.uniform(-2, 2));
        pair.lambda = rng.log_uniform(0.1, 10.0);
        if (std::abs(pair.xi) < 0.1) pair.xi += 0.5;
        const auto ex = charge_extract_2b(pair, ladder);
        REQUIRE(std::abs(ex.xi_est - pair.xi) <= 1e-6 * std::abs(pair.xi));
        REQUIRE(ex.rate == Catch::Approx(-1.0).margin(0.1));
    }
    REQUIRE_THROWS_AS(charge_extract_2b(SingularPair2B{}, std::vector<double>{1.0, 2.0}),
                      std::invalid_argument);
}

TEST_CASE("deficiency element norm: analytic value vs wide-grid quadrature") {
    // 13 decades so the p^-2 tail beyond p_max is below 1e-8 relative
    const RadialGrid g =
        build_grid(GridScheme::gauss_legendre_composite, 832, 1e-4, 1e9);
    oracle::Rng rng(2024004);
    for (int k = 0; k < 5; ++k) {
        const double lam = rng.log_uniform(0.1, 10.0);
        const cplx xi(rng.uniform(-2, 2), rng.uniform(-2, 2));
        Eigen::VectorXcd u(g.n());
        for (int i = 0; i < g.n(); ++i) u[i] = u_xi_hat(xi, lam, g.p[i]);
        const double quad = grid_l2_3d(g, u, u);
        REQUIRE(quad == Catch::Approx(u_xi_norm_sq(xi, lam)).epsilon(1e-8));
    }
    REQUIRE_THROWS_AS(u_xi_norm_sq(cplx(1.0), 0.0), std::invalid_argument);
}

TEST_CASE("boundary-condition residual for regular and Friedrichs labels") {
    SingularPair2B pair;
    pair.xi = cplx(2.0, 0.0);
    pair.lambda = 1.0;
    const auto ext = ExtensionParam2B::regular(0.1, 1.0);
    pair.eta = tau_from_alpha(0.1, 1.0) * pair.xi;
    REQUIRE(tms_check_2b(pair, ext) <= 1e-14 * std::abs(pair.eta));
    pair.eta += 0.5;
    REQUIRE(tms_check_2b(pair, ext) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(tms_check_2b(pair, ExtensionParam2B::friedrichs(1.0)) == Catch::Approx(2.0));
}

TEST_CASE("bound state sits at -(4 pi alpha)^2 for attractive alpha") {
    oracle::Rng rng(2024005);
    for (int k = 0; k < 20; ++k) {
        const double alpha = -rng.log_uniform(1e-3, 1e2);
        const auto E = bound_state_energy(ExtensionParam2B::regular(alpha, 1.0));
        REQUIRE(E.has_value());
        const double expect = -std::pow(4.0 * M_PI * alpha, 2);
        REQUIRE(*E == Catch::Approx(expect).epsilon(1e-10));
        // the located level is a genuine zero of the charge coupling
        REQUIRE(std::abs(tau_from_alpha(alpha, -*E)) <= 1e-9 * (-expect));
    }
    REQUIRE(!bound_state_energy(ExtensionParam2B::regular(0.0, 1.0)).has_value());
    REQUIRE(!bound_state_energy(ExtensionParam2B::regular(0.3, 1.0)).has_value());
    REQUIRE(!bound_state_energy(ExtensionParam2B::friedrichs(1.0)).has_value());
}

TEST_CASE("quadratic form worked value and bound-state consistency") {
    const RadialGrid g = default_grid();
    RegularPart2B zero;
    zero.phat = Eigen::VectorXcd::Zero(g.n());
    REQUIRE(form_value_2b(g, zero, cplx(1.0), 1.0, 2.0) ==
            Catch::Approx(M_PI * M_PI).epsilon(1e-13));

    // at the bound-state shift the pure deficiency element realizes the level
    const double alpha = -0.3;
    const double Estar = -*bound_state_energy(ExtensionParam2B::regular(alpha, 1.0));
    const double tau = tau_from_alpha(alpha, Estar);
    const double val = form_value_2b(g, zero, cplx(1.0), Estar, tau);
    const double nrm = u_xi_norm_sq(cplx(1.0), Estar);
    REQUIRE(val / nrm == Catch::Approx(-Estar).epsilon(1e-9));
}

TEST_CASE("quadratic form stays above -lambda when tau(lambda) >= 0") {
    const RadialGrid g = default_grid();
    oracle::Rng rng(2024006);
    for (int k = 0; k < 25; ++k) {
        const double lam = rng.log_uniform(0.1, 10.0);
        const double tau = rng.uniform(0.0, 5.0) * lam;
        const cplx xi(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const auto phi = gaussian_trial(g, rng.log_uniform(0.05, 5.0));
        Eigen::VectorXcd u(g.n());
        for (int i = 0; i < g.n(); ++i) u[i] = u_xi_hat(xi, lam, g.p[i]);
        const double gsq = grid_l2_3d(g, phi.phat, phi.phat) +
                           2.0 * grid_l2_3d(g, phi.phat, u) + u_xi_norm_sq(xi, lam);
        const double form = form_value_2b(g, phi, xi, lam, tau);
        REQUIRE(form + lam * gsq >= -1e-9 * (std::abs(form) + lam * gsq));
    }
    RegularPart2B bad;
    bad.phat = Eigen::VectorXcd::Zero(3);
    REQUIRE_THROWS_AS(form_value_2b(g, bad, cplx(1.0), 1.0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_trial(g, -1.0), std::invalid_argument);
}

TEST_CASE("position-space profile solves the radial resolvent equation") {
    const double lam = 3.0;
    // (x G)'' = lambda (x G) away from the origin
    const double h = 1e-3;
    for (double x : {0.3, 1.0, 4.0}) {
        auto xg = [&](double t) { return t * greens_function(lam, t); };
        const double d2 = (xg(x + h) - 2.0 * xg(x) + xg(x - h)) / (h * h);
        REQUIRE(d2 == Catch::Approx(lam * xg(x)).epsilon(1e-6));
    }
    const double nrm = 4.0 * M_PI *
        oracle::integrate([&](double x) {
            const double gx = greens_function(lam, x);
            return x * x * gx * gx;
        }, 1e-12, 60.0 / std::sqrt(lam), 1e-14);
    REQUIRE(nrm == Catch::Approx(greens_norm_sq(lam)).epsilon(1e-10));
    REQUIRE_THROWS_AS(greens_function(1.0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(greens_norm_sq(-1.0), std::invalid_argument);
}
