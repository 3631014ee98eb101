// Acceptance gate: one PASS/FAIL line per criterion, exit code = number of failures.
// argv[1] (optional) = path to the command-line binary, needed for the determinism check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "tmslab/experiment.hpp"
#include "tmslab/kernels.hpp"
#include "tmslab/sectors.hpp"

using namespace tmslab;
namespace fs = std::filesystem;

namespace {

int g_failed = 0;

void report(int num, const char* name, bool pass, const std::string& detail) {
    std::printf("[%2d] %-36s %s  %s\n", num, name, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

bool check_of(const ResultRecord& r, const std::string& name) {
    for (const auto& [k, v] : r.checks)
        if (k == name) return v;
    throw std::runtime_error("missing check '" + name + "' in record " + r.id);
}

double scalar_of(const ResultRecord& r, const std::string& name) {
    const std::optional<double> v = r.find_scalar(name);
    if (!v) throw std::runtime_error("missing scalar '" + name + "' in record " + r.id);
    return *v;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

template <typename F>
void guarded(int num, const char* name, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(num, name, false, std::string("exception: ") + e.what());
    }
}

ResultRecord run_lab_to(const std::string& target, const std::string& out,
                        double alpha = 0.0, double* wall_ms = nullptr) {
    ExperimentConfig cfg;
    cfg.target = target;
    cfg.alpha = alpha;
    cfg.out = out;
    const ResultRecord rec = run_experiment(cfg);
    if (wall_ms) *wall_ms = rec.wall_ms;
    return rec;
}

std::string fingerprint_on_disk(const fs::path& out_dir) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(out_dir))
        if (e.is_directory() && fs::exists(e.path() / "record.json")) dirs.push_back(e.path());
    if (dirs.size() != 1)
        throw std::runtime_error("expected one record under " + out_dir.string() + ", found " +
                                 std::to_string(dirs.size()));
    std::ifstream f(dirs.front() / "record.json", std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return record_fingerprint(record_from_json(ordered_json::parse(ss.str())));
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli_bin = argc > 1 ? argv[1] : "";
    const fs::path scratch = "acceptance_runs";
    fs::remove_all(scratch);

    // two-body lab once, reused by criteria 1-3; alpha < 0 so the bound state exists
    const double alpha2b = -1.0 / (4.0 * M_PI);
    ResultRecord twobody;
    double twobody_ms = 0.0;
    bool twobody_ok = false;
    guarded(1, "two-body shell asymptotics", [&] {
        twobody = run_lab_to("twobody", (scratch / "twobody").string(), alpha2b, &twobody_ms);
        twobody_ok = true;
        const bool pass = check_of(twobody, "shell_asymptotics") && twobody_ms < 1000.0;
        report(1, "two-body shell asymptotics", pass,
               "rel_err_max=" + fmt(scalar_of(twobody, "shell_rel_err_max")) +
                   " wall_ms=" + fmt(twobody_ms));
    });

    guarded(2, "extension map and boundary residual", [&] {
        if (!twobody_ok) throw std::runtime_error("two-body lab did not run");
        const double ratio = scalar_of(twobody, "asymptotic_ratio");
        const double want = 2.0 * M_PI * M_PI * alpha2b;
        const bool pass = check_of(twobody, "tau_alpha_roundtrip") &&
                          check_of(twobody, "tms_residual_zero") &&
                          check_of(twobody, "asymptotic_ratio_matches");
        report(2, "extension map and boundary residual", pass,
               "roundtrip=" + fmt(scalar_of(twobody, "roundtrip_max_err")) +
                   " residual=" + fmt(scalar_of(twobody, "tms_residual")) +
                   " ratio_dev=" + fmt(std::abs(ratio - want)));
    });

    guarded(3, "two-body bound state", [&] {
        if (!twobody_ok) throw std::runtime_error("two-body lab did not run");
        const bool pass = check_of(twobody, "bound_state_location") &&
                          check_of(twobody, "bound_state_random") && twobody_ms < 1000.0;
        report(3, "two-body bound state", pass,
               "E=" + fmt(scalar_of(twobody, "bound_state")) +
                   " rel_err_max=" + fmt(scalar_of(twobody, "bound_state_rel_err_max")) +
                   " wall_ms=" + fmt(twobody_ms));
    });

    guarded(4, "kernel integrals vs 3D quadrature", [&] {
        oracle::Rng rng(4242);
        double worst_ball = 0.0, worst_sq = 0.0, worst_exact = 0.0;
        for (int i = 0; i < 10; ++i) {
            const MassParams mp = mass_params(rng.log_uniform(0.3, 5.0));
            const double lam = rng.log_uniform(0.2, 5.0);
            const double p1 = rng.log_uniform(0.05, 5.0);
            const double R = rng.log_uniform(2.0, 50.0);
            const double ball = truncated_ball_integral(p1, mp.mu, mp.nu, lam, R);
            const double ball_ref = oracle::ball_integral_ref(p1, mp.mu, lam, R, 1);
            worst_ball = std::max(worst_ball, std::abs(ball - ball_ref) / std::abs(ball_ref));
            const double sq = squared_denominator_integral(p1, mp.nu, lam);
            const double sq_ref = oracle::squared_denominator_ref(p1, mp.mu, lam);
            worst_sq = std::max(worst_sq, std::abs(sq - sq_ref) / std::abs(sq_ref));
            const double closed = M_PI * M_PI / std::sqrt(mp.nu * p1 * p1 + lam);
            worst_exact = std::max(worst_exact, std::abs(sq - closed) / closed);
        }
        const bool pass = worst_ball <= 1e-3 && worst_sq <= 1e-3 && worst_exact <= 1e-12;
        report(4, "kernel integrals vs 3D quadrature", pass,
               "ball=" + fmt(worst_ball) + " sqden=" + fmt(worst_sq) +
                   " closed_form=" + fmt(worst_exact));
    });

    guarded(5, "three-boson level cascade", [&] {
        double ms = 0.0;
        const ResultRecord r = run_lab_to("stm3", (scratch / "stm3").string(), 0.0, &ms);
        const bool pass = check_of(r, "cascade_depth") && check_of(r, "s0_pairwise") &&
                          check_of(r, "s0_danilov_match") &&
                          check_of(r, "ratio_rescale_invariance") && ms < 120000.0;
        report(5, "three-boson level cascade", pass,
               "trusted=" + fmt(scalar_of(r, "trusted_levels")) +
                   " pairwise=" + fmt(scalar_of(r, "s0_pairwise_deviation")) +
                   " danilov=" + fmt(std::abs(scalar_of(r, "s0_danilov") -
                                              scalar_of(r, "s0_from_ratios"))) +
                   " rescale=" + fmt(scalar_of(r, "ratio_rescale_dev")) +
                   " wall_ms=" + fmt(ms));
    });

    // fermionic 2+1 lab once, reused by criteria 6-9
    ResultRecord fermi;
    bool fermi_ok = false;
    guarded(6, "sector quadratic form positivity", [&] {
        fermi = run_lab_to("fermi21", (scratch / "fermi21").string(), 0.7);
        fermi_ok = true;
        const bool pass = check_of(fermi, "w_positive") && check_of(fermi, "pair_norm_identity");
        report(6, "sector quadratic form positivity", pass,
               "pairnorm_max_err=" + fmt(scalar_of(fermi, "pairnorm_max_err")));
    });

    guarded(7, "charge-space mapping dichotomy", [&] {
        if (!fermi_ok) throw std::runtime_error("fermionic lab did not run");
        const bool pass = check_of(fermi, "mapping_bounded") &&
                          check_of(fermi, "mapping_unbounded") &&
                          check_of(fermi, "counterexample_log_growth");
        report(7, "charge-space mapping dichotomy", pass, "see record " + fermi.id);
    });

    guarded(8, "2+1 shell asymptotics", [&] {
        if (!fermi_ok) throw std::runtime_error("fermionic lab did not run");
        report(8, "2+1 shell asymptotics", check_of(fermi, "shell_21"),
               "rel_err_max=" + fmt(scalar_of(fermi, "shell21_max_err")));
    });

    guarded(9, "generator identity and symmetry", [&] {
        if (!fermi_ok) throw std::runtime_error("fermionic lab did not run");
        const bool pass = check_of(fermi, "a_identity") && check_of(fermi, "a_w_symmetry");
        report(9, "generator identity and symmetry", pass,
               "identity=" + fmt(scalar_of(fermi, "a_identity_err")) +
                   " symmetry=" + fmt(scalar_of(fermi, "a_symmetry_err")));
    });

    guarded(10, "mass criticality reproducibility", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto ladder = [](int ppd) {
            std::vector<RadialGrid> grids;
            for (const double pm : {256.0, 512.0, 1024.0, 2048.0})
                grids.push_back(detail::ppd_grid(ppd, 1e-2, pm));
            return grids;
        };
        const MassCriticality m1_c = mass_criticality_scan(1, 1.0, ladder(4), 0.02, 0.2);
        const MassCriticality m1_f = mass_criticality_scan(1, 1.0, ladder(8), 0.02, 0.2);
        const MassCriticality m3 = mass_criticality_scan(3, 1.0, ladder(4), 0.002, 0.05);
        const double dev = std::abs(m1_f.m_crit / m1_c.m_crit - 1.0);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        const bool pass = dev <= 1e-2 && m3.m_crit < m1_c.m_crit && ms < 600000.0;
        report(10, "mass criticality reproducibility", pass,
               "m1=" + fmt(m1_c.m_crit) + " grid_dev=" + fmt(dev) + " m3=" + fmt(m3.m_crit) +
                   " wall_ms=" + fmt(ms));
    });

    guarded(11, "lower bounds and threshold signs", [&] {
        const ResultRecord r = run_lab_to("kvb", (scratch / "kvb").string());
        const bool pass = check_of(r, "kvb_margins") && check_of(r, "positivity_equivalence") &&
                          check_of(r, "sign_threshold_exact") &&
                          check_of(r, "krein_identification");
        report(11, "lower bounds and threshold signs", pass,
               "worst_lower=" + fmt(scalar_of(r, "worst_margin_lower")) +
                   " worst_upper=" + fmt(scalar_of(r, "worst_margin_upper")));
    });

    guarded(12, "thread-count determinism", [&] {
        if (cli_bin.empty()) throw std::runtime_error("no binary path given on the command line");
        bool all_same = true;
        std::string detail;
        for (const std::string target : {"twobody", "stm3", "fermi21", "kvb"}) {
            for (const int th : {1, 8}) {
                const fs::path out = scratch / ("det" + std::to_string(th)) / target;
                fs::remove_all(out);
                const std::string cmd = "\"" + cli_bin + "\" " + target +
                                        (target == "twobody" ? " --alpha -0.1" : "") +
                                        " --threads " + std::to_string(th) + " --out " +
                                        out.string() + " >/dev/null 2>&1";
                if (std::system(cmd.c_str()) == -1)
                    throw std::runtime_error("failed to launch " + cmd);
            }
            const std::string f1 = fingerprint_on_disk(scratch / "det1" / target);
            const std::string f8 = fingerprint_on_disk(scratch / "det8" / target);
            const bool same = f1 == f8;
            all_same = all_same && same;
            detail += target + (same ? "=ok " : "=DIFF ");
        }
        report(12, "thread-count determinism", all_same, detail);
    });

    std::printf("%d of 12 criteria passed\n", 12 - g_failed);
    return g_failed;
}
