#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmslab/experiment.hpp"

namespace {

struct SubState {
    CLI::App* sub = nullptr;
    std::string config, out;
    int grid_n = 0, ell = 0, levels = 0, threads = 0;
    double p_min = 0, p_max = 0, alpha = 0, lambda = 0, mass = 0;
    std::map<std::string, double> tol;
    std::map<std::string, CLI::Option*> opt;
};

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw tmslab::ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void add_lab_options(SubState& st) {
    CLI::App* s = st.sub;
    st.opt["config"] = s->add_option("--config", st.config, "sectioned key=value config file");
    st.opt["grid-n"] = s->add_option("--grid-n", st.grid_n, "radial grid size");
    st.opt["p-min"] = s->add_option("--p-min", st.p_min, "infrared grid cutoff");
    st.opt["p-max"] = s->add_option("--p-max", st.p_max, "ultraviolet grid cutoff");
    st.opt["alpha"] = s->add_option("--alpha", st.alpha, "inverse scattering parameter");
    st.opt["lambda"] = s->add_option("--lambda", st.lambda, "spectral shift, > 0");
    st.opt["mass"] = s->add_option("--mass", st.mass, "light-particle mass ratio");
    st.opt["ell"] = s->add_option("--ell", st.ell, "angular sector");
    st.opt["levels"] = s->add_option("--levels", st.levels, "levels to locate");
    st.opt["out"] = s->add_option("--out", st.out, "output directory");
    st.opt["threads"] = s->add_option("--threads", st.threads, "worker threads (0 = auto)");
    for (const auto& [name, defv] : tmslab::known_tolerances(s->get_name())) {
        char help[64];
        std::snprintf(help, sizeof help, "tolerance override (default %g)", defv);
        st.opt["tol-" + name] = s->add_option("--tol-" + name, st.tol[name], help);
    }
}

int run_sub(const SubState& st) {
    tmslab::ExperimentConfig cfg;
    cfg.target = st.sub->get_name();
    if (st.opt.at("config")->count() > 0)
        cfg = tmslab::parse_config_text(read_file(st.config), cfg);
    tmslab::apply_environment(cfg);
    if (st.opt.at("grid-n")->count()) cfg.grid_n = st.grid_n;
    if (st.opt.at("p-min")->count()) cfg.p_min = st.p_min;
    if (st.opt.at("p-max")->count()) cfg.p_max = st.p_max;
    if (st.opt.at("alpha")->count()) cfg.alpha = st.alpha;
    if (st.opt.at("lambda")->count()) cfg.lambda = st.lambda;
    if (st.opt.at("mass")->count()) cfg.mass = st.mass;
    if (st.opt.at("ell")->count()) cfg.ell = st.ell;
    if (st.opt.at("levels")->count()) cfg.levels = st.levels;
    if (st.opt.at("out")->count()) cfg.out = st.out;
    if (st.opt.at("threads")->count()) cfg.threads = st.threads;
    for (const auto& [name, defv] : tmslab::known_tolerances(cfg.target))
        if (st.opt.at("tol-" + name)->count()) cfg.tol[name] = st.tol.at(name);
    tmslab::validate_config(cfg);

    const tmslab::ResultRecord rec = tmslab::run_experiment(cfg);
    for (const auto& [name, ok] : rec.checks)
        std::printf("%-28s %s\n", name.c_str(), ok ? "PASS" : "FAIL");
    std::printf("record: %s/%s/record.json  (%.1f ms)\n", cfg.out.c_str(), rec.id.c_str(),
                rec.wall_ms);
    return rec.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point-interaction lab runner: two-body extensions, three-boson "
                 "cascade, 2+1 fermion sectors, form-bound checks"};
    app.require_subcommand(1);

    std::vector<std::unique_ptr<SubState>> subs;
    for (const char* name : {"twobody", "stm3", "fermi21", "kvb"}) {
        auto st = std::make_unique<SubState>();
        st->sub = app.add_subcommand(name, std::string("run the ") + name + " suite");
        add_lab_options(*st);
        subs.push_back(std::move(st));
    }
    CLI::App* rep = app.add_subcommand("report", "summarize prior records");
    std::string rep_out = "runs";
    CLI::Option* rep_out_opt = rep->add_option("--out", rep_out, "output directory to scan");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (rep->parsed()) {
            if (rep_out_opt->count() == 0)
                if (const char* env = std::getenv("TMSLAB_OUT"); env && *env) rep_out = env;
            std::fputs(tmslab::report_summary(rep_out).c_str(), stdout);
            return 0;
        }
        for (const auto& st : subs)
            if (st->sub->parsed()) return run_sub(*st);
        std::fputs("no subcommand selected\n", stderr);
        return 2;
    } catch (const tmslab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
