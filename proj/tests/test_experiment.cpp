#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tmslab/experiment.hpp"

using namespace tmslab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ResultRecord read_record(const fs::path& p) {
    return record_from_json(ordered_json::parse(slurp(p)));
}

int run_cli(const std::string& args) {
    const char* bin = std::getenv("TMSLAB_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config text: sections, precedence over base, strict rejection") {
    ExperimentConfig base;
    base.target = "stm3";
    const std::string text =
        "# comment\n"
        "[run]\n"
        "out = outdir   ; trailing comment\n"
        "threads = 3\n"
        "[grid]\n"
        "grid-n = 256\n"
        "p-min = 1e-3\n"
        "p-max = 1e3\n"
        "[physics]\n"
        "alpha = -0.5\n"
        "lambda = 2\n"
        "mass = 0.5\n"
        "ell = 2\n"
        "levels = 5\n"
        "[tolerances]\n"
        "s0-pairwise = 0.02\n";
    const ExperimentConfig cfg = parse_config_text(text, base);
    CHECK(cfg.out == "outdir");
    CHECK(cfg.threads == 3);
    CHECK(cfg.grid_n == 256);
    CHECK(cfg.p_min == 1e-3);
    CHECK(cfg.p_max == 1e3);
    CHECK(cfg.alpha == -0.5);
    CHECK(cfg.lambda == 2.0);
    CHECK(cfg.mass == 0.5);
    CHECK(cfg.ell == 2);
    CHECK(cfg.levels == 5);
    CHECK(cfg.tol.at("s0-pairwise") == 0.02);
    REQUIRE_NOTHROW(validate_config(cfg));

    CHECK_THROWS_AS(parse_config_text("", base), ConfigError);
    CHECK_THROWS_AS(parse_config_text("# only a comment\n\n", base), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\nbogus = 1\n", base), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[nosuch]\nout = x\n", base), ConfigError);
    CHECK_THROWS_AS(parse_config_text("out = x\n", base), ConfigError);  // key before section
    CHECK_THROWS_AS(parse_config_text("[grid]\ngrid-n = twelve\n", base), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\ngrid-n = 1e3x\n", base), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\ngrid-n 256\n", base), ConfigError);

    // unknown tolerance names surface at validation, against the target
    ExperimentConfig bad = parse_config_text("[tolerances]\nno-such-tol = 1\n", base);
    CHECK_THROWS_AS(validate_config(bad), ConfigError);

    ExperimentConfig v = base;
    v.target = "nolab";
    CHECK_THROWS_AS(validate_config(v), ConfigError);
    v = base;
    v.grid_n = 4;
    CHECK_THROWS_AS(validate_config(v), ConfigError);
    v = base;
    v.p_min = 2.0;
    v.p_max = 1.0;
    CHECK_THROWS_AS(validate_config(v), ConfigError);
    v = base;
    v.lambda = 0.0;
    CHECK_THROWS_AS(validate_config(v), ConfigError);
    v = base;
    v.levels = 2;
    CHECK_THROWS_AS(validate_config(v), ConfigError);
    v = base;
    v.tol["s0-pairwise"] = -1.0;
    CHECK_THROWS_AS(validate_config(v), ConfigError);
}

TEST_CASE("environment overrides and thread resolution") {
    setenv("TMSLAB_OUT", "env_out", 1);
    setenv("TMSLAB_THREADS", "5", 1);
    ExperimentConfig cfg;
    cfg.target = "kvb";
    apply_environment(cfg);
    CHECK(cfg.out == "env_out");
    CHECK(cfg.threads == 5);
    CHECK(resolve_threads(cfg) == 5);
    unsetenv("TMSLAB_OUT");
    unsetenv("TMSLAB_THREADS");
    cfg.threads = 0;
    CHECK(resolve_threads(cfg) >= 1);
}

TEST_CASE("result record: serialization round trip and fingerprint") {
    ResultRecord r;
    r.id = "demo-00000001";
    r.input = ordered_json{{"target", "demo"}, {"alpha", -0.125}};
    r.scalars = {{"tau", 2.7182818284590452}, {"bound_state", -1.0000001}};
    r.series = {{"E_n", {4.4071935919241987e-05, 2.2698639547174241e-02}},
                {"ratio", {515.03613541842}}};
    r.checks = {{"cascade_depth", true}, {"s0_pairwise", false}};
    r.wall_ms = 123.456;

    const ordered_json j = to_json(r);
    const ResultRecord back = record_from_json(ordered_json::parse(j.dump()));
    REQUIRE(back == r);

    // key order is preserved, so reserialization is byte-identical
    CHECK(to_json(back).dump(2) == j.dump(2));

    ResultRecord timed = r;
    timed.wall_ms = 999.0;
    CHECK(timed != r);
    CHECK(record_fingerprint(timed) == record_fingerprint(r));

    ResultRecord other = r;
    other.scalars[0].second = 2.0;
    CHECK(record_fingerprint(other) != record_fingerprint(r));
}

TEST_CASE("record id: derived from physics inputs, blind to plumbing") {
    ExperimentConfig a;
    a.target = "stm3";
    ExperimentConfig b = a;
    b.out = "elsewhere";
    b.threads = 7;
    CHECK(make_record_id(a) == make_record_id(b));
    ExperimentConfig c = a;
    c.alpha = 0.25;
    CHECK(make_record_id(c) != make_record_id(a));
    ExperimentConfig d = a;
    d.tol["s0-pairwise"] = 0.005;
    CHECK(make_record_id(d) != make_record_id(a));
    CHECK(make_record_id(a).rfind("stm3-", 0) == 0);
}

TEST_CASE("csv text: exact headers, round-trip values, ragged rejection") {
    CsvTable t{"shell", {{"R", {10.0, 100.0}}, {"shell_err", {1.25e-3, 0.5e-17}}}};
    const std::string txt = csv_text(t);
    std::istringstream in(txt);
    std::string line;
    std::getline(in, line);
    CHECK(line == "R,shell_err");
    std::getline(in, line);
    CHECK(line.rfind("10,", 0) == 0);
    const double v = std::stod(line.substr(line.find(',') + 1));
    CHECK(v == 1.25e-3);  // %.17g survives the round trip bit-exactly

    CsvTable ragged{"x", {{"a", {1.0, 2.0}}, {"b", {1.0}}}};
    CHECK_THROWS_AS(csv_text(ragged), std::invalid_argument);
    CHECK_THROWS_AS(csv_text(CsvTable{"empty", {}}), std::invalid_argument);
}

TEST_CASE("plot emission: deterministic bytes, validation, log axes") {
    const std::vector<PlotSeries> s = {{"one", {1.0, 10.0, 100.0}, {3.0, 2.0, 5.0}},
                                       {"two", {1.0, 10.0, 100.0}, {1.0, 4.0, 2.0}}};
    const PlotSpec spec{"demo", "x", "y", true, false};
    const std::string svg1 = emit_plot_svg(s, spec);
    const std::string svg2 = emit_plot_svg(s, spec);
    CHECK(svg1 == svg2);
    CHECK(svg1.find("<svg") == 0);
    CHECK(svg1.find("polyline") != std::string::npos);
    CHECK(svg1.find("</svg>") != std::string::npos);

    CHECK_THROWS_AS(emit_plot_svg({}, spec), std::invalid_argument);
    CHECK_THROWS_AS(emit_plot_svg({{"bad", {1.0}, {1.0, 2.0}}}, spec), std::invalid_argument);
    CHECK_THROWS_AS(emit_plot_svg({{"bad", {}, {}}}, spec), std::invalid_argument);
    // nonpositive data is incompatible with a log axis
    CHECK_THROWS_AS(emit_plot_svg({{"bad", {0.0, 1.0}, {1.0, 2.0}}}, spec),
                    std::invalid_argument);
    const PlotSpec logy{"demo", "x", "y", false, true};
    CHECK_THROWS_AS(emit_plot_svg({{"bad", {1.0, 2.0}, {-1.0, 2.0}}}, logy),
                    std::invalid_argument);
    // a single point still renders (degenerate ranges get padded)
    CHECK_NOTHROW(emit_plot_svg({{"pt", {1.0}, {2.0}}}, PlotSpec{"p", "x", "y", false, false}));
}

TEST_CASE("parallel_for: slot writes agree across worker counts") {
    const int n = 103;
    std::vector<double> one(n), many(n);
    parallel_for(n, 1, [&](int i) { one[i] = std::sin(0.1 * i) * i; });
    parallel_for(n, 8, [&](int i) { many[i] = std::sin(0.1 * i) * i; });
    REQUIRE(one == many);
    CHECK_THROWS_AS(parallel_for(4, 2,
                                 [](int i) {
                                     if (i == 3) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("twobody experiment end to end: record, files, disk round trip") {
    const fs::path out = "exp_out_tmp";
    fs::remove_all(out);
    ExperimentConfig cfg;
    cfg.target = "twobody";
    cfg.alpha = -0.0795775;  // -1/(4 pi) to 6 digits
    cfg.lambda = 1.0;
    cfg.out = out.string();
    cfg.threads = 2;
    const ResultRecord rec = run_experiment(cfg);
    REQUIRE(rec.all_passed());
    REQUIRE(rec.find_scalar("bound_state"));
    CHECK(*rec.find_scalar("bound_state") == Catch::Approx(-1.0).epsilon(1e-5));
    CHECK(*rec.find_scalar("tms_residual") == 0.0);

    const fs::path dir = out / rec.id;
    REQUIRE(fs::exists(dir / "record.json"));
    REQUIRE(fs::exists(dir / "series_shell.csv"));
    REQUIRE(fs::exists(dir / "plot_shell.svg"));
    const ResultRecord back = read_record(dir / "record.json");
    REQUIRE(back == rec);

    std::istringstream csv(slurp(dir / "series_shell.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "R,shell_err");
}

TEST_CASE("stm3 experiment: content, rerun and thread-count determinism") {
    const fs::path out = "exp_out_tmp_stm";
    fs::remove_all(out);
    ExperimentConfig cfg;
    cfg.target = "stm3";
    cfg.grid_n = 256;
    cfg.out = out.string();
    cfg.threads = 1;
    const ResultRecord r1 = run_experiment(cfg);
    REQUIRE(r1.all_passed());
    const std::vector<double>* en = r1.find_series("E_n");
    REQUIRE(en != nullptr);
    REQUIRE(en->size() >= 3);
    for (std::size_t i = 1; i < en->size(); ++i) CHECK((*en)[i] > (*en)[i - 1]);
    CHECK(*r1.find_scalar("s0_from_ratios") == Catch::Approx(1.006).epsilon(0.05));

    cfg.threads = 4;
    const ResultRecord r4 = run_experiment(cfg);
    CHECK(record_fingerprint(r1) == record_fingerprint(r4));

    // rerun overwrites the same record directory deterministically
    const ResultRecord r1b = run_experiment(cfg);
    CHECK(record_fingerprint(r1b) == record_fingerprint(r1));

    std::istringstream csv(slurp(out / r1.id / "series_levels.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "n,E_n");
}

TEST_CASE("cli binary: exit codes and the report table") {
    const fs::path out = "exp_out_tmp_cli";
    fs::remove_all(out);

    const fs::path empty_cfg = out / "empty.cfg";
    fs::create_directories(out);
    std::ofstream(empty_cfg).close();
    CHECK(run_cli("stm3 --config " + empty_cfg.string()) == 2);
    CHECK(run_cli("twobody --alpha -0.0795775 --lambda 1 --out " + out.string()) == 0);
    CHECK(run_cli("kvb --out " + out.string()) == 0);
    CHECK(run_cli("kvb --lambda -3 --out " + out.string()) == 2);  // invalid physics
    CHECK(run_cli("--no-such-flag") != 0);
    CHECK(run_cli("") != 0);  // a subcommand is required

    const char* bin = std::getenv("TMSLAB_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd =
        std::string(bin) + " report --out " + out.string() + " > " + (out / "rep.txt").string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string rep = slurp(out / "rep.txt");
    CHECK(rep.find("twobody-") != std::string::npos);
    CHECK(rep.find("kvb-") != std::string::npos);
    CHECK(rep.find("failed") != std::string::npos);
}
