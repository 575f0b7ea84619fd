#include "prlm/experiment.hpp"

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace prlm;
using namespace prlm::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("prlm_cli_tests") / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Proc {
    int status = -1;
    std::string out;
};

Proc shell(const std::string& cmd) {
    Proc r;
    FILE* f = popen((cmd + " 2>&1").c_str(), "r");
    REQUIRE(f != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, f)) > 0) r.out.append(buf, n);
    const int st = pclose(f);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string cli() { return PRLM_CLI_PATH; }
std::string config(const std::string& name) { return std::string(PRLM_CONFIG_DIR) + "/" + name; }

ErrorCode code_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("parse_config defaults", "[cli]") {
    const ExperimentConfig c = parse_config("model: wave_heat\n");
    CHECK(c.model == ModelKind::WaveHeat);
    CHECK(c.T == 2.0);
    CHECK(c.Nt == 200);
    CHECK(c.lambdas == std::vector<double>{1.0});
    CHECK(c.omegas == std::vector<double>{0.25});
    CHECK(c.max_iter == 500);
    CHECK(c.tol == 1e-10);
    CHECK(c.wave.cells == 16);
    CHECK(c.heat_nodes == 16);
    CHECK(c.initial == InitialKind::Bump);
    CHECK(c.input == InputKind::Zero);

    const ExperimentConfig d = parse_config("model: lshape\nT: 4\n");
    CHECK(d.omegas == std::vector<double>{0.125});
}

TEST_CASE("parse_config validation", "[cli]") {
    try {
        parse_config("model: wave_heat\nlambda: [-1]\n");
        FAIL("expected ValidationError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ValidationError);
        CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    }
    CHECK(code_of("T: 1\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: pendulum\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nbogus: 1\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nwave: {cellz: 3}\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nomega: [-0.5]\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nT: 1\nNt: 10\nomega: [10]\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nNt: 0\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nstop: {max_iter: 0}\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: custom\n") == ErrorCode::ValidationError);
    CHECK(code_of("model: wave_heat\nlambda: abc\n") == ErrorCode::ValidationError);
    CHECK(code_of("- 1\n- 2\n") == ErrorCode::ParseError);
}

TEST_CASE("parse_config reports the line of a syntax error", "[cli]") {
    try {
        parse_config("model: wave_heat\nT: 2\nlambda: [1, 2\nNt: 3\n");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(e.index() >= 3);
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
}

TEST_CASE("emit_config round trip", "[cli][property]") {
    ExperimentConfig c = parse_config(
        "model: wave_heat\nT: 1.5\nNt: 30\nlambda: [0.1, 0.30000000000000004]\nomega: [0, 0.2]\n"
        "stop: {tol: 1e-9, max_iter: 7}\nseed: 42\nwave: {cells: 5, rho: [1, 2, 3, 4, 5], damping: [0.5], "
        "left_end: external_force}\nheat: {nodes: 6}\ninitial: {kind: random, amplitude: 0.25}\n"
        "input: {kind: sine, amplitude: 2, frequency: 0.3}\n");
    CHECK(parse_config(emit_config(c)) == c);
    for (const char* text : {"model: lshape\nlshape: {n: 3, damping: 0.5}\n", "model: scalar_demo\n"}) {
        const ExperimentConfig d = parse_config(text);
        CHECK(parse_config(emit_config(d)) == d);
    }
}

TEST_CASE("build_parts and certify", "[cli]") {
    SECTION("shipped models certify") {
        for (const char* m : {"wave_heat", "lshape", "scalar_demo"}) {
            const auto cfg = parse_config(std::string("model: ") + m + "\nNt: 40\n");
            const CertificateReport r = certify(build_parts(cfg), 3);
            INFO(m << "\n" << format_certificates(r));
            CHECK(r.ok());
            REQUIRE(r.monotonicity);
            CHECK(r.monotonicity->samples == kCertificateSamples);
        }
    }
    SECTION("custom model from a matrices file") {
        const auto cfg = load_config(config("custom_two_masses.yaml"));
        const ProblemParts parts = build_parts(cfg);
        CHECK(parts.components.size() == 2);
        CHECK(parts.x0.size() == 4);
        CHECK(certify(parts, 0).ok());
    }
    SECTION("antidissipative custom model fails the certificates") {
        const auto r = certify(build_parts(load_config(config("antidissipative.yaml"))), 0);
        CHECK_FALSE(r.ok());
        CHECK_FALSE(r.components.at(0).dissipativity.is_dissipative);
    }
    SECTION("random initial state is seeded") {
        const auto cfg = parse_config("model: wave_heat\nNt: 10\ninitial: {kind: random}\nseed: 5\n");
        const auto a = build_parts(cfg).x0;
        CHECK(build_parts(cfg).x0 == a);
        auto other = cfg;
        other.seed = 6;
        CHECK_FALSE(build_parts(other).x0 == a);
    }
}

TEST_CASE("run_experiment", "[cli]") {
    SECTION("wave-heat defaults pass every check") {
        auto cfg = parse_config("model: wave_heat\n");
        cfg.output = scratch("defaults").string();
        const ExperimentResult r = run_experiment(cfg);
        CHECK(r.exit_status == 0);
        REQUIRE(r.cells.size() == 1);
        REQUIRE(r.cells[0].report);
        for (const auto& row : r.cells[0].report->rows) CHECK(row.monotone_ok);
        const std::string tag = cell_tag(1.0, 0.25);
        for (const std::string f : {"summary.txt", "reference_x.csv", "reference_u.csv"})
            CHECK(fs::exists(fs::path(cfg.output) / f));
        for (const std::string f : {"report_", "iterate_x_", "iterate_u_"})
            CHECK(fs::exists(fs::path(cfg.output) / (f + tag + ".csv")));
        const std::string report = slurp(fs::path(cfg.output) / ("report_" + tag + ".csv"));
        CHECK(report.rfind("k,dwz_l2,dwz_w,dxu_l2,sup_err,yext_err,psop_bound,monotone_ok,domination_ok,b_ok,c_ok,psop_ok\n", 0) == 0);
        CHECK(slurp(fs::path(cfg.output) / "reference_x.csv").rfind("t,v0,", 0) == 0);
        CHECK(slurp(fs::path(cfg.output) / "summary.txt").find("overall: PASS") != std::string::npos);
    }
    SECTION("antidissipative model gives a nonzero exit status") {
        auto cfg = load_config(config("antidissipative.yaml"));
        cfg.output = scratch("anti").string();
        const ExperimentResult r = run_experiment(cfg);
        CHECK(r.exit_status != 0);
        CHECK(r.cells.empty());
    }
    SECTION("one report per lambda") {
        auto cfg = parse_config("model: scalar_demo\nNt: 20\nlambda: [0.1, 1, 10]\nstop: {max_iter: 50}\n");
        cfg.output = scratch("sweep").string();
        const ExperimentResult r = run_experiment(cfg);
        CHECK(r.cells.size() == 3);
        for (const auto& cell : r.cells) CHECK(cell.report);
        const std::string s = slurp(fs::path(cfg.output) / "summary.txt");
        for (double l : {0.1, 1.0, 10.0})
            CHECK(fs::exists(fs::path(cfg.output) / ("report_" + cell_tag(l, cfg.omegas[0]) + ".csv")));
        CHECK(s.find("lambda") != std::string::npos);
    }
    SECTION("identical inputs give byte-identical outputs") {
        auto cfg = parse_config("model: wave_heat\nNt: 40\nwave: {cells: 6}\nheat: {nodes: 6}\n"
                                "initial: {kind: random}\nseed: 9\nstop: {max_iter: 20}\n");
        const fs::path da = scratch("det_a"), db = scratch("det_b");
        cfg.output = da.string();
        const auto a = run_experiment(cfg);
        cfg.output = db.string();
        const auto b = run_experiment(cfg);
        REQUIRE(a.files == b.files);
        CHECK(a.files.size() == 6);
        for (const auto& f : a.files) CHECK(slurp(da / f) == slurp(db / f));
    }
}

TEST_CASE("emit_summary", "[cli]") {
    const std::vector<ConvergenceReport> none;
    const std::string empty = emit_summary(none);
    CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
    CHECK(empty.rfind("lambda", 0) == 0);

    const TimeGrid g(1.0, 20);
    const CoupledProblem p = models::build_scalar_demo(g);
    StopCriteria stop;
    stop.max_iter = 10;
    const ConvergenceReport rep = run(p, 1.0, 0.5, stop, solve_monolithic(p));
    const std::vector<ConvergenceReport> one{rep};
    const std::string s = emit_summary(one);
    CHECK(std::count(s.begin(), s.end(), '\n') == 2);
    const SummaryRow row = summarize(rep);
    double mono = std::numeric_limits<double>::infinity(), b = mono, c = mono;
    for (const auto& r : rep.rows) {
        mono = std::min(mono, r.monotone_slack);
        b = std::min(b, r.b_slack);
        c = std::min(c, r.c_slack);
    }
    CHECK(row.monotone_slack == mono);
    CHECK(row.b_slack == b);
    CHECK(row.c_slack == c);
    CHECK(row.iterations == rep.iterations);
    CHECK(row.ok == rep.all_ok());
}

TEST_CASE("prlm_cli binary", "[cli]") {
    SECTION("check on a shipped config") {
        const Proc r = shell(cli() + " check " + config("lshape.yaml"));
        CHECK(r.status == 0);
        CHECK(r.out.find("coupling") != std::string::npos);
    }
    SECTION("check rejects an antidissipative model") {
        CHECK(shell(cli() + " check " + config("antidissipative.yaml")).status == 1);
    }
    SECTION("run with --out and --seed") {
        const fs::path out = scratch("binary_run");
        const Proc r = shell(cli() + " --out " + out.string() + " --seed 3 run " + config("scalar_demo.yaml"));
        CHECK(r.status == 0);
        CHECK(r.out.find("overall: PASS") != std::string::npos);
        CHECK(fs::exists(out / "summary.txt"));
        CHECK(slurp(out / "summary.txt").find("seed: 3") != std::string::npos);
    }
    SECTION("bad invocations") {
        CHECK(shell(cli()).status != 0);
        CHECK(shell(cli() + " run /nonexistent.yaml").status != 0);
        const fs::path d = scratch("bad_config");
        std::ofstream(d / "bad.yaml") << "model: wave_heat\nlambda: [0]\n";
        const Proc r = shell(cli() + " run " + (d / "bad.yaml").string());
        CHECK(r.status == 2);
        CHECK(r.out.find("lambda") != std::string::npos);
    }
}
