#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "descfilter/commands.hpp"
#include "descfilter/config.hpp"
#include "descfilter/error.hpp"
#include "plants.hpp"

using namespace descfilter;
using descfilter::testing::fixture_path;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    static const fs::path dir = [] {
        std::random_device rd;
        fs::path d = fs::temp_directory_path() / ("descfilter_cli_" + std::to_string(rd()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string scratch(const std::string& name) { return (scratch_dir() / name).string(); }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

// Synthesized once; the filter file is shared by the tests below.
const std::string& two_state_filter_path() {
    static const std::string path = [] {
        const std::string p = scratch("two_state.filter");
        std::ostringstream out, err;
        SynthesizeArgs a;
        a.config = fixture_path("two_state.cfg");
        a.output = p;
        REQUIRE(cmd_synthesize(a, out, err) == kExitOk);
        return p;
    }();
    return path;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string log = scratch("cli.log");
    const std::string cmd = std::string("\"") + DESCFILTER_CLI_PATH + "\" " + args + " > \"" + log + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = read_text_file(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ParseError config_error(const std::string& text) {
    try {
        (void)parse_config(text, "inline.cfg");
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a parse error");
    return ParseError(ErrorKind::Internal, "", 0, 0);
}

} // namespace

TEST_CASE("the reference configuration parses") {
    const auto cfg = load_config(fixture_path("two_state.cfg"));
    CHECK(cfg.plant.n() == 2);
    CHECK(cfg.plant.E(1, 1) == 6.0);
    CHECK(cfg.plant.gamma1 == 0.5);
    CHECK(cfg.structure.preset == FilterPreset::Dynamic);
    CHECK(cfg.simulation.t_end == 30.0);
    CHECK(cfg.simulation.x0_init.mode == InitMode::FreeCoordinates);
    REQUIRE(cfg.simulation.x0_init.free.size() == 1);
    CHECK(cfg.simulation.x0_init.free[0] == 0);
    CHECK(cfg.simulation.x0_guess(0) == -14.7020);
    CHECK(cfg.plant.phi.eval(Vec::Constant(2, 1.0), Vec(), 0.0)(0) == doctest::Approx(0.5 * std::sin(1.0)));
}

TEST_CASE("configuration errors carry their position") {
    try {
        (void)load_config(fixture_path("malformed_row.cfg"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 12);
        CHECK(std::string(e.what()).find("malformed_row.cfg:12:") != std::string::npos);
    }

    CHECK(config_error("[dims]\nn 2\n").line() == 2);
    CHECK(config_error("[dims]\nn = 2\nn = 3\n").line() == 3);
    const auto bad_expr = config_error(
        "[dims]\nn = 1\np = 1\nq = 1\nqw = 1\n[matrices]\nE = 1\nA = -1\nB = 1\nC = 1\nD = 0\nH = 1\n"
        "[nonlinearity]\nphi = sin(x3)\n");
    CHECK(bad_expr.line() == 14);
    CHECK(bad_expr.kind() == ErrorKind::UnknownIdentifier);
}

TEST_CASE("matrix text round trip") {
    Mat m(2, 3);
    m << 1.0 / 3.0, -2e-17, 5, 0.1, 1e300, -7;
    CHECK(parse_matrix(format_matrix(m)) == m);
    CHECK(parse_matrix("[0x2]").cols() == 2);
    CHECK(parse_matrix("[0x2]").rows() == 0);
    CHECK_THROWS_AS((void)parse_matrix("1, 2; 3"), ParseError);
    CHECK_THROWS_AS((void)parse_matrix("1, x"), ParseError);
}

TEST_CASE("init mode text") {
    CHECK(parse_init_mode("min-norm").mode == InitMode::MinimumNorm);
    CHECK(parse_init_mode("hold-differential").mode == InitMode::HoldDifferential);
    const auto f = parse_init_mode("free:1,2");
    CHECK(f.mode == InitMode::FreeCoordinates);
    CHECK(f.free == std::vector<int>{0, 1});
    CHECK(format_init_mode(f) == "free:1,2");
    CHECK_THROWS_AS((void)parse_init_mode("free:0"), Error);
    CHECK_THROWS_AS((void)parse_init_mode("newton"), Error);
}

TEST_CASE("filter file round trip reproduces the margins") {
    const auto cfg = load_config(fixture_path("two_state.cfg"));
    const auto ff = load_filter_file(two_state_filter_path());
    REQUIRE(ff.certificate.has_value());
    const auto again = parse_filter_file(format_filter_file(ff.realization, *ff.certificate));
    CHECK(again.realization.AF == ff.realization.AF);
    CHECK(again.realization.mu_star == ff.realization.mu_star);

    const auto rep = verify(cfg, ff, false);
    CHECK(rep.margins_passed);
    CHECK(rep.realization_consistent);
    CHECK(std::abs(rep.margins.min_margin - ff.certificate->margins.min_margin) < 1e-12);
}

TEST_CASE("synthesize command") {
    std::ostringstream out, err;
    SynthesizeArgs a;
    a.config = fixture_path("two_state.cfg");
    a.output = scratch("again.filter");
    CHECK(cmd_synthesize(a, out, err) == kExitOk);
    CHECK(out.str().find("mu_star: ") != std::string::npos);
    CHECK(out.str().find("rung strict: Infeasible") != std::string::npos);
    CHECK(read_text_file(a.output) == read_text_file(two_state_filter_path()));

    std::ostringstream out2, err2;
    a.config = fixture_path("two_state_gamma100.cfg");
    a.output = scratch("gamma100.filter");
    CHECK(cmd_synthesize(a, out2, err2) == kExitNegative);
    CHECK(out2.str().find("status: Infeasible") != std::string::npos);
    CHECK_FALSE(fs::exists(a.output));

    std::ostringstream out3, err3;
    a.config = fixture_path("malformed_row.cfg");
    CHECK(cmd_synthesize(a, out3, err3) == kExitInputError);
    CHECK(err3.str().find(":12:") != std::string::npos);

    std::ostringstream out4, err4;
    a.config = fixture_path("two_state.cfg");
    a.xi2 = "sideways";
    CHECK(cmd_synthesize(a, out4, err4) == kExitInputError);
}

TEST_CASE("simulate command") {
    SimulateArgs a;
    a.config = fixture_path("two_state.cfg");
    a.filter = two_state_filter_path();
    a.output = scratch("nominal.csv");
    a.nominal = true;
    a.t_end = 5.0;
    std::ostringstream out, err;
    CHECK(cmd_simulate(a, out, err) == kExitOk);
    CHECK(out.str().find("ratio: n/a (w = 0)") != std::string::npos);
    const std::string csv = read_text_file(a.output);
    CHECK(csv.rfind("t,x1,x2,xF1,xF2,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5002);

    a.dt = 1e-2;
    a.output = scratch("coarse.csv");
    std::ostringstream out2, err2;
    CHECK(cmd_simulate(a, out2, err2) == kExitOk);
    const std::string coarse = read_text_file(a.output);
    CHECK(std::count(coarse.begin(), coarse.end(), '\n') == 502);

    std::ostringstream out3, err3;
    a.output = scratch("coarse2.csv");
    CHECK(cmd_simulate(a, out3, err3) == kExitOk);
    CHECK(read_text_file(a.output) == coarse);

    a.filter = scratch("missing.filter");
    std::ostringstream out4, err4;
    CHECK(cmd_simulate(a, out4, err4) == kExitInputError);
}

TEST_CASE("verify command") {
    VerifyArgs a;
    a.config = fixture_path("two_state.cfg");
    a.filter = two_state_filter_path();
    std::ostringstream out, err;
    CHECK(cmd_verify(a, out, err) == kExitOk);
    CHECK(out.str().find("verify: PASS") != std::string::npos);
    CHECK(out.str().find("ratio n/a (w = 0)") != std::string::npos);

    const auto cfg = load_config(a.config);
    const auto ff = load_filter_file(a.filter);
    const auto rep = verify(cfg, ff, true);
    CHECK(rep.scenarios.size() == disturbance_battery(cfg).size());
    for (const auto& s : rep.scenarios) {
        INFO(s.scenario.name << " " << s.error);
        CHECK(s.passed);
        CHECK(s.max_algebraic_residual <= 1e-6);
    }
    const auto serial = verify(cfg, ff, false);
    for (std::size_t i = 0; i < rep.scenarios.size(); ++i) CHECK(serial.scenarios[i].norms.ratio == rep.scenarios[i].norms.ratio);

    // Without a certificate there is nothing to re-check.
    const std::string bare = scratch("bare.filter");
    std::string text = read_text_file(a.filter);
    text = text.substr(0, text.find("[certificate]"));
    write_file(bare, text);
    a.filter = bare;
    std::ostringstream out2, err2;
    CHECK(cmd_verify(a, out2, err2) == kExitInputError);

    // A tampered gain no longer matches the certificate.
    auto tampered = ff;
    tampered.realization.AF(0, 0) += 1.0;
    const std::string bad = scratch("tampered.filter");
    write_file(bad, format_filter_file(tampered.realization, *ff.certificate));
    a.filter = bad;
    std::ostringstream out3, err3;
    CHECK(cmd_verify(a, out3, err3) == kExitNegative);
    CHECK(out3.str().find("realization matches certificate: NO") != std::string::npos);
}

TEST_CASE("command-line binary") {
    std::string output;
    CHECK(run_cli("--version", &output) == 0);
    CHECK(output.find("descfilter") != std::string::npos);
    CHECK(run_cli("", &output) == 1);
    CHECK(run_cli("synthesize \"" + fixture_path("malformed_row.cfg") + "\" -o \"" + scratch("m.filter") + "\"",
                  &output) == 1);
    CHECK(output.find(":12:") != std::string::npos);
    CHECK(run_cli("synthesize \"" + fixture_path("two_state_gamma100.cfg") + "\" -o \"" + scratch("g.filter") + "\"",
                  &output) == 2);
    CHECK(run_cli("verify \"" + fixture_path("two_state.cfg") + "\" \"" + two_state_filter_path() + "\" --serial",
                  &output) == 0);
    CHECK(output.find("verify: PASS") != std::string::npos);
    CHECK(run_cli("simulate \"" + fixture_path("two_state.cfg") + "\" \"" + two_state_filter_path() +
                      "\" --nominal --t-end 1 --dt 0.01 -o \"" + scratch("bin.csv") + "\"",
                  &output) == 0);
    CHECK(fs::exists(scratch("bin.csv")));
}
