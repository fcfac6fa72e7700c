#include <doctest.h>

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include "neuron_margins/report.hpp"
#include "support.hpp"

using testsupport::TempDir;
using testsupport::fixture;
using testsupport::read_text;
using testsupport::write_text;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out, err;
};

// Runs the built binary through the shell, capturing exit code and streams.
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    TempDir io;
    auto out_path = io / ("out" + std::to_string(counter));
    auto err_path = io / ("err" + std::to_string(++counter));
    std::string cmd = env_prefix + std::string(NEURON_MARGINS_BIN) + " " + args + " > " +
                      out_path.string() + " 2> " + err_path.string();
    int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text(out_path);
    r.err = read_text(err_path);
    return r;
}

std::string q(const std::filesystem::path& p) { return p.string(); }

// regenerate the demo bundle into dir; returns the output directory
std::filesystem::path synth_demo(const TempDir& dir, const std::string& spec_name,
                                 const std::string& sub = "bundle") {
    auto out = dir / sub;
    CmdResult r = run_cli("synth --spec " + q(fixture(spec_name)) + " --out " + q(out));
    REQUIRE(r.exit_code == 0);
    return out;
}

}  // namespace

TEST_CASE("cli: no subcommand is a usage error") {
    CmdResult r = run_cli("");
    CHECK(r.exit_code != 0);
}

TEST_CASE("cli synth: regenerating the committed golden bundle is byte-identical") {
    TempDir dir;
    auto out = synth_demo(dir, "synth/demo_spec.json");
    for (std::string name : {"activations.csv", "annotations.csv", "labels.csv", "spec.json"}) {
        CAPTURE(name);
        CHECK(read_text(out / name) == read_text(fixture("synth/golden/" + name)));
    }
}

TEST_CASE("cli synth: --seed override changes the data") {
    TempDir dir;
    auto out = dir / "seeded";
    CmdResult r = run_cli("synth --spec " + q(fixture("synth/demo_spec.json")) + " --seed 999" +
                          " --out " + q(out));
    REQUIRE(r.exit_code == 0);
    CHECK(read_text(out / "activations.csv") !=
          read_text(fixture("synth/golden/activations.csv")));
    // the echoed spec records the effective seed
    CHECK(read_text(out / "spec.json").find("999") != std::string::npos);
}

TEST_CASE("cli synth: malformed spec exits nonzero with a message") {
    TempDir dir;
    auto bad = dir / "bad.json";
    write_text(bad, "{ definitely not json");
    CmdResult r = run_cli("synth --spec " + q(bad) + " --out " + q(dir / "x"));
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("cli analyze: end-to-end over the golden bundle") {
    TempDir dir;
    auto bundle = fixture("synth/golden");
    auto out = dir / "analysis";
    std::string args = "analyze --activations " + q(bundle / "activations.csv") +
                       " --annotations " + q(bundle / "annotations.csv") + " --labels " +
                       q(bundle / "labels.csv") + " --out " + q(out);
    CmdResult r = run_cli(args);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("margin rows retained: 4") != std::string::npos);
    CHECK(std::filesystem::exists(out / "margins.csv"));
    CHECK(std::filesystem::exists(out / "run_config.toml"));
    CHECK(read_text(out / "run_config.toml").find("tla-min") != std::string::npos);

    // the emitted table parses and audits clean
    neuron_margins::MarginTable table = neuron_margins::load_margin_table(out / "margins.csv");
    CHECK(table.rows.size() == 4);
    CHECK(neuron_margins::audit_margin_table(table).empty());

    // identical re-run is byte-identical
    std::string first = read_text(out / "margins.csv");
    CmdResult again = run_cli(args);
    REQUIRE(again.exit_code == 0);
    CHECK(read_text(out / "margins.csv") == first);
}

TEST_CASE("cli analyze: markdown format adds margins.md") {
    TempDir dir;
    auto bundle = fixture("synth/golden");
    auto out = dir / "analysis";
    CmdResult r = run_cli("analyze --activations " + q(bundle / "activations.csv") +
                          " --annotations " + q(bundle / "annotations.csv") + " --labels " +
                          q(bundle / "labels.csv") + " --format markdown --out " + q(out));
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(out / "margins.md"));
    CHECK(read_text(out / "margins.md").find("| concept |") != std::string::npos);
}

TEST_CASE("cli analyze: missing input file fails fast naming the path") {
    TempDir dir;
    CmdResult r = run_cli("analyze --activations /nonexistent/a.csv --annotations /nonexistent/b.csv"
                          " --labels /nonexistent/c.csv --out " + q(dir / "x"));
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("/nonexistent/a.csv") != std::string::npos);
}

TEST_CASE("cli analyze: config file supplies options, flags override it") {
    TempDir dir;
    auto bundle = fixture("synth/golden");
    auto cfg = dir / "cfg.toml";
    write_text(cfg, "[analyze]\ntla-min=99.5\n");
    std::string base = "--config " + q(cfg) + " analyze --activations " +
                       q(bundle / "activations.csv") + " --annotations " +
                       q(bundle / "annotations.csv") + " --labels " + q(bundle / "labels.csv");

    CmdResult from_cfg = run_cli(base + " --out " + q(dir / "o1"));
    REQUIRE(from_cfg.exit_code == 0);
    CHECK(from_cfg.out.find("tla > 99.5") != std::string::npos);

    CmdResult overridden = run_cli(base + " --tla-min 0 --out " + q(dir / "o2"));
    REQUIRE(overridden.exit_code == 0);
    CHECK(overridden.out.find("tla > 0") != std::string::npos);
}

TEST_CASE("cli validate: calibration vs shifted evaluation bundle") {
    TempDir dir;
    auto calib = fixture("synth/golden");
    auto eval = synth_demo(dir, "synth/demo_eval_spec.json", "eval");
    auto out = dir / "validation";
    CmdResult r = run_cli("validate --activations " + q(calib / "activations.csv") +
                          " --annotations " + q(calib / "annotations.csv") + " --labels " +
                          q(calib / "labels.csv") + " --eval-activations " +
                          q(eval / "activations.csv") + " --eval-annotations " +
                          q(eval / "annotations.csv") + " --out " + q(out));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("hypotheses tested: 16") != std::string::npos);
    for (std::string name : {"comparison.csv", "hypotheses.csv", "summary.md",
                             "run_config.toml"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(out / name));
    }
    std::string summary = read_text(out / "summary.md");
    CHECK(summary.find("hypotheses tested: 16") != std::string::npos);
    CHECK(summary.find("| threshold |") != std::string::npos);
}

TEST_CASE("cli test wilcoxon: the bundled >0 block") {
    CmdResult r = run_cli("test wilcoxon --input " + q(fixture("confirmed_pairs/confirmed_gt0.csv")) +
                          " --alternative less");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("W+ = 0") != std::string::npos);
    CHECK(r.out.find("0.00012207") != std::string::npos);
    CHECK(r.out.find("1/8192") != std::string::npos);
    CHECK(r.out.find("rejected at alpha 0.05: yes") != std::string::npos);
}

TEST_CASE("cli test mwu: two labeled groups from CSV") {
    TempDir dir;
    auto input = dir / "groups.csv";
    write_text(input,
               "group,value\ncalib,5\ncalib,6\ncalib,7\neval,1\neval,2\neval,3\n");
    CmdResult r = run_cli("test mwu --input " + q(input) + " --alternative greater");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("U = 9") != std::string::npos);
    CHECK(r.out.find("1/20") != std::string::npos);
    CHECK(r.out.find("\"calib\"") != std::string::npos);
}

TEST_CASE("cli test mwu: more than two groups is an input error") {
    TempDir dir;
    auto input = dir / "groups.csv";
    write_text(input, "group,value\na,1\nb,2\nc,3\n");
    CmdResult r = run_cli("test mwu --input " + q(input));
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("cli: NEURON_MARGINS_LOG gates warning output") {
    TempDir dir;
    // an activation row without annotations triggers a loader warning
    write_text(dir / "acts.csv", "image_id,n0\nimg1,1.0\nimg2,2.0\nimg3,0.5\n");
    write_text(dir / "ann.csv", "image_id,concept\nimg1,road\nimg3,sky\n");
    write_text(dir / "labels.csv", "neuron,rank,concept,coverage_score\n0,1,road,0.9\n");
    std::string args = "analyze --activations " + q(dir / "acts.csv") + " --annotations " +
                       q(dir / "ann.csv") + " --labels " + q(dir / "labels.csv");

    CmdResult loud = run_cli(args + " --out " + q(dir / "o1"));
    REQUIRE(loud.exit_code == 0);
    CHECK(loud.err.find("[warn]") != std::string::npos);

    CmdResult quiet = run_cli(args + " --out " + q(dir / "o2"), "NEURON_MARGINS_LOG=error ");
    REQUIRE(quiet.exit_code == 0);
    CHECK(quiet.err.find("[warn]") == std::string::npos);
}
