#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advdef/harness.hpp"
#include "advdef/image_io.hpp"

// Drives the installed binary end to end: every subcommand, the documented
// exit codes (0 ok, 1 usage, 2 data), and the file formats they exchange.

using namespace advdef;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = ADVDEF_CLI_PATH;

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "advdef_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + kCli.string() + "\" " + args + " > \"" +
                            (work_dir() / "stdout.txt").string() + "\" 2> \"" +
                            (work_dir() / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_stdout() {
    std::ifstream in(work_dir() / "stdout.txt");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("cli end to end: fixtures, detect, purify, eapt, run, evaluate, calibrate") {
    REQUIRE(fs::exists(kCli));
    const fs::path fixtures = work_dir() / "fixtures";

    // gen-fixtures
    REQUIRE(run_cli("gen-fixtures --out \"" + fixtures.string() +
                    "\" --clean 4 --global 4 --patch 4 --seed 99") == 0);
    REQUIRE(fs::exists(fixtures / "manifest.tsv"));
    const auto manifest = read_manifest(fixtures / "manifest.tsv");
    REQUIRE(manifest.size() == 12);

    // detect on a clean image, exporting the loss map
    const fs::path map_path = work_dir() / "clean.lossmap";
    CHECK(run_cli("detect --image \"" + (fixtures / "images" / "clean_000.png").string() +
                  "\" --export-map \"" + map_path.string() + "\"") == 0);
    CHECK(last_stdout().find("verdict=Clean") != std::string::npos);
    const ErrorMap exported = import_error_map(map_path, 14, 14);
    CHECK(exported.grid.maxCoeff() >= 0.0);

    // detect again from the exported map instead of the image
    CHECK(run_cli("detect --import-map \"" + map_path.string() + "\"") == 0);
    CHECK(last_stdout().find("verdict=") != std::string::npos);

    // detect with desk-scale overrides classifies a patch sample as local
    const std::string desk =
        "--set t_s=1e-5 --set t_cc1=0.45 --set t_cc2=0.45";
    CHECK(run_cli("detect --image \"" + (fixtures / "images" / "patch_000.png").string() +
                  "\" " + desk) == 0);
    CHECK(last_stdout().find("verdict=LocalAttack") != std::string::npos);

    // purify the same sample
    const fs::path purified = work_dir() / "purified.png";
    const fs::path mask_out = work_dir() / "mask.png";
    CHECK(run_cli("purify --image \"" + (fixtures / "images" / "patch_000.png").string() +
                  "\" --out \"" + purified.string() + "\" --mask-out \"" + mask_out.string() +
                  "\" " + desk) == 0);
    const Image pur = read_image(purified);
    const Image mask_img = read_image(mask_out);
    CHECK(pur.height == 224);
    CHECK(mask_img.planes[0].maxCoeff() == 1.0f);

    // eapt on a global sample writes a trace and a composed prompt
    const fs::path trace = work_dir() / "trace.csv";
    CHECK(run_cli("eapt --image \"" + (fixtures / "images" / "global_000.png").string() +
                  "\" --prompt \"describe the scene\" --trace-csv \"" + trace.string() +
                  "\"") == 0);
    CHECK(last_stdout().find("prompt: describe the scene ") != std::string::npos);
    {
        std::ifstream tin(trace);
        std::string header;
        std::getline(tin, header);
        CHECK(header == "step,consistency,drift,total,grad_norm");
        int rows = 0;
        std::string line;
        while (std::getline(tin, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 3);
    }

    // run over the manifest, then calibrate from the report and re-run
    const fs::path report = work_dir() / "report.csv";
    const fs::path outcomes = work_dir() / "outcomes.txt";
    const fs::path dist = work_dir() / "dist.csv";
    REQUIRE(run_cli("run --manifest \"" + (fixtures / "manifest.tsv").string() +
                    "\" --report \"" + report.string() + "\" --outcomes \"" +
                    outcomes.string() + "\" --dist \"" + dist.string() + "\"") == 0);
    CHECK(fs::exists(outcomes));
    CHECK(fs::exists(dist));
    const auto rows = read_report_rows(report);
    CHECK(rows.size() == 12);

    CHECK(run_cli("evaluate --report \"" + report.string() + "\"") == 0);
    CHECK(last_stdout().find("f1_binary=") != std::string::npos);

    const fs::path tuned = work_dir() / "tuned.conf";
    REQUIRE(run_cli("calibrate --report \"" + report.string() + "\" --out \"" +
                    tuned.string() + "\"") == 0);
    REQUIRE(fs::exists(tuned));

    const fs::path report2 = work_dir() / "report_tuned.csv";
    REQUIRE(run_cli("run --manifest \"" + (fixtures / "manifest.tsv").string() +
                    "\" --report \"" + report2.string() + "\" --config \"" + tuned.string() +
                    "\"") == 0);
    std::vector<EvalRecord> records;
    for (const ReportRow& r : read_report_rows(report2)) records.push_back(to_eval_record(r));
    const EvalReport rep = evaluate(records);
    CHECK(rep.f1_binary == 1.0);
    CHECK(rep.three_way_accuracy == 1.0);
}

TEST_CASE("cli exit codes: 1 for usage errors, 2 for data errors") {
    REQUIRE(fs::exists(kCli));
    CHECK(run_cli("") == 1);                       // missing subcommand
    CHECK(run_cli("frobnicate") == 1);             // unknown subcommand
    CHECK(run_cli("run --report only.csv") == 1);  // missing required option
    CHECK(run_cli("detect") == 1);                 // neither --image nor --import-map

    CHECK(run_cli("detect --image \"" + (work_dir() / "nope.png").string() + "\"") == 2);
    CHECK(run_cli("run --manifest \"" + (work_dir() / "nope.tsv").string() +
                  "\" --report \"" + (work_dir() / "r.csv").string() + "\"") == 2);
    CHECK(run_cli("detect --import-map \"" + (work_dir() / "nope.lossmap").string() + "\"") == 2);

    // malformed loss map is a data error
    const fs::path bad_map = work_dir() / "bad.lossmap";
    {
        std::ofstream out(bad_map);
        out << "2 2\n0 0\n0 -3\n";
    }
    CHECK(run_cli("detect --import-map \"" + bad_map.string() + "\"") == 2);

    // bad config value is a data error
    CHECK(run_cli("detect --import-map \"" + bad_map.string() + "\" --set t_s=banana") == 2);
}
