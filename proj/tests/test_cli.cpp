// CLI subcommands end to end on fixtures, plus exit codes through the real
// binary.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vidinfer/cli.hpp"
#include "vidinfer/run_record.hpp"

using namespace vidinfer;
namespace fs = std::filesystem;

namespace {

const fs::path kPack = fs::path(VIDINFER_TEST_DIR) / "fixtures" / "pack";
const fs::path kGrids = fs::path(VIDINFER_ASSET_DIR) / "ablations";

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("vidinfer-cli-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

cli::InferOptions pack_infer(const fs::path& out) {
    cli::InferOptions o;
    o.manifest_path = (kPack / "manifest.jsonl").string();
    o.config_path = (kPack / "config.cfg").string();
    o.out_dir = out.string();
    o.fixtures_dir = kPack.string();
    o.parallelism = 2;
    return o;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(VIDINFER_CLI_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing " << p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("infer + eval + judge over the fixture pack") {
    const fs::path out = fresh_dir("run");
    const auto summary = cli::cmd_infer(pack_infer(out));
    CHECK(summary.ok == 2);
    CHECK(summary.failed == 0);
    CHECK(summary.calls.chat == 8);
    CHECK(fs::exists(out / "records.jsonl"));
    CHECK(fs::exists(out / "config_snapshot.cfg"));

    cli::EvalOptions eval_options;
    eval_options.run_dir = out.string();
    eval_options.manifest_path = (kPack / "manifest.jsonl").string();
    eval_options.config_path = (kPack / "config.cfg").string();
    eval_options.fixtures_dir = kPack.string();
    const auto report = cli::cmd_eval(eval_options);
    CHECK(report.count() == 2);
    CHECK(fs::exists(out / "scores.tsv"));
    for (const auto& item : report.items) {
        CHECK(std::isfinite(item.cider));
        CHECK(item.meteor >= 0.0);
        CHECK(item.meteor <= 1.0);
    }

    cli::JudgeOptions judge_options;
    judge_options.run_dir = out.string();
    judge_options.manifest_path = (kPack / "manifest.jsonl").string();
    judge_options.config_path = (kPack / "config.cfg").string();
    judge_options.fixtures_dir = kPack.string();
    const auto verdicts = cli::cmd_judge(judge_options);
    CHECK(verdicts.yes == 2);
    CHECK(verdicts.accuracy_pct == doctest::Approx(100.0));
    CHECK(fs::exists(out / "judge.tsv"));
}

TEST_CASE("rho override reaches every entry") {
    const fs::path out = fresh_dir("rho");
    auto options = pack_infer(out);
    options.rho = 0.3;
    const auto summary = cli::cmd_infer(options);
    CHECK(summary.rho_override == 0.3);
    const auto records = read_records((out / "records.jsonl").string());
    for (const auto& r : records) CHECK(r.rho == doctest::Approx(0.3));
}

TEST_CASE("ablate: ES grid yields a 2-row comparison table") {
    const fs::path out = fresh_dir("ablate-es");
    cli::AblateOptions options;
    options.manifest_path = (kPack / "manifest.jsonl").string();
    options.config_path = (kPack / "config.cfg").string();
    options.grid_path = (kGrids / "es.grid").string();
    options.out_dir = out.string();
    options.fixtures_dir = kPack.string();
    const auto rows = cli::cmd_ablate(options);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cell == "with_es");
    CHECK(rows[1].cell == "without_es");
    for (const auto& row : rows) {
        CHECK(row.ok);
        CHECK(row.videos_ok == 2);
    }
    CHECK(fs::exists(out / "ablation.tsv"));
    CHECK(fs::exists(out / "with_es" / "records.jsonl"));
    CHECK(fs::exists(out / "without_es" / "scores.tsv"));
    const std::string table = slurp(out / "ablation.tsv");
    CHECK(table.find("with_es\tok") != std::string::npos);
}

TEST_CASE("ablate: an invalid cell is marked failed, the grid continues") {
    const fs::path out = fresh_dir("ablate-bad");
    const fs::path grid = out / "bad.grid";
    std::ofstream(grid) << "[good]\npipeline.m_cap = 8\n\n[too_big]\npipeline.m_cap = 32\n";
    cli::AblateOptions options;
    options.manifest_path = (kPack / "manifest.jsonl").string();
    options.config_path = (kPack / "config.cfg").string();
    options.grid_path = grid.string();
    options.out_dir = (out / "runs").string();
    options.fixtures_dir = kPack.string();
    const auto rows = cli::cmd_ablate(options);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ok);
    CHECK_FALSE(rows[1].ok);
    CHECK(rows[1].error.find("M_cap exceeds 16") != std::string::npos);
}

TEST_CASE("report merges run directories sorted and disambiguated") {
    const fs::path base = fresh_dir("report");
    // two runs with the same variant label, one with another
    for (const std::string tag : {"r1", "r2"}) {
        auto options = pack_infer(base / tag);
        options.variant_label = "default";
        cli::cmd_infer(options);
        cli::EvalOptions eval_options;
        eval_options.run_dir = (base / tag).string();
        eval_options.manifest_path = (kPack / "manifest.jsonl").string();
        eval_options.config_path = (kPack / "config.cfg").string();
        eval_options.fixtures_dir = kPack.string();
        cli::cmd_eval(eval_options);
    }
    {
        auto options = pack_infer(base / "r3");
        options.variant_label = "alt";
        options.rho = 0.4;
        cli::cmd_infer(options);
        cli::EvalOptions eval_options;
        eval_options.run_dir = (base / "r3").string();
        eval_options.manifest_path = (kPack / "manifest.jsonl").string();
        eval_options.config_path = (kPack / "config.cfg").string();
        eval_options.fixtures_dir = kPack.string();
        cli::cmd_eval(eval_options);
    }
    const fs::path out_file = base / "merged.tsv";
    const std::string table = cli::cmd_report(
        {(base / "r1").string(), (base / "r2").string(), (base / "r3").string()},
        out_file.string());
    CHECK(fs::exists(out_file));
    CHECK(table.find("default") != std::string::npos);
    CHECK(table.find("default-2") != std::string::npos);  // duplicate disambiguated
    CHECK(table.find("alt") != std::string::npos);
    // deterministic: second invocation produces the same bytes
    CHECK(cli::cmd_report(
              {(base / "r1").string(), (base / "r2").string(), (base / "r3").string()},
              "-") == table);

    // missing scores named explicitly
    const fs::path empty = base / "empty";
    fs::create_directories(empty);
    CHECK_THROWS_WITH_AS(cli::cmd_report({empty.string()}, "-"), doctest::Contains("empty"),
                         std::runtime_error);
}

TEST_CASE("binary exit codes: 0 success, 1 runtime, 2 usage") {
    CHECK(run_binary("--help") == 0);
    CHECK(run_binary("infer") == 2);            // missing required flags
    CHECK(run_binary("infer --manifest /nonexistent --config /nonexistent --out /tmp/x") == 2);
    CHECK(run_binary("bogus-subcommand") == 2);

    const fs::path out = fresh_dir("bin");
    const std::string ok_args = "infer --manifest " + (kPack / "manifest.jsonl").string() +
                                " --config " + (kPack / "config.cfg").string() + " --out " +
                                (out / "run").string() + " --fixtures " + kPack.string();
    CHECK(run_binary(ok_args) == 0);
    CHECK(fs::exists(out / "run" / "records.jsonl"));

    // runtime failure: manifest with a missing frame dir
    const fs::path bad = out / "bad.jsonl";
    std::ofstream(bad) << R"({"video_id": "x", "frame_dir": "/nope", "frame_count": 4, "ground_truth": "g", "task": "goal_inference", "rho": 0.5})"
                       << "\n";
    CHECK(run_binary("infer --manifest " + bad.string() + " --config " +
                     (kPack / "config.cfg").string() + " --out " + (out / "run2").string() +
                     " --fixtures " + kPack.string()) == 1);
}

TEST_CASE("config snapshot reruns reproduce records under fixtures") {
    const fs::path out1 = fresh_dir("snap1");
    cli::cmd_infer(pack_infer(out1));
    // rerun from the snapshot the first run echoed
    const fs::path out2 = fresh_dir("snap2");
    auto options = pack_infer(out2);
    options.config_path = (out1 / "config_snapshot.cfg").string();
    cli::cmd_infer(options);
    auto a = read_records((out1 / "records.jsonl").string());
    auto b = read_records((out2 / "records.jsonl").string());
    const auto by_id = [](const RunRecord& x, const RunRecord& y) {
        return x.video_id < y.video_id;
    };
    std::sort(a.begin(), a.end(), by_id);
    std::sort(b.begin(), b.end(), by_id);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(records_equal_ignoring_timing(a[i], b[i]));
}
