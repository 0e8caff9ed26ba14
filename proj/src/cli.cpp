#include "vidinfer/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "vidinfer/run_record.hpp"

namespace vidinfer::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return load_config(path);
}

void require_valid(const PipelineConfig& config) {
    const auto errors = validate_config(config);
    if (errors.empty()) return;
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  [" + e.field + "] " + e.message;
    throw std::runtime_error(msg);
}

// Resumed runs may append a retry after a failed record; the last one wins.
std::vector<RunRecord> latest_records(const std::string& run_dir) {
    const auto raw = read_records((fs::path(run_dir) / "records.jsonl").string());
    std::map<std::string, std::size_t> last;
    for (std::size_t i = 0; i < raw.size(); ++i) last[raw[i].video_id] = i;
    std::vector<RunRecord> out;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (last.at(raw[i].video_id) == i) out.push_back(raw[i]);
    return out;
}

backends::BackendSet make_backends(const PipelineConfig& config, const std::string& fixtures_dir,
                                   const std::string& cache_dir) {
    std::shared_ptr<ResponseCache> cache;
    if (!cache_dir.empty()) cache = std::make_shared<ResponseCache>(cache_dir);
    if (!fixtures_dir.empty())
        return backends::make_fixture_backends(fixtures_dir, config, cache);
    return backends::make_http_backends(config, cache);
}

prompts::Renderer make_renderer(const PipelineConfig& config) {
    prompts::TemplateSet templates = config.prompts_dir.empty()
                                         ? prompts::TemplateSet::builtin()
                                         : prompts::TemplateSet::load_dir(config.prompts_dir);
    const prompts::GenParams gen{config.temperature, config.repetition_penalty,
                                 config.max_tokens};
    const prompts::GenParams judge_gen{config.judge_temperature, config.repetition_penalty,
                                       config.max_tokens};
    return prompts::Renderer(std::move(templates), gen, judge_gen);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

pipeline::RunSummary cmd_infer(const InferOptions& options) {
    const PipelineConfig config = load_config_or_default(options.config_path);
    require_valid(config);
    const auto manifest = ingest::load_manifest(options.manifest_path);

    pipeline::RunOptions run_options;
    run_options.run_dir = options.out_dir;
    run_options.dump_similarity = options.dump_sim;
    run_options.parallelism = options.parallelism;

    fs::create_directories(options.out_dir);
    const std::string cache_dir =
        options.cache_dir.empty() ? (fs::path(options.out_dir) / "cache").string()
                                  : options.cache_dir;
    auto backend_set = make_backends(config, options.fixtures_dir, cache_dir);
    const auto renderer = make_renderer(config);

    const auto summary =
        pipeline::run_manifest(manifest, config, backend_set, renderer, run_options,
                               options.variant_label, options.rho);
    std::cout << "infer: " << summary.ok << "/" << summary.videos << " ok, " << summary.failed
              << " failed";
    if (summary.resumed > 0) std::cout << ", " << summary.resumed << " resumed";
    std::cout << ", " << summary.calls.chat << " chat calls, " << summary.backend_invocations
              << " backend invocations, " << fmt(summary.wall_ms) << " ms\n";
    return summary;
}

metrics::ScoreReport cmd_eval(const EvalOptions& options) {
    const PipelineConfig config = load_config_or_default(options.config_path);
    const auto manifest = ingest::load_manifest(options.manifest_path);
    const auto records = latest_records(options.run_dir);

    std::map<std::string, const VideoManifestEntry*> by_id;
    for (const auto& e : manifest.entries) by_id[e.video_id] = &e;

    std::vector<metrics::ScoredItem> items;
    int skipped = 0;
    for (const auto& rec : records) {
        const auto it = by_id.find(rec.video_id);
        if (it == by_id.end() || rec.status != "ok") {
            ++skipped;
            continue;
        }
        metrics::ScoredItem item;
        item.video_id = rec.video_id;
        item.task = to_string(rec.task.name);
        item.rho = rec.rho;
        item.candidate = rec.final_answer;
        item.reference = it->second->ground_truth;
        items.push_back(std::move(item));
    }
    if (items.empty()) throw std::runtime_error("eval: no scoreable records in run");
    if (skipped > 0) std::cerr << "eval: skipped " << skipped << " failed/unmatched record(s)\n";

    const std::string cache_dir = (fs::path(options.run_dir) / "cache").string();
    auto backend_set = make_backends(config, options.fixtures_dir, cache_dir);
    auto report = metrics::score_pairs(std::move(items), *backend_set.embedder);
    write_text(fs::path(options.run_dir) / "scores.tsv", metrics::report_to_tsv(report));
    std::cout << "eval: " << report.count() << " items, means: cider " << fmt(report.mean_cider)
              << ", meteor_lite " << fmt(report.mean_meteor) << ", embed_cos "
              << fmt(report.mean_embed_cos) << ", embed_f " << fmt(report.mean_embed_f) << "\n";
    return report;
}

judge::JudgeReport cmd_judge(const JudgeOptions& options) {
    const PipelineConfig config = load_config_or_default(options.config_path);
    const auto manifest = ingest::load_manifest(options.manifest_path);
    const auto records = latest_records(options.run_dir);

    const std::string cache_dir = (fs::path(options.run_dir) / "cache").string();
    auto backend_set = make_backends(config, options.fixtures_dir, cache_dir);
    if (!backend_set.judge)
        throw std::runtime_error("judge: no judge backend configured (judge_script.json or "
                                 "backends.judge.endpoint)");
    const auto renderer = make_renderer(config);
    auto report = judge::judge_run(records, manifest, *backend_set.judge, renderer,
                                   options.count_unparseable_as_incorrect);
    write_text(fs::path(options.run_dir) / "judge.tsv", judge::report_to_tsv(report));
    std::cout << "judge: accuracy " << fmt(report.accuracy_pct) << "% (" << report.yes << " yes, "
              << report.no << " no, " << report.unparseable << " unparseable, " << report.errored
              << " errored)\n";
    return report;
}

std::vector<AblationRow> cmd_ablate(const AblateOptions& options) {
    const PipelineConfig base = load_config_or_default(options.config_path);
    // Grid: ordered cells, each a list of config overrides.
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> cells;
    for (const auto& [section, key, value] : parse_kv_lines(read_text(options.grid_path))) {
        if (section.empty())
            throw std::runtime_error("grid: override '" + key + "' outside any [cell] section");
        if (cells.empty() || cells.back().first != section) {
            for (const auto& c : cells)
                if (c.first == section)
                    throw std::runtime_error("grid: duplicate cell '" + section + "'");
            cells.push_back({section, {}});
        }
        cells.back().second.emplace_back(key, value);
    }
    if (cells.empty()) throw std::runtime_error("grid: no cells in '" + options.grid_path + "'");

    fs::create_directories(options.out_dir);
    std::vector<AblationRow> rows;
    for (const auto& [cell, overrides] : cells) {
        AblationRow row;
        row.cell = cell;
        try {
            const PipelineConfig config = apply_overrides(base, overrides);
            require_valid(config);

            InferOptions infer_options;
            infer_options.manifest_path = options.manifest_path;
            infer_options.out_dir = (fs::path(options.out_dir) / cell).string();
            infer_options.parallelism = options.parallelism;
            infer_options.cache_dir = (fs::path(options.out_dir) / "cache").string();
            infer_options.fixtures_dir = options.fixtures_dir;
            infer_options.variant_label = cell;

            const auto manifest = ingest::load_manifest(options.manifest_path);
            pipeline::RunOptions run_options;
            run_options.run_dir = infer_options.out_dir;
            run_options.parallelism = options.parallelism;
            auto backend_set =
                make_backends(config, options.fixtures_dir, infer_options.cache_dir);
            const auto renderer = make_renderer(config);
            const auto summary = pipeline::run_manifest(manifest, config, backend_set, renderer,
                                                        run_options, cell);
            if (summary.ok == 0) throw std::runtime_error("all videos failed");

            EvalOptions eval_options;
            eval_options.run_dir = infer_options.out_dir;
            eval_options.manifest_path = options.manifest_path;
            eval_options.config_path = options.config_path;
            eval_options.fixtures_dir = options.fixtures_dir;
            const auto report = cmd_eval(eval_options);

            row.ok = true;
            row.videos_ok = summary.ok;
            row.cider = report.mean_cider;
            row.meteor = report.mean_meteor;
            row.embed_cos = report.mean_embed_cos;
            row.embed_f = report.mean_embed_f;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
            std::cerr << "ablate: cell '" << cell << "' failed: " << e.what() << "\n";
        }
        rows.push_back(std::move(row));
    }

    std::ostringstream table;
    table << "cell\tstatus\tvideos_ok\tcider\tmeteor_lite\tembed_cos\tembed_f\terror\n";
    for (const auto& r : rows) {
        table << r.cell << "\t" << (r.ok ? "ok" : "failed") << "\t" << r.videos_ok << "\t";
        if (r.ok)
            table << fmt(r.cider) << "\t" << fmt(r.meteor) << "\t" << fmt(r.embed_cos) << "\t"
                  << fmt(r.embed_f) << "\t";
        else
            table << "-\t-\t-\t-\t";
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '\n', ' ');
        std::replace(err.begin(), err.end(), '\t', ' ');
        table << err << "\n";
    }
    write_text(fs::path(options.out_dir) / "ablation.tsv", table.str());
    std::cout << table.str();
    return rows;
}

std::string cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
    struct Row {
        std::string dataset;
        double rho = -1;  // -1: manifest-defined
        std::string variant;
        int items = 0;
        double cider = 0, meteor = 0, embed_cos = 0, embed_f = 0;
    };
    std::vector<Row> rows;
    for (const auto& dir : run_dirs) {
        if (!fs::is_directory(dir)) throw std::runtime_error("report: '" + dir + "' is not a directory");
        const fs::path summary_path = fs::path(dir) / "summary.json";
        const fs::path scores_path = fs::path(dir) / "scores.tsv";
        if (!fs::exists(summary_path))
            throw std::runtime_error("report: missing '" + summary_path.string() + "'");
        if (!fs::exists(scores_path))
            throw std::runtime_error("report: missing score file '" + scores_path.string() + "'");
        const auto summary = pipeline::summary_from_json_file(summary_path);
        const auto scores = metrics::report_from_tsv(read_text(scores_path));
        Row row;
        row.dataset = summary.dataset;
        row.rho = summary.rho_override.value_or(-1);
        row.variant = summary.variant_label;
        row.items = static_cast<int>(scores.count());
        row.cider = scores.mean_cider;
        row.meteor = scores.mean_meteor;
        row.embed_cos = scores.mean_embed_cos;
        row.embed_f = scores.mean_embed_f;
        rows.push_back(std::move(row));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.rho != b.rho) return a.rho < b.rho;
        return a.variant < b.variant;
    });
    // Disambiguate duplicate variant names within the merged table.
    std::map<std::string, int> seen;
    for (auto& row : rows) {
        const std::string key = row.dataset + "\x1e" + row.variant;
        const int n = ++seen[key];
        if (n > 1) row.variant += "-" + std::to_string(n);
    }

    std::ostringstream out;
    out << "dataset\trho\tvariant\titems\tcider\tmeteor_lite\tembed_cos\tembed_f\n";
    for (const auto& r : rows) {
        out << r.dataset << "\t";
        if (r.rho < 0) out << "manifest";
        else out << fmt(r.rho);
        out << "\t" << r.variant << "\t" << r.items << "\t" << fmt(r.cider) << "\t"
            << fmt(r.meteor) << "\t" << fmt(r.embed_cos) << "\t" << fmt(r.embed_f) << "\n";
    }
    const std::string table = out.str();
    if (!out_path.empty() && out_path != "-") write_text(out_path, table);
    std::cout << table;
    return table;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Training-free video goal and action inference over pluggable model backends"};
    app.require_subcommand(1);

    InferOptions infer_options;
    auto* infer = app.add_subcommand("infer", "Run the four-stage pipeline over a manifest");
    infer->add_option("--manifest", infer_options.manifest_path, "Manifest file (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    infer->add_option("--config", infer_options.config_path, "Config file")
        ->required()
        ->check(CLI::ExistingFile);
    infer->add_option("--out", infer_options.out_dir, "Run directory")->required();
    double rho_value = 0;
    auto* rho_opt = infer->add_option("--rho", rho_value, "Override rho for all entries")
                        ->check(CLI::Range(1e-9, 1.0));
    infer->add_option("--parallelism", infer_options.parallelism, "Concurrent videos")
        ->check(CLI::PositiveNumber);
    infer->add_flag("--dump-sim", infer_options.dump_sim, "Dump similarity matrices");
    infer->add_option("--cache-dir", infer_options.cache_dir, "Response cache directory");
    infer->add_option("--fixtures", infer_options.fixtures_dir, "Force fixture backends")
        ->check(CLI::ExistingDirectory);
    infer->add_option("--variant", infer_options.variant_label, "Label for reports");

    EvalOptions eval_options;
    auto* eval = app.add_subcommand("eval", "Score a run's records against ground truth");
    eval->add_option("--run", eval_options.run_dir, "Run directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--manifest", eval_options.manifest_path, "Manifest file")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--config", eval_options.config_path, "Config file")
        ->check(CLI::ExistingFile);
    eval->add_option("--fixtures", eval_options.fixtures_dir, "Force fixture backends")
        ->check(CLI::ExistingDirectory);

    JudgeOptions judge_options;
    auto* judge_cmd = app.add_subcommand("judge", "LLM-as-judge accuracy over a run");
    judge_cmd->add_option("--run", judge_options.run_dir, "Run directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    judge_cmd->add_option("--manifest", judge_options.manifest_path, "Manifest file")
        ->required()
        ->check(CLI::ExistingFile);
    judge_cmd->add_option("--config", judge_options.config_path, "Config file")
        ->check(CLI::ExistingFile);
    judge_cmd->add_option("--fixtures", judge_options.fixtures_dir, "Force fixture backends")
        ->check(CLI::ExistingDirectory);
    judge_cmd->add_flag("!--skip-unparseable", judge_options.count_unparseable_as_incorrect,
                        "Drop unparseable verdicts from the denominator");

    AblateOptions ablate_options;
    auto* ablate = app.add_subcommand("ablate", "Run a grid of config overrides");
    ablate->add_option("--manifest", ablate_options.manifest_path, "Manifest file")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--config", ablate_options.config_path, "Base config file")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--grid", ablate_options.grid_path, "Grid spec ([cell] sections)")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--out", ablate_options.out_dir, "Output directory")->required();
    ablate->add_option("--parallelism", ablate_options.parallelism, "Concurrent videos per cell")
        ->check(CLI::PositiveNumber);
    ablate->add_option("--fixtures", ablate_options.fixtures_dir, "Force fixture backends")
        ->check(CLI::ExistingDirectory);

    std::vector<std::string> report_dirs;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Merge run directories into one table");
    report->add_option("--out", report_out, "Output file ('-' for stdout only)");
    report->add_option("dirs", report_dirs, "Run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*infer) {
            if (*rho_opt) infer_options.rho = rho_value;
            cmd_infer(infer_options);
        } else if (*eval) {
            cmd_eval(eval_options);
        } else if (*judge_cmd) {
            cmd_judge(judge_options);
        } else if (*ablate) {
            cmd_ablate(ablate_options);
        } else if (*report) {
            cmd_report(report_dirs, report_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace vidinfer::cli
