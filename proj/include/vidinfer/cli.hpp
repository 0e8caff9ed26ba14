#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vidinfer/judge.hpp"
#include "vidinfer/metrics.hpp"
#include "vidinfer/pipeline.hpp"

namespace vidinfer::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage.
int run(int argc, const char* const* argv);

struct InferOptions {
    std::string manifest_path;
    std::string config_path;
    std::string out_dir;
    std::optional<double> rho;
    int parallelism = 1;
    bool dump_sim = false;
    std::string cache_dir;     // default: <out_dir>/cache
    std::string fixtures_dir;  // non-empty forces fixture backends
    std::string variant_label = "default";
};

pipeline::RunSummary cmd_infer(const InferOptions& options);

struct EvalOptions {
    std::string run_dir;
    std::string manifest_path;
    std::string config_path;  // optional; defaults apply when empty
    std::string fixtures_dir;
};

// Scores every ok record against its manifest ground truth and writes
// <run_dir>/scores.tsv. Returns the corpus means in a ScoreReport.
metrics::ScoreReport cmd_eval(const EvalOptions& options);

struct JudgeOptions {
    std::string run_dir;
    std::string manifest_path;
    std::string config_path;
    std::string fixtures_dir;
    bool count_unparseable_as_incorrect = true;
};

judge::JudgeReport cmd_judge(const JudgeOptions& options);

struct AblateOptions {
    std::string manifest_path;
    std::string config_path;  // base config
    std::string grid_path;    // INI-style: [cell] then key = value overrides
    std::string out_dir;
    int parallelism = 1;
    std::string fixtures_dir;
};

struct AblationRow {
    std::string cell;
    bool ok = false;
    std::string error;
    int videos_ok = 0;
    double cider = 0;
    double meteor = 0;
    double embed_cos = 0;
    double embed_f = 0;
};

// One pipeline run + eval per grid cell; failures mark the row and the grid
// continues. The comparison table lands in <out_dir>/ablation.tsv.
std::vector<AblationRow> cmd_ablate(const AblateOptions& options);

// Merges per-run score means into one table sorted by (dataset, rho, variant).
// Duplicate variant labels get numeric suffixes. Writes TSV to out_path.
std::string cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path);

}  // namespace vidinfer::cli
