#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidinfer/backends.hpp"
#include "vidinfer/config.hpp"
#include "vidinfer/ingest.hpp"
#include "vidinfer/prompts.hpp"
#include "vidinfer/types.hpp"

namespace vidinfer::pipeline {

// "concat" keeps duplicates in order; "union" dedups case-insensitively on
// trimmed text, keeping first appearance.
std::vector<Hypothesis> combine(const HypothesisSet& a, const HypothesisSet& b,
                                const std::optional<Hypothesis>& c, CombineOp op);

struct RunOptions {
    std::filesystem::path run_dir;  // empty: nothing written to disk
    bool dump_similarity = false;
    int parallelism = 1;
};

// Full See -> Guess -> Select -> Infer pass over one video. Any stage error
// yields a failed record; other videos are unaffected.
RunRecord run_video(const VideoManifestEntry& entry, const PipelineConfig& config,
                    backends::BackendSet& backends, const prompts::Renderer& renderer,
                    const RunOptions& options = {});

struct RunSummary {
    std::string dataset;
    std::string variant_label;
    std::optional<double> rho_override;
    int videos = 0;
    int ok = 0;
    int failed = 0;
    int resumed = 0;  // entries skipped because an ok record already existed
    CallCounts calls;            // logical request totals over all videos
    int backend_invocations = 0; // physical calls that reached a backend
    double wall_ms = 0;
};

// Runs every manifest entry (fan-out across `parallelism` workers), appending
// records to <run_dir>/records.jsonl as they complete, snapshotting the
// resolved config, and writing summary.json. Entries that already have an ok
// record in the run directory are skipped (failed ones are retried), so an
// interrupted run resumes where it stopped.
RunSummary run_manifest(const ingest::Manifest& manifest, const PipelineConfig& config,
                        backends::BackendSet& backends, const prompts::Renderer& renderer,
                        const RunOptions& options, const std::string& variant_label = "default",
                        std::optional<double> rho_override = std::nullopt);

std::string summary_to_json(const RunSummary& summary);
RunSummary summary_from_json_file(const std::filesystem::path& path);

}  // namespace vidinfer::pipeline
