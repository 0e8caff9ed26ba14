#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vidinfer/backends.hpp"
#include "vidinfer/ingest.hpp"
#include "vidinfer/prompts.hpp"
#include "vidinfer/types.hpp"

namespace vidinfer::judge {

enum class Verdict { yes, no, unparseable };

std::string to_string(Verdict verdict);

// Renders the judge prompt, asks the chat model, and parses the yes/no token.
// An unparseable reply gets one re-ask; judge calls never count against the
// pipeline's per-video chat budget.
Verdict judge_pair(const std::string& ground_truth, const std::string& inference,
                   backends::ChatModel& chat, const prompts::Renderer& renderer);

struct JudgedItem {
    std::string video_id;
    std::string task;
    std::string ground_truth;
    std::string inference;
    Verdict verdict = Verdict::unparseable;
    std::string error;  // per-item failure (missing ground truth, transport)
};

struct JudgeReport {
    std::vector<JudgedItem> items;
    int yes = 0;
    int no = 0;
    int unparseable = 0;
    int errored = 0;
    double accuracy_pct = 0;  // yes / judged, in percent
    // task -> (yes, judged)
    std::vector<std::tuple<std::string, int, int>> per_task;
};

// Joins records with the manifest's ground truths and judges each pair.
// Unparseable verdicts count as incorrect unless count_unparseable is false
// (then they drop out of the denominator). Missing ground truth is a per-item
// error; the run continues.
JudgeReport judge_run(const std::vector<RunRecord>& records, const ingest::Manifest& manifest,
                      backends::ChatModel& chat, const prompts::Renderer& renderer,
                      bool count_unparseable_as_incorrect = true);

std::string report_to_tsv(const JudgeReport& report);

}  // namespace vidinfer::judge
