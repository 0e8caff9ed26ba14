#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vidinfer {

enum class TaskName { goal_inference, action_recognition };

std::string to_string(TaskName name);
std::optional<TaskName> task_from_string(const std::string& s);

// The inference task: its label and the phrase naming the desired output kind
// ("action goal" for goal inference, "ongoing action" for action recognition).
struct TaskSpec {
    TaskName name = TaskName::goal_inference;
    std::string target_phrase;

    static TaskSpec for_task(TaskName name);
    bool operator==(const TaskSpec&) const = default;
};

struct VideoManifestEntry {
    std::string video_id;
    std::string frame_dir;
    int frame_count = 0;
    std::string ground_truth;
    TaskSpec task;
    double rho = 1.0;  // observed chronological prefix fraction, (0, 1]
};

enum class FrameStage { sampled_N, subsampled_L, selected_M };

std::string to_string(FrameStage stage);

// Ordered frame references with their temporal indices.
struct FrameSet {
    std::string video_id;
    std::vector<int> indices;  // strictly increasing
    FrameStage stage = FrameStage::sampled_N;

    bool valid() const;
    bool operator==(const FrameSet&) const = default;
};

struct Caption {
    int frame_index = 0;
    std::string text;  // trimmed, non-empty

    bool operator==(const Caption&) const = default;
};

// Captions deduplicated and joined with ", then, " into one paragraph.
struct Description {
    std::string text;
    std::vector<int> source_frames;

    bool empty() const { return text.empty(); }
};

enum class HypothesisOrigin { initial, post_selection, clip };

std::string to_string(HypothesisOrigin origin);

struct Hypothesis {
    std::string text;
    HypothesisOrigin origin = HypothesisOrigin::initial;

    bool operator==(const Hypothesis&) const = default;
};

struct HypothesisSet {
    std::vector<Hypothesis> items;  // generation order
    int k = 0;                      // requested count

    bool empty() const { return items.empty(); }
    std::vector<std::string> texts() const;
};

struct Step {
    std::string text;
    int hypothesis_index = 0;  // back-pointer into the generating HypothesisSet

    bool operator==(const Step&) const = default;
};

// Flattened hypothesized steps, grouped contiguously per hypothesis.
struct StepList {
    std::vector<Step> steps;

    bool empty() const { return steps.empty(); }
    std::size_t size() const { return steps.size(); }
    std::vector<std::string> texts() const;
};

// Logical request counts per backend kind for one video. Cache hits count:
// these track what the pipeline asked for, not what went over the wire.
struct CallCounts {
    int chat = 0;
    int caption = 0;
    int embed_text = 0;
    int embed_image = 0;

    bool operator==(const CallCounts&) const = default;
};

struct StageTiming {
    double see_ms = 0;
    double guess_ms = 0;
    double select_ms = 0;
    double infer_ms = 0;
    double total_ms = 0;
};

// Everything observed while running one video through the pipeline.
struct RunRecord {
    std::string video_id;
    TaskSpec task;
    double rho = 1.0;
    std::string status = "ok";  // "ok" | "failed"
    std::string error;          // set when status == "failed"

    std::vector<int> sampled_frames;  // stage-1 sampled indices (N)
    std::vector<Caption> captions_initial;
    std::vector<std::string> hypotheses_initial;
    std::vector<Step> steps;
    std::vector<int> selected_frames;
    std::vector<Caption> captions_selected;
    std::vector<std::string> hypotheses_selected;
    std::optional<std::string> clip_hypothesis;
    std::string final_answer;
    bool answer_in_options = false;

    CallCounts calls;
    StageTiming timing;
};

}  // namespace vidinfer
