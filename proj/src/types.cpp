#include "vidinfer/types.hpp"

#include <algorithm>

namespace vidinfer {

std::string to_string(TaskName name) {
    return name == TaskName::goal_inference ? "goal_inference" : "action_recognition";
}

std::optional<TaskName> task_from_string(const std::string& s) {
    if (s == "goal_inference") return TaskName::goal_inference;
    if (s == "action_recognition") return TaskName::action_recognition;
    return std::nullopt;
}

TaskSpec TaskSpec::for_task(TaskName name) {
    TaskSpec spec;
    spec.name = name;
    spec.target_phrase = name == TaskName::goal_inference ? "action goal" : "ongoing action";
    return spec;
}

std::string to_string(FrameStage stage) {
    switch (stage) {
        case FrameStage::sampled_N: return "sampled_N";
        case FrameStage::subsampled_L: return "subsampled_L";
        case FrameStage::selected_M: return "selected_M";
    }
    return "sampled_N";
}

bool FrameSet::valid() const {
    if (indices.empty()) return false;
    for (std::size_t i = 1; i < indices.size(); ++i)
        if (indices[i] <= indices[i - 1]) return false;
    if (stage == FrameStage::selected_M && indices.size() > 16) return false;
    return true;
}

std::string to_string(HypothesisOrigin origin) {
    switch (origin) {
        case HypothesisOrigin::initial: return "initial";
        case HypothesisOrigin::post_selection: return "post_selection";
        case HypothesisOrigin::clip: return "clip";
    }
    return "initial";
}

std::vector<std::string> HypothesisSet::texts() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& h : items) out.push_back(h.text);
    return out;
}

std::vector<std::string> StepList::texts() const {
    std::vector<std::string> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.text);
    return out;
}

}  // namespace vidinfer
