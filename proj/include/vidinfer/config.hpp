#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vidinfer {

enum class CombineOp { concat, set_union };
enum class SelectorVariant {
    steps_to_frame,
    steps_to_caption,
    hypotheses_to_frame,
    captions_to_frame,
    none
};
enum class StepsCallMode { combined, per_hypothesis };

std::string to_string(CombineOp op);
std::string to_string(SelectorVariant v);
std::string to_string(StepsCallMode m);
std::optional<SelectorVariant> selector_variant_from_string(const std::string& s);

struct BackendEndpoint {
    std::string endpoint;  // empty means "not configured"
    std::string model;
};

// Full pipeline configuration. File form is flat dotted keys, one
// `key = value` per line; see assets/default.cfg.
struct PipelineConfig {
    int n_max = 64;    // stage-1 frame-sampling cap (N)
    int l = 16;        // sub-sample budget (L)
    int m_cap = 16;    // selection cap (M), hard-limited to 16
    int k = 5;         // hypothesis count
    CombineOp combine_op = CombineOp::concat;
    bool use_icl = true;
    bool use_hc = true;
    SelectorVariant selector_variant = SelectorVariant::steps_to_frame;
    int iterations = 1;  // selection iterations, 1..3
    double temperature = 0.001;
    double repetition_penalty = 1.0;
    int max_tokens = 256;

    // Experiment knobs (not paper protocol).
    bool global_topm = false;  // rank all frames by best score instead of per-step argmax
    StepsCallMode steps_call_mode = StepsCallMode::combined;
    bool final_icl = false;  // include the ICL block in the final-selection prompt

    BackendEndpoint chat;
    BackendEndpoint embed;
    std::string embed_image_mode = "path";  // "path" | "base64"
    BackendEndpoint caption;
    BackendEndpoint judge;
    double judge_temperature = 0.0;
    int max_in_flight = 8;

    std::string prompts_dir;  // optional template override directory
    unsigned fixture_seed = 42;
    int fixture_dim = 8;
};

struct ConfigError {
    std::string field;
    std::string message;
};

// Returns every violated invariant; empty means the config is valid.
std::vector<ConfigError> validate_config(const PipelineConfig& config);

// Parse a `key = value` document ('#' comments, blank lines ignored).
// Unknown keys are an error so typos do not silently fall back to defaults.
PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::string& path);
// Apply `key = value` overrides (same keys as the file format) on top of base.
PipelineConfig apply_overrides(PipelineConfig base,
                               const std::vector<std::pair<std::string, std::string>>& overrides);
std::string config_to_text(const PipelineConfig& config);

// Generic dotted-key document reader shared by config and ablation grids.
// Returns key/value pairs in file order; `section` receives INI-style
// "[name]" section headers ("" before the first header).
std::vector<std::tuple<std::string, std::string, std::string>> parse_kv_lines(
    const std::string& text);

}  // namespace vidinfer
