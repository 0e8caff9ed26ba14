#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vidinfer/backends.hpp"
#include "vidinfer/types.hpp"

namespace vidinfer::prompts {

// Thrown when an LLM reply yields nothing usable; carries the raw reply.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};

// The five templates plus the two ICL blocks. Placeholders are {{NAME}}
// markers; rendering with all placeholders bound leaves no marker behind.
struct TemplateSet {
    std::string phi_d;   // captioner prompt
    std::string phi_v;   // hypothesis guessing
    std::string phi_l;   // step listing
    std::string phi_f;   // final selection (adds the OPTIONS block)
    std::string judge;   // semantic-equivalence judge
    std::string icl_goal_inference;
    std::string icl_action_recognition;

    static const TemplateSet& builtin();
    // Reads any of phi_d.txt, phi_v.txt, phi_l.txt, phi_f.txt, judge.txt,
    // icl_goal_inference.txt, icl_action_recognition.txt from dir; files not
    // present fall back to the builtin text.
    static TemplateSet load_dir(const std::filesystem::path& dir);

    const std::string& icl_for(TaskName task) const;
};

// Substitutes {{NAME}} markers; throws if a marker remains unbound.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& bindings);

struct GenParams {
    double temperature = 0.001;
    double repetition_penalty = 1.0;
    int max_tokens = 256;
};

class Renderer {
  public:
    Renderer(TemplateSet templates, GenParams params, GenParams judge_params);

    const std::string& caption_prompt() const { return templates_.phi_d; }
    backends::ChatRequest render_guess(const TaskSpec& task, const Description& description,
                                       int k, bool icl) const;
    backends::ChatRequest render_steps(const HypothesisSet& hypotheses) const;
    backends::ChatRequest render_final(const TaskSpec& task, const Description& description,
                                       const std::vector<Hypothesis>& options,
                                       bool icl = false) const;
    backends::ChatRequest render_judge(const std::string& ground_truth,
                                       const std::string& inference) const;

  private:
    backends::ChatRequest wrap(std::string prompt, const GenParams& params) const;
    TemplateSet templates_;
    GenParams params_;
    GenParams judge_params_;
};

// Accepts "N:", "N.", "N)" and leading "-" bullets, tolerates an "Answer:"
// preamble, trims items, drops empties, truncates to max_items.
std::vector<std::string> parse_numbered_list(const std::string& reply, int max_items);

// Bullets attach to the nearest preceding heading line that contains a
// hypothesis text (case-insensitive); leading bullets attach to hypothesis 0.
StepList parse_steps(const std::string& reply, const HypothesisSet& hypotheses);

// First case-insensitive "yes"/"no" token wins; nullopt when neither appears.
std::optional<bool> parse_judge(const std::string& reply);

// "N: text" lines in the given order, duplicates retained.
std::string numbered_block(const std::vector<Hypothesis>& options);

}  // namespace vidinfer::prompts
