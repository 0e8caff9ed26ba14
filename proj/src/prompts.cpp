#include "vidinfer/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vidinfer::prompts {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

const std::string kPhiD = "Question: What is the content of the image? Answer: ";

const std::string kPhiV =
    "I want to perform {{TASK_NAME}} after observing some visual descriptions.\n"
    "\n"
    "{{ICL_EXAMPLE}}Based on the description: {{DESCRIPTION}}\n"
    "\n"
    "List the most likely {{K_NUMBER}} correct {{TARGET}} without any explanation. Answer: ";

const std::string kPhiL =
    "Briefly list down the steps to perform {{HYPOTHESES}}.\n"
    "List down in point format without require any specific quantity or unit.";

const std::string kPhiF =
    "I want to perform {{TASK_NAME}} after observing some visual descriptions.\n"
    "\n"
    "{{ICL_EXAMPLE}}Based on the description: {{DESCRIPTION}}\n"
    "\n"
    "{{OPTIONS}}List the most likely {{K_NUMBER}} correct {{TARGET}} without any explanation. "
    "Answer: ";

const std::string kJudge =
    "Let A = {{GROUND_TRUTH}}, Let B = {{INFERENCE}}.\n"
    "Determine if A and B have similar meanings, then provide a binary output of 'Yes' or 'No' "
    "only.";

const std::string kIclGoal =
    "Based on the description: The person is standing on a stepladder, holding a light bulb in "
    "one hand and reaching towards the ceiling fixture with the other. There is a toolbox on the "
    "floor, and another light bulb is in his hand.\n"
    "Answer: 1: Replace Ceiling Light Bulb\n"
    "2: Replace Ceiling Fan Blades\n"
    "3: Install a Ceiling Medallion\n"
    "4: Adjust Smoke Detector\n"
    "5: Paint Ceiling\n"
    "\n"
    "Based on the description: The person is seated at a table covered with a large sheet of "
    "white paper. They are holding a heat gun and aiming it at a colorful arrangement of crayon "
    "pieces placed along the top edge of the paper. Then, crayon wax is melting and dripping "
    "down the paper onto a canvas below.\n"
    "Answer: 1: Make Melted Crayon Art\n"
    "2: Make Crayon Candles\n"
    "3: Prepare Crayon Canvas\n"
    "4: Make a Fresco Painting\n"
    "5: Paint Bookshelves";

const std::string kIclAction =
    "Based on the description: The human is holding a paintbrush or other painting tool, with "
    "their arm extended towards a canvas or surface, possibly leaning or sitting in front of "
    "it.\n"
    "Answer: 1: Painting\n"
    "2: Drawing\n"
    "3: Sketching\n"
    "4: Coloring\n"
    "5: Crafting\n"
    "\n"
    "Based on the description: The human is sitting on a bicycle, hands on the handlebars, feet "
    "on the pedals, and body leaning forward.\n"
    "Answer: 1: Cycling\n"
    "2: Biking\n"
    "3: Wheeling\n"
    "4: Pedaling\n"
    "5: Riding";

std::string read_file_if_present(const fs::path& path, const std::string& fallback) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string task_display_name(TaskName name) {
    return name == TaskName::goal_inference ? "goal inference" : "action recognition";
}

// Bullet grammar shared by list and step parsing: "N:", "N.", "N)" or "-".
// Returns the item text, tolerating an "Answer:" preamble.
std::optional<std::string> match_bullet(const std::string& raw_line) {
    std::string line = trim(raw_line);
    const std::string low = lower(line);
    if (low.rfind("answer:", 0) == 0) line = trim(line.substr(7));
    if (line.empty()) return std::nullopt;
    if (line[0] == '-') return trim(line.substr(1));
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i >= line.size()) return std::nullopt;
    if (line[i] != ':' && line[i] != '.' && line[i] != ')') return std::nullopt;
    return trim(line.substr(i + 1));
}

}  // namespace

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set{kPhiD, kPhiV, kPhiL, kPhiF, kJudge, kIclGoal, kIclAction};
    return set;
}

TemplateSet TemplateSet::load_dir(const fs::path& dir) {
    TemplateSet set = builtin();
    set.phi_d = read_file_if_present(dir / "phi_d.txt", set.phi_d);
    set.phi_v = read_file_if_present(dir / "phi_v.txt", set.phi_v);
    set.phi_l = read_file_if_present(dir / "phi_l.txt", set.phi_l);
    set.phi_f = read_file_if_present(dir / "phi_f.txt", set.phi_f);
    set.judge = read_file_if_present(dir / "judge.txt", set.judge);
    set.icl_goal_inference =
        read_file_if_present(dir / "icl_goal_inference.txt", set.icl_goal_inference);
    set.icl_action_recognition =
        read_file_if_present(dir / "icl_action_recognition.txt", set.icl_action_recognition);
    return set;
}

const std::string& TemplateSet::icl_for(TaskName task) const {
    return task == TaskName::goal_inference ? icl_goal_inference : icl_action_recognition;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& bindings) {
    std::string out = tmpl;
    for (const auto& [name, value] : bindings) {
        const std::string marker = "{{" + name + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(marker, pos)) != std::string::npos) {
            out.replace(pos, marker.size(), value);
            pos += value.size();
        }
    }
    const auto open = out.find("{{");
    if (open != std::string::npos && out.find("}}", open) != std::string::npos)
        throw std::invalid_argument("render: unbound placeholder near '" +
                                    out.substr(open, 24) + "'");
    return out;
}

std::string numbered_block(const std::vector<Hypothesis>& options) {
    std::ostringstream out;
    for (std::size_t i = 0; i < options.size(); ++i)
        out << (i + 1) << ": " << options[i].text << "\n";
    return out.str();
}

Renderer::Renderer(TemplateSet templates, GenParams params, GenParams judge_params)
    : templates_(std::move(templates)), params_(params), judge_params_(judge_params) {}

backends::ChatRequest Renderer::wrap(std::string prompt, const GenParams& params) const {
    backends::ChatRequest req;
    req.messages.push_back({"user", std::move(prompt)});
    req.temperature = params.temperature;
    req.repetition_penalty = params.repetition_penalty;
    req.max_tokens = params.max_tokens;
    return req;
}

backends::ChatRequest Renderer::render_guess(const TaskSpec& task, const Description& description,
                                             int k, bool icl) const {
    if (description.empty()) throw std::invalid_argument("render_guess: empty description");
    const std::string icl_block = icl ? templates_.icl_for(task.name) + "\n\n" : "";
    return wrap(render_template(templates_.phi_v,
                                {{"TASK_NAME", task_display_name(task.name)},
                                 {"ICL_EXAMPLE", icl_block},
                                 {"DESCRIPTION", description.text},
                                 {"K_NUMBER", std::to_string(k)},
                                 {"TARGET", task.target_phrase}}),
                params_);
}

backends::ChatRequest Renderer::render_steps(const HypothesisSet& hypotheses) const {
    if (hypotheses.empty()) throw std::invalid_argument("render_steps: empty hypothesis set");
    std::string joined;
    for (std::size_t i = 0; i < hypotheses.items.size(); ++i) {
        if (i) joined += ", ";
        joined += hypotheses.items[i].text;
    }
    return wrap(render_template(templates_.phi_l, {{"HYPOTHESES", joined}}), params_);
}

backends::ChatRequest Renderer::render_final(const TaskSpec& task, const Description& description,
                                             const std::vector<Hypothesis>& options,
                                             bool icl) const {
    if (options.empty()) throw std::invalid_argument("render_final: empty options");
    const std::string icl_block = icl ? templates_.icl_for(task.name) + "\n\n" : "";
    const std::string options_block = "Based on these options:\n" + numbered_block(options) + "\n";
    return wrap(render_template(templates_.phi_f,
                                {{"TASK_NAME", task_display_name(task.name)},
                                 {"ICL_EXAMPLE", icl_block},
                                 {"DESCRIPTION", description.text},
                                 {"OPTIONS", options_block},
                                 {"K_NUMBER", "1"},
                                 {"TARGET", task.target_phrase}}),
                params_);
}

backends::ChatRequest Renderer::render_judge(const std::string& ground_truth,
                                             const std::string& inference) const {
    if (ground_truth.empty()) throw std::invalid_argument("render_judge: empty ground truth");
    if (inference.empty()) throw std::invalid_argument("render_judge: empty inference");
    return wrap(render_template(templates_.judge,
                                {{"GROUND_TRUTH", ground_truth}, {"INFERENCE", inference}}),
                judge_params_);
}

std::vector<std::string> parse_numbered_list(const std::string& reply, int max_items) {
    std::vector<std::string> items;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line) && static_cast<int>(items.size()) < max_items) {
        const auto item = match_bullet(line);
        if (item && !item->empty()) items.push_back(*item);
    }
    if (items.empty())
        throw ParseError("parse_numbered_list: no list items in reply", reply);
    return items;
}

StepList parse_steps(const std::string& reply, const HypothesisSet& hypotheses) {
    if (trim(reply).empty()) throw ParseError("parse_steps: empty reply", reply);
    std::vector<std::string> lowered;
    lowered.reserve(hypotheses.items.size());
    for (const auto& h : hypotheses.items) lowered.push_back(lower(h.text));

    StepList out;
    int current = 0;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto item = match_bullet(line);
        if (item) {
            if (!item->empty()) out.steps.push_back({*item, current});
            continue;
        }
        // Heading: pick the longest contained hypothesis text (lowest index on ties).
        const std::string low = lower(line);
        std::size_t best_len = 0;
        for (std::size_t j = 0; j < lowered.size(); ++j) {
            if (!lowered[j].empty() && low.find(lowered[j]) != std::string::npos &&
                lowered[j].size() > best_len) {
                best_len = lowered[j].size();
                current = static_cast<int>(j);
            }
        }
    }
    if (out.steps.empty()) throw ParseError("parse_steps: no steps in reply", reply);
    return out;
}

std::optional<bool> parse_judge(const std::string& reply) {
    std::string token;
    for (std::size_t i = 0; i <= reply.size(); ++i) {
        const bool alnum =
            i < reply.size() && std::isalnum(static_cast<unsigned char>(reply[i]));
        if (alnum) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i]))));
        } else if (!token.empty()) {
            if (token == "yes") return true;
            if (token == "no") return false;
            token.clear();
        }
    }
    return std::nullopt;
}

}  // namespace vidinfer::prompts
