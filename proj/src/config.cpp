#include "vidinfer/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vidinfer {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw std::runtime_error("config: " + key + ": expected boolean, got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: " + key + ": expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: " + key + ": expected number, got '" + v + "'");
    }
}

void apply_one(PipelineConfig& c, const std::string& key, const std::string& value) {
    if (key == "pipeline.n_max") c.n_max = parse_int(value, key);
    else if (key == "pipeline.l") c.l = parse_int(value, key);
    else if (key == "pipeline.m_cap") c.m_cap = parse_int(value, key);
    else if (key == "pipeline.k") c.k = parse_int(value, key);
    else if (key == "pipeline.combine_op") {
        if (value == "concat") c.combine_op = CombineOp::concat;
        else if (value == "union") c.combine_op = CombineOp::set_union;
        else throw std::runtime_error("config: pipeline.combine_op: unknown value '" + value + "'");
    } else if (key == "pipeline.use_icl") c.use_icl = parse_bool(value, key);
    else if (key == "pipeline.use_hc") c.use_hc = parse_bool(value, key);
    else if (key == "pipeline.selector_variant") {
        const auto v = selector_variant_from_string(value);
        if (!v) throw std::runtime_error("config: pipeline.selector_variant: unknown value '" + value + "'");
        c.selector_variant = *v;
    } else if (key == "pipeline.iterations") c.iterations = parse_int(value, key);
    else if (key == "pipeline.temperature") c.temperature = parse_double(value, key);
    else if (key == "pipeline.repetition_penalty") c.repetition_penalty = parse_double(value, key);
    else if (key == "pipeline.max_tokens") c.max_tokens = parse_int(value, key);
    else if (key == "pipeline.global_topm") c.global_topm = parse_bool(value, key);
    else if (key == "pipeline.steps_call_mode") {
        if (value == "combined") c.steps_call_mode = StepsCallMode::combined;
        else if (value == "per_hypothesis") c.steps_call_mode = StepsCallMode::per_hypothesis;
        else throw std::runtime_error("config: pipeline.steps_call_mode: unknown value '" + value + "'");
    } else if (key == "pipeline.final_icl") c.final_icl = parse_bool(value, key);
    else if (key == "backends.chat.endpoint") c.chat.endpoint = value;
    else if (key == "backends.chat.model") c.chat.model = value;
    else if (key == "backends.embed.endpoint") c.embed.endpoint = value;
    else if (key == "backends.embed.model") c.embed.model = value;
    else if (key == "backends.embed.image_mode") c.embed_image_mode = value;
    else if (key == "backends.caption.endpoint") c.caption.endpoint = value;
    else if (key == "backends.caption.model") c.caption.model = value;
    else if (key == "backends.judge.endpoint") c.judge.endpoint = value;
    else if (key == "backends.judge.model") c.judge.model = value;
    else if (key == "backends.judge.temperature") c.judge_temperature = parse_double(value, key);
    else if (key == "backends.max_in_flight") c.max_in_flight = parse_int(value, key);
    else if (key == "prompts.dir") c.prompts_dir = value;
    else if (key == "fixtures.seed") c.fixture_seed = static_cast<unsigned>(parse_int(value, key));
    else if (key == "fixtures.dim") c.fixture_dim = parse_int(value, key);
    else throw std::runtime_error("config: unknown key '" + key + "'");
}

}  // namespace

std::string to_string(CombineOp op) { return op == CombineOp::concat ? "concat" : "union"; }

std::string to_string(SelectorVariant v) {
    switch (v) {
        case SelectorVariant::steps_to_frame: return "steps_to_frame";
        case SelectorVariant::steps_to_caption: return "steps_to_caption";
        case SelectorVariant::hypotheses_to_frame: return "hypotheses_to_frame";
        case SelectorVariant::captions_to_frame: return "captions_to_frame";
        case SelectorVariant::none: return "none";
    }
    return "steps_to_frame";
}

std::string to_string(StepsCallMode m) {
    return m == StepsCallMode::combined ? "combined" : "per_hypothesis";
}

std::optional<SelectorVariant> selector_variant_from_string(const std::string& s) {
    if (s == "steps_to_frame") return SelectorVariant::steps_to_frame;
    if (s == "steps_to_caption") return SelectorVariant::steps_to_caption;
    if (s == "hypotheses_to_frame") return SelectorVariant::hypotheses_to_frame;
    if (s == "captions_to_frame") return SelectorVariant::captions_to_frame;
    if (s == "none") return SelectorVariant::none;
    return std::nullopt;
}

std::vector<ConfigError> validate_config(const PipelineConfig& c) {
    std::vector<ConfigError> errors;
    if (c.n_max < 1) errors.push_back({"pipeline.n_max", "N_max must be >= 1"});
    if (c.l < 1) errors.push_back({"pipeline.l", "L must be >= 1"});
    if (c.l > c.n_max) errors.push_back({"pipeline.l", "L must not exceed N_max"});
    if (c.m_cap < 1) errors.push_back({"pipeline.m_cap", "M_cap must be >= 1"});
    if (c.m_cap > 16) errors.push_back({"pipeline.m_cap", "M_cap exceeds 16"});
    if (c.k < 1) errors.push_back({"pipeline.k", "k must be >= 1"});
    if (c.iterations < 1 || c.iterations > 3)
        errors.push_back({"pipeline.iterations", "iterations must be in {1,2,3}"});
    if (c.temperature < 0) errors.push_back({"pipeline.temperature", "temperature must be >= 0"});
    if (c.max_tokens < 1) errors.push_back({"pipeline.max_tokens", "max_tokens must be >= 1"});
    if (c.max_in_flight < 1)
        errors.push_back({"backends.max_in_flight", "max_in_flight must be >= 1"});
    if (c.embed_image_mode != "path" && c.embed_image_mode != "base64")
        errors.push_back({"backends.embed.image_mode", "image_mode must be 'path' or 'base64'"});
    if (c.fixture_dim < 2) errors.push_back({"fixtures.dim", "dim must be >= 2"});
    return errors;
}

std::vector<std::tuple<std::string, std::string, std::string>> parse_kv_lines(
    const std::string& text) {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments: '#' at start of line or preceded by whitespace.
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line = line.substr(0, i);
                break;
            }
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw std::runtime_error("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(section, key, value);
    }
    return out;
}

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig c;
    for (const auto& [section, key, value] : parse_kv_lines(text)) {
        if (!section.empty())
            throw std::runtime_error("config: sections are not allowed in config files");
        apply_one(c, key, value);
    }
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

PipelineConfig apply_overrides(
    PipelineConfig base, const std::vector<std::pair<std::string, std::string>>& overrides) {
    for (const auto& [key, value] : overrides) apply_one(base, key, value);
    return base;
}

std::string config_to_text(const PipelineConfig& c) {
    std::ostringstream out;
    out << "pipeline.n_max = " << c.n_max << "\n";
    out << "pipeline.l = " << c.l << "\n";
    out << "pipeline.m_cap = " << c.m_cap << "\n";
    out << "pipeline.k = " << c.k << "\n";
    out << "pipeline.combine_op = " << to_string(c.combine_op) << "\n";
    out << "pipeline.use_icl = " << (c.use_icl ? "true" : "false") << "\n";
    out << "pipeline.use_hc = " << (c.use_hc ? "true" : "false") << "\n";
    out << "pipeline.selector_variant = " << to_string(c.selector_variant) << "\n";
    out << "pipeline.iterations = " << c.iterations << "\n";
    out << "pipeline.temperature = " << c.temperature << "\n";
    out << "pipeline.repetition_penalty = " << c.repetition_penalty << "\n";
    out << "pipeline.max_tokens = " << c.max_tokens << "\n";
    out << "pipeline.global_topm = " << (c.global_topm ? "true" : "false") << "\n";
    out << "pipeline.steps_call_mode = " << to_string(c.steps_call_mode) << "\n";
    out << "pipeline.final_icl = " << (c.final_icl ? "true" : "false") << "\n";
    if (!c.chat.endpoint.empty()) out << "backends.chat.endpoint = " << c.chat.endpoint << "\n";
    if (!c.chat.model.empty()) out << "backends.chat.model = " << c.chat.model << "\n";
    if (!c.embed.endpoint.empty()) out << "backends.embed.endpoint = " << c.embed.endpoint << "\n";
    if (!c.embed.model.empty()) out << "backends.embed.model = " << c.embed.model << "\n";
    out << "backends.embed.image_mode = " << c.embed_image_mode << "\n";
    if (!c.caption.endpoint.empty())
        out << "backends.caption.endpoint = " << c.caption.endpoint << "\n";
    if (!c.caption.model.empty()) out << "backends.caption.model = " << c.caption.model << "\n";
    if (!c.judge.endpoint.empty()) out << "backends.judge.endpoint = " << c.judge.endpoint << "\n";
    if (!c.judge.model.empty()) out << "backends.judge.model = " << c.judge.model << "\n";
    out << "backends.judge.temperature = " << c.judge_temperature << "\n";
    out << "backends.max_in_flight = " << c.max_in_flight << "\n";
    if (!c.prompts_dir.empty()) out << "prompts.dir = " << c.prompts_dir << "\n";
    out << "fixtures.seed = " << c.fixture_seed << "\n";
    out << "fixtures.dim = " << c.fixture_dim << "\n";
    return out.str();
}

}  // namespace vidinfer
