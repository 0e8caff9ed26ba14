#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vidinfer/backends.hpp"
#include "vidinfer/kernels.hpp"

namespace vidinfer::backends {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim_copy(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Last two path components, the lookup key for caption/frame tables.
std::string tail_key(const fs::path& p) {
    const fs::path name = p.filename();
    const fs::path parent = p.parent_path().filename();
    if (parent.empty()) return name.string();
    return parent.string() + "/" + name.string();
}

int frame_index_from_name(const fs::path& p) {
    const std::string stem = p.stem().string();
    std::string digits;
    for (const char c : stem)
        if (c >= '0' && c <= '9') digits.push_back(c);
    if (digits.empty()) return -1;
    return std::stoi(digits);
}

void check_unit_norm(const std::vector<float>& v, const std::string& what) {
    const float norm = kernels::l2_norm(v);
    if (std::abs(norm - 1.0f) > 1e-6f)
        throw std::runtime_error("fixture embeddings: " + what + " is not unit norm (|v| = " +
                                 std::to_string(norm) + ")");
}

}  // namespace

FixtureCaptioner::FixtureCaptioner(const fs::path& table_path) {
    std::ifstream in(table_path, std::ios::binary);
    if (!in)
        throw std::runtime_error("fixture captions: cannot open '" + table_path.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("fixture captions: line " + std::to_string(lineno) +
                                     ": expected '<path>\\t<caption>'");
        table_[trim_copy(line.substr(0, tab))] = trim_copy(line.substr(tab + 1));
    }
}

Caption FixtureCaptioner::caption_frame(const fs::path& frame_path, const std::string&) {
    count_invocation();
    const auto it = table_.find(tail_key(frame_path));
    if (it == table_.end())
        throw std::runtime_error("fixture captions: no entry for '" + tail_key(frame_path) + "'");
    return Caption{-1, it->second};
}

FixtureEmbedder::FixtureEmbedder(unsigned seed, int dim) : seed_(seed), dim_(dim) {
    if (dim_ < 2) throw std::invalid_argument("fixture embedder: dim must be >= 2");
}

void FixtureEmbedder::load_text_table(const fs::path& tsv_path) {
    std::ifstream in(tsv_path, std::ios::binary);
    if (!in)
        throw std::runtime_error("fixture embeddings: cannot open '" + tsv_path.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("fixture embeddings: line " + std::to_string(lineno) +
                                     ": expected '<text>\\t<values>'");
        const std::string text = trim_copy(line.substr(0, tab));
        std::istringstream vals(line.substr(tab + 1));
        std::vector<float> v;
        float x = 0;
        while (vals >> x) v.push_back(x);
        if (static_cast<int>(v.size()) != dim_)
            throw std::runtime_error("fixture embeddings: line " + std::to_string(lineno) +
                                     ": expected " + std::to_string(dim_) + " values");
        check_unit_norm(v, "'" + text + "'");
        text_table_[text] = std::move(v);
    }
}

void FixtureEmbedder::load_frame_file(const std::string& video_id, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("fixture embeddings: cannot open '" + path.string() + "'");
    int file_dim = 0;
    if (!(in >> file_dim) || file_dim < 2)
        throw std::runtime_error("fixture embeddings: '" + path.string() +
                                 "': first line must be the dimension");
    auto& rows = frame_table_[video_id];
    int idx = 0;
    while (in >> idx) {
        std::vector<float> v(static_cast<std::size_t>(file_dim));
        for (auto& x : v)
            if (!(in >> x))
                throw std::runtime_error("fixture embeddings: '" + path.string() +
                                         "': truncated row for frame " + std::to_string(idx));
        check_unit_norm(v, path.string() + " frame " + std::to_string(idx));
        rows[idx] = std::move(v);
    }
}

std::vector<float> FixtureEmbedder::seeded_vector(const std::string& token) {
    // Stable 64-bit seed from the content digest; Box-Muller keeps the value
    // stream identical across standard libraries.
    const std::string digest = sha256_hex(std::to_string(seed_) + "\x1e" + token);
    std::uint64_t s = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = digest[static_cast<std::size_t>(i)];
        s = s * 16 + static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    std::mt19937_64 rng(s);
    const auto uniform = [&rng] {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    std::vector<float> v(static_cast<std::size_t>(dim_));
    for (int i = 0; i < dim_; i += 2) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        v[static_cast<std::size_t>(i)] = static_cast<float>(r * std::cos(2.0 * std::numbers::pi * u2));
        if (i + 1 < dim_)
            v[static_cast<std::size_t>(i + 1)] =
                static_cast<float>(r * std::sin(2.0 * std::numbers::pi * u2));
    }
    if (!kernels::normalize(v)) v[0] = 1.0f;
    return v;
}

std::vector<EmbeddingVector> FixtureEmbedder::embed_texts(const std::vector<std::string>& texts) {
    count_invocation();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (text.empty()) throw std::invalid_argument("embed_texts: empty string input");
        EmbeddingVector v;
        v.modality = Modality::text;
        const auto it = text_table_.find(text);
        v.values = it != text_table_.end() ? it->second : seeded_vector("text:" + text);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> FixtureEmbedder::embed_frames(const std::vector<fs::path>& paths) {
    count_invocation();
    std::vector<EmbeddingVector> out;
    out.reserve(paths.size());
    for (const auto& path : paths) {
        if (!fs::exists(path))
            throw std::runtime_error("embed_frames: missing file '" + path.string() + "'");
        EmbeddingVector v;
        v.modality = Modality::image;
        const std::string video_id = path.parent_path().filename().string();
        const int idx = frame_index_from_name(path);
        const auto vid = frame_table_.find(video_id);
        if (vid != frame_table_.end()) {
            const auto row = vid->second.find(idx);
            if (row == vid->second.end())
                throw std::runtime_error("fixture embeddings: no row for frame " +
                                         std::to_string(idx) + " of '" + video_id + "'");
            v.values = row->second;
        } else {
            v.values = seeded_vector("image:" + tail_key(path));
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::string FixtureEmbedder::identity() const {
    return "fixture-embedder-" + std::to_string(seed_) + "-" + std::to_string(dim_);
}

ScriptedChat::ScriptedChat(const fs::path& script_path, std::string name)
    : name_(std::move(name)) {
    std::ifstream in(script_path, std::ios::binary);
    if (!in)
        throw std::runtime_error("chat script: cannot open '" + script_path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("chat script: parse failure in '" + script_path.string() +
                                 "': " + e.what());
    }
    for (const auto& rule : j) {
        Rule r;
        for (const auto& c : rule.at("contains")) r.contains.push_back(c.get<std::string>());
        r.reply = rule.at("reply").get<std::string>();
        rules_.push_back(std::move(r));
    }
}

void ScriptedChat::add_rule(std::vector<std::string> contains, std::string reply) {
    rules_.push_back({std::move(contains), std::move(reply)});
}

std::string ScriptedChat::chat(const ChatRequest& request) {
    count_invocation();
    const std::string& prompt = request.last_user_content();
    for (const auto& rule : rules_) {
        bool all = true;
        for (const auto& needle : rule.contains)
            if (prompt.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        if (all) return rule.reply;
    }
    throw std::runtime_error("scripted chat: no rule matches prompt starting '" +
                             prompt.substr(0, 80) + "...'");
}

BackendSet make_fixture_backends(const fs::path& fixtures_dir, const PipelineConfig& config,
                                 std::shared_ptr<ResponseCache> cache) {
    if (!fs::is_directory(fixtures_dir))
        throw std::runtime_error("fixtures: '" + fixtures_dir.string() + "' is not a directory");

    auto captioner = std::make_shared<FixtureCaptioner>(fixtures_dir / "captions.tsv");
    auto embedder = std::make_shared<FixtureEmbedder>(config.fixture_seed, config.fixture_dim);
    if (fs::exists(fixtures_dir / "text_embeddings.tsv"))
        embedder->load_text_table(fixtures_dir / "text_embeddings.tsv");
    const fs::path frame_dir = fixtures_dir / "frame_embeddings";
    if (fs::is_directory(frame_dir))
        for (const auto& entry : fs::directory_iterator(frame_dir))
            if (entry.is_regular_file())
                embedder->load_frame_file(entry.path().stem().string(), entry.path());
    auto chat = std::make_shared<ScriptedChat>(fixtures_dir / "chat_script.json");
    std::shared_ptr<ScriptedChat> judge;
    if (fs::exists(fixtures_dir / "judge_script.json"))
        judge = std::make_shared<ScriptedChat>(fixtures_dir / "judge_script.json",
                                               "scripted-judge");

    BackendSet set;
    set.limiter = std::make_shared<InFlightLimiter>(config.max_in_flight);
    set.raw = {captioner, embedder, chat};
    if (judge) set.raw.push_back(judge);
    set.captioner = std::make_shared<CachedCaptioner>(captioner, cache);
    set.embedder = std::make_shared<CachedEmbedder>(embedder, cache);
    set.chat = std::make_shared<CachedChat>(chat, cache);
    if (judge) set.judge = std::make_shared<CachedChat>(judge, cache);
    return set;
}

}  // namespace vidinfer::backends
