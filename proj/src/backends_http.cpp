#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "vidinfer/backends.hpp"
#include "vidinfer/kernels.hpp"

namespace vidinfer::backends {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /a/b, defaults to "/"
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::runtime_error("backend: endpoint '" + url + "' must include a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string getenv_or_empty(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    return v ? v : "";
}

httplib::Headers auth_headers(const std::string& api_key) {
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    return headers;
}

std::string truncate_body(const std::string& body, std::size_t limit = 200) {
    if (body.size() <= limit) return body;
    return body.substr(0, limit) + "...";
}

std::string base64_encode(const std::string& data) {
    static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                           (static_cast<unsigned char>(data[i + 1]) << 8) |
                           static_cast<unsigned char>(data[i + 2]);
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(table[(v >> 6) & 63]);
        out.push_back(table[v & 63]);
    }
    if (i < data.size()) {
        unsigned v = static_cast<unsigned char>(data[i]) << 16;
        if (i + 1 < data.size()) v |= static_cast<unsigned char>(data[i + 1]) << 8;
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(i + 1 < data.size() ? table[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("backend: missing file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json post_json(const std::string& endpoint, const std::string& api_key, const json& body,
               const std::string& what) {
    const ParsedUrl url = parse_url(endpoint);
    httplib::Client client(url.base);
    client.set_read_timeout(120, 0);
    client.set_connection_timeout(10, 0);
    const auto res =
        client.Post(url.path, auth_headers(api_key), body.dump(), "application/json");
    if (!res)
        throw std::runtime_error(what + ": endpoint unreachable: " + endpoint + " (" +
                                 httplib::to_string(res.error()) + ")");
    if (res->status < 200 || res->status >= 300)
        throw std::runtime_error(what + ": HTTP " + std::to_string(res->status) + " from " +
                                 endpoint + ": " + truncate_body(res->body));
    try {
        return json::parse(res->body);
    } catch (const std::exception& e) {
        throw std::runtime_error(what + ": invalid JSON from " + endpoint + ": " + e.what());
    }
}

void normalize_or_throw(EmbeddingVector& v, const std::string& what) {
    for (const float x : v.values)
        if (!std::isfinite(x)) throw std::runtime_error(what + ": non-finite embedding value");
    if (!kernels::normalize(v.values))
        throw std::runtime_error(what + ": zero-norm embedding returned");
}

}  // namespace

HttpChat::HttpChat(const BackendEndpoint& endpoint, std::string api_key_env,
                   std::shared_ptr<InFlightLimiter> limiter)
    : cfg_(endpoint), api_key_(getenv_or_empty(api_key_env)), limiter_(std::move(limiter)) {}

std::string HttpChat::identity() const { return "chat:" + cfg_.endpoint + ":" + cfg_.model; }

std::string HttpChat::chat(const ChatRequest& request) {
    if (request.messages.empty()) throw std::invalid_argument("chat: empty request");
    request.last_user_content();  // at least one user message
    if (request.temperature < 0) throw std::invalid_argument("chat: temperature must be >= 0");

    const auto build_body = [&](bool with_penalty) {
        json msgs = json::array();
        for (const auto& m : request.messages)
            msgs.push_back({{"role", m.role}, {"content", m.content}});
        json body{{"model", cfg_.model},
                  {"messages", msgs},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
        if (with_penalty) body["repetition_penalty"] = request.repetition_penalty;
        return body;
    };

    const ParsedUrl url = parse_url(cfg_.endpoint);
    httplib::Client client(url.base);
    client.set_read_timeout(300, 0);
    client.set_connection_timeout(10, 0);

    bool with_penalty = !skip_repetition_penalty_.load();
    for (int attempt = 0; attempt < 2; ++attempt) {
        InFlightGuard guard(limiter_.get());
        count_invocation();
        const auto res = client.Post(url.path, auth_headers(api_key_),
                                     build_body(with_penalty).dump(), "application/json");
        if (!res)
            throw std::runtime_error("chat: endpoint unreachable: " + cfg_.endpoint + " (" +
                                     httplib::to_string(res.error()) + ")");
        if (res->status >= 400 && res->status < 500 && with_penalty) {
            // Vendor-extension field rejected; drop it and go again.
            skip_repetition_penalty_.store(true);
            with_penalty = false;
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw std::runtime_error("chat: HTTP " + std::to_string(res->status) + " from " +
                                     cfg_.endpoint + ": " + truncate_body(res->body));
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const std::exception& e) {
            throw std::runtime_error("chat: invalid JSON from " + cfg_.endpoint + ": " + e.what());
        }
        const auto& choices = reply.at("choices");
        if (choices.empty()) throw std::runtime_error("chat: no choices in reply");
        const std::string content =
            choices.at(0).at("message").at("content").get<std::string>();
        if (content.empty()) throw std::runtime_error("chat: empty completion");
        return content;
    }
    throw std::runtime_error("chat: request failed after retry without repetition_penalty");
}

HttpEmbedder::HttpEmbedder(const BackendEndpoint& endpoint, std::string image_mode,
                           std::string api_key_env, std::shared_ptr<InFlightLimiter> limiter)
    : cfg_(endpoint),
      image_mode_(std::move(image_mode)),
      api_key_(getenv_or_empty(api_key_env)),
      limiter_(std::move(limiter)) {}

std::string HttpEmbedder::identity() const { return "embed:" + cfg_.endpoint + ":" + cfg_.model; }

std::vector<EmbeddingVector> HttpEmbedder::post_inputs(const std::string& body, Modality modality,
                                                       std::size_t expected) {
    InFlightGuard guard(limiter_.get());
    count_invocation();
    const json reply = post_json(cfg_.endpoint, api_key_, json::parse(body), "embed");
    const auto& data = reply.at("data");
    if (data.size() != expected)
        throw std::runtime_error("embed: got " + std::to_string(data.size()) + " vectors for " +
                                 std::to_string(expected) + " inputs");
    std::vector<EmbeddingVector> out;
    out.reserve(expected);
    std::size_t dim = 0;
    for (const auto& item : data) {
        EmbeddingVector v;
        v.modality = modality;
        v.values = item.at("embedding").get<std::vector<float>>();
        if (dim == 0) dim = v.values.size();
        if (v.values.size() != dim)
            throw std::runtime_error("embed: dimension mismatch across batch");
        normalize_or_throw(v, "embed");
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> HttpEmbedder::embed_texts(const std::vector<std::string>& texts) {
    for (const auto& t : texts)
        if (t.empty()) throw std::invalid_argument("embed_texts: empty string input");
    const json body{{"model", cfg_.model}, {"input", texts}};
    return post_inputs(body.dump(), Modality::text, texts.size());
}

std::vector<EmbeddingVector> HttpEmbedder::embed_frames(const std::vector<fs::path>& paths) {
    json input = json::array();
    for (const auto& p : paths) {
        if (image_mode_ == "base64")
            input.push_back({{"b64", base64_encode(read_file(p))}});
        else {
            if (!fs::exists(p))
                throw std::runtime_error("embed_frames: missing file '" + p.string() + "'");
            input.push_back({{"path", fs::absolute(p).string()}});
        }
    }
    const json body{{"model", cfg_.model}, {"input", input}};
    return post_inputs(body.dump(), Modality::image, paths.size());
}

HttpCaptioner::HttpCaptioner(const BackendEndpoint& endpoint, std::string api_key_env,
                             std::shared_ptr<InFlightLimiter> limiter)
    : cfg_(endpoint), api_key_(getenv_or_empty(api_key_env)), limiter_(std::move(limiter)) {}

std::string HttpCaptioner::identity() const {
    return "caption:" + cfg_.endpoint + ":" + cfg_.model;
}

Caption HttpCaptioner::caption_frame(const fs::path& frame_path, const std::string& prompt) {
    const json body{{"model", cfg_.model},
                    {"image", base64_encode(read_file(frame_path))},
                    {"prompt", prompt}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        InFlightGuard guard(limiter_.get());
        count_invocation();
        const json reply = post_json(cfg_.endpoint, api_key_, body, "caption");
        std::string text = reply.at("caption").get<std::string>();
        const auto b = text.find_first_not_of(" \t\r\n");
        if (b != std::string::npos) {
            const auto e = text.find_last_not_of(" \t\r\n");
            return Caption{-1, text.substr(b, e - b + 1)};
        }
        // empty caption: retried once
    }
    throw std::runtime_error("caption: empty caption for '" + frame_path.string() +
                             "' after retry");
}

BackendSet make_http_backends(const PipelineConfig& config,
                              std::shared_ptr<ResponseCache> cache) {
    std::vector<std::string> missing;
    if (config.chat.endpoint.empty()) missing.push_back("backends.chat.endpoint");
    if (config.embed.endpoint.empty()) missing.push_back("backends.embed.endpoint");
    if (config.caption.endpoint.empty()) missing.push_back("backends.caption.endpoint");
    if (!missing.empty()) {
        std::string msg = "backends: missing config:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }

    BackendSet set;
    set.limiter = std::make_shared<InFlightLimiter>(config.max_in_flight);
    auto chat = std::make_shared<HttpChat>(config.chat, "VIDINFER_CHAT_API_KEY", set.limiter);
    auto embedder = std::make_shared<HttpEmbedder>(config.embed, config.embed_image_mode,
                                                   "VIDINFER_EMBED_API_KEY", set.limiter);
    auto captioner =
        std::make_shared<HttpCaptioner>(config.caption, "VIDINFER_CAPTION_API_KEY", set.limiter);
    const BackendEndpoint judge_cfg =
        config.judge.endpoint.empty() ? config.chat : config.judge;
    auto judge = std::make_shared<HttpChat>(judge_cfg, "VIDINFER_JUDGE_API_KEY", set.limiter);

    set.raw = {captioner, embedder, chat, judge};
    set.captioner = std::make_shared<CachedCaptioner>(captioner, cache);
    set.embedder = std::make_shared<CachedEmbedder>(embedder, cache);
    set.chat = std::make_shared<CachedChat>(chat, cache);
    set.judge = std::make_shared<CachedChat>(judge, cache);
    return set;
}

}  // namespace vidinfer::backends
