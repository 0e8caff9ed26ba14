#include "vidinfer/backends.hpp"

#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "vidinfer/kernels.hpp"

namespace vidinfer::backends {

using nlohmann::json;

std::string ChatRequest::canonical() const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    // nlohmann objects are key-sorted, so dump() is canonical.
    const json j{{"messages", msgs},
                 {"temperature", temperature},
                 {"repetition_penalty", repetition_penalty},
                 {"max_tokens", max_tokens}};
    return j.dump();
}

const std::string& ChatRequest::last_user_content() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
        if (it->role == "user") return it->content;
    throw std::invalid_argument("chat request has no user message");
}

InFlightLimiter::InFlightLimiter(int limit) : available_(limit > 0 ? limit : 1) {}

void InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        ++available_;
    }
    cv_.notify_one();
}

namespace {

std::string embedding_to_payload(const EmbeddingVector& v) {
    std::string out(v.values.size() * sizeof(float), '\0');
    std::memcpy(out.data(), v.values.data(), out.size());
    return out;
}

EmbeddingVector embedding_from_payload(const std::string& payload, Modality modality) {
    if (payload.size() % sizeof(float) != 0)
        throw std::runtime_error("cache: corrupt embedding payload");
    EmbeddingVector v;
    v.modality = modality;
    v.values.resize(payload.size() / sizeof(float));
    std::memcpy(v.values.data(), payload.data(), payload.size());
    return v;
}

}  // namespace

CachedCaptioner::CachedCaptioner(std::shared_ptr<Captioner> inner,
                                 std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

Caption CachedCaptioner::caption_frame(const std::filesystem::path& frame_path,
                                       const std::string& prompt) {
    if (!cache_) return inner_->caption_frame(frame_path, prompt);
    const std::string key = sha256_hex(inner_->identity() + "\x1e" + "caption" + "\x1e" +
                                       sha256_file_hex(frame_path) + "\x1e" + prompt);
    if (auto hit = cache_->get(key)) return Caption{-1, *hit};
    const Caption fresh = inner_->caption_frame(frame_path, prompt);
    cache_->put(key, fresh.text);
    return fresh;
}

CachedEmbedder::CachedEmbedder(std::shared_ptr<Embedder> inner,
                               std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::vector<EmbeddingVector> CachedEmbedder::embed_texts(const std::vector<std::string>& texts) {
    if (!cache_) return inner_->embed_texts(texts);
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = sha256_hex(inner_->identity() + "\x1e" + "text" + "\x1e" + texts[i]);
        if (auto hit = cache_->get(keys[i]))
            out[i] = embedding_from_payload(*hit, Modality::text);
        else
            missing.push_back(i);
    }
    if (!missing.empty()) {
        std::vector<std::string> batch;
        batch.reserve(missing.size());
        for (const auto i : missing) batch.push_back(texts[i]);
        const auto fresh = inner_->embed_texts(batch);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            out[missing[j]] = fresh[j];
            cache_->put(keys[missing[j]], embedding_to_payload(fresh[j]));
        }
    }
    return out;
}

std::vector<EmbeddingVector> CachedEmbedder::embed_frames(
    const std::vector<std::filesystem::path>& frame_paths) {
    if (!cache_) return inner_->embed_frames(frame_paths);
    std::vector<EmbeddingVector> out(frame_paths.size());
    std::vector<std::string> keys(frame_paths.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < frame_paths.size(); ++i) {
        keys[i] = sha256_hex(inner_->identity() + "\x1e" + "image" + "\x1e" +
                             sha256_file_hex(frame_paths[i]));
        if (auto hit = cache_->get(keys[i]))
            out[i] = embedding_from_payload(*hit, Modality::image);
        else
            missing.push_back(i);
    }
    if (!missing.empty()) {
        std::vector<std::filesystem::path> batch;
        batch.reserve(missing.size());
        for (const auto i : missing) batch.push_back(frame_paths[i]);
        const auto fresh = inner_->embed_frames(batch);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            out[missing[j]] = fresh[j];
            cache_->put(keys[missing[j]], embedding_to_payload(fresh[j]));
        }
    }
    return out;
}

CachedChat::CachedChat(std::shared_ptr<ChatModel> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachedChat::chat(const ChatRequest& request) {
    if (!cache_) return inner_->chat(request);
    const std::string key =
        sha256_hex(inner_->identity() + "\x1e" + "chat" + "\x1e" + request.canonical());
    if (auto hit = cache_->get(key)) return *hit;
    const std::string reply = inner_->chat(request);
    cache_->put(key, reply);
    return reply;
}

int BackendSet::total_invocations() const {
    int total = 0;
    for (const auto& b : raw) total += b->invocations();
    return total;
}

}  // namespace vidinfer::backends
