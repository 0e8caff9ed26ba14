#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vidinfer/cache.hpp"
#include "vidinfer/config.hpp"
#include "vidinfer/types.hpp"

namespace vidinfer::backends {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.001;
    double repetition_penalty = 1.0;
    int max_tokens = 256;

    // Canonical JSON form; identical logical requests serialize identically.
    std::string canonical() const;
    const std::string& last_user_content() const;
};

enum class Modality { image, text };

struct EmbeddingVector {
    std::vector<float> values;  // unit L2 norm at the backend boundary
    Modality modality = Modality::text;
};

// Bounded in-flight request limit shared by all backends of a run.
class InFlightLimiter {
  public:
    explicit InFlightLimiter(int limit);
    void acquire();
    void release();

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

class InFlightGuard {
  public:
    explicit InFlightGuard(InFlightLimiter* limiter) : limiter_(limiter) {
        if (limiter_) limiter_->acquire();
    }
    ~InFlightGuard() {
        if (limiter_) limiter_->release();
    }
    InFlightGuard(const InFlightGuard&) = delete;
    InFlightGuard& operator=(const InFlightGuard&) = delete;

  private:
    InFlightLimiter* limiter_;
};

// Common base: a stable identity string (part of every cache key) and a count
// of physical invocations (cache hits never reach the backend, so a warm-cache
// rerun leaves these at zero).
class Backend {
  public:
    virtual ~Backend() = default;
    virtual std::string identity() const = 0;
    int invocations() const { return invocations_.load(); }

  protected:
    void count_invocation() { invocations_.fetch_add(1); }

  private:
    std::atomic<int> invocations_{0};
};

class Captioner : public Backend {
  public:
    virtual Caption caption_frame(const std::filesystem::path& frame_path,
                                  const std::string& prompt) = 0;
};

class Embedder : public Backend {
  public:
    virtual std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) = 0;
    virtual std::vector<EmbeddingVector> embed_frames(
        const std::vector<std::filesystem::path>& frame_paths) = 0;
};

class ChatModel : public Backend {
  public:
    virtual std::string chat(const ChatRequest& request) = 0;
};

// ---- Fixture backends (deterministic, offline) ----

// Caption table: "<video_id>/<filename>\t<caption>" per line; a frame path is
// matched by its trailing two components.
class FixtureCaptioner : public Captioner {
  public:
    explicit FixtureCaptioner(const std::filesystem::path& table_path);
    Caption caption_frame(const std::filesystem::path& frame_path,
                          const std::string& prompt) override;
    std::string identity() const override { return "fixture-captioner"; }

  private:
    std::map<std::string, std::string> table_;
};

// Text table plus per-video precomputed frame-embedding files, with a seeded
// deterministic generator for anything unlisted. All outputs are unit vectors.
class FixtureEmbedder : public Embedder {
  public:
    FixtureEmbedder(unsigned seed, int dim);
    // Optional: "<text>\t<v1> <v2> ..." rows; vectors must be unit norm.
    void load_text_table(const std::filesystem::path& tsv_path);
    // Precomputed file: first line is the dimension, each row is
    // "<frame_index> <v1> <v2> ..." (values read back bit-exact).
    void load_frame_file(const std::string& video_id, const std::filesystem::path& path);

    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_frames(
        const std::vector<std::filesystem::path>& frame_paths) override;
    std::string identity() const override;

  private:
    std::vector<float> seeded_vector(const std::string& token);

    unsigned seed_;
    int dim_;
    std::map<std::string, std::vector<float>> text_table_;
    // video_id -> frame_index -> vector
    std::map<std::string, std::map<int, std::vector<float>>> frame_table_;
};

// Ordered rules; the first rule whose substrings all appear in the last user
// message wins. Script file: JSON array of {"contains": [..], "reply": ".."}.
class ScriptedChat : public ChatModel {
  public:
    explicit ScriptedChat(const std::filesystem::path& script_path,
                          std::string name = "scripted-chat");
    explicit ScriptedChat(std::string name = "scripted-chat") : name_(std::move(name)) {}
    void add_rule(std::vector<std::string> contains, std::string reply);

    std::string chat(const ChatRequest& request) override;
    std::string identity() const override { return name_; }

  private:
    struct Rule {
        std::vector<std::string> contains;
        std::string reply;
    };
    std::vector<Rule> rules_;
    std::string name_;
};

// ---- HTTP backends ----

// OpenAI-compatible chat completions. Bearer token comes from the named
// environment variable; repetition_penalty rides along as a vendor extension
// and is dropped after the first 4xx that rejects it.
class HttpChat : public ChatModel {
  public:
    HttpChat(const BackendEndpoint& endpoint, std::string api_key_env,
             std::shared_ptr<InFlightLimiter> limiter);
    std::string chat(const ChatRequest& request) override;
    std::string identity() const override;

  private:
    BackendEndpoint cfg_;
    std::string api_key_;
    std::shared_ptr<InFlightLimiter> limiter_;
    std::atomic<bool> skip_repetition_penalty_{false};
};

// POST {model, input: [...]} -> data[i].embedding. Image inputs are sent as
// {"path": ...} or {"b64": ...} entries depending on image_mode. Returned
// vectors are L2-normalized here so cosine reduces to a dot product downstream.
class HttpEmbedder : public Embedder {
  public:
    HttpEmbedder(const BackendEndpoint& endpoint, std::string image_mode,
                 std::string api_key_env, std::shared_ptr<InFlightLimiter> limiter);
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_frames(
        const std::vector<std::filesystem::path>& frame_paths) override;
    std::string identity() const override;

  private:
    std::vector<EmbeddingVector> post_inputs(const std::string& body, Modality modality,
                                             std::size_t expected);
    BackendEndpoint cfg_;
    std::string image_mode_;
    std::string api_key_;
    std::shared_ptr<InFlightLimiter> limiter_;
};

// POST {image: <base64>, prompt} -> {caption}. An empty caption is retried
// once, then reported as an error.
class HttpCaptioner : public Captioner {
  public:
    HttpCaptioner(const BackendEndpoint& endpoint, std::string api_key_env,
                  std::shared_ptr<InFlightLimiter> limiter);
    Caption caption_frame(const std::filesystem::path& frame_path,
                          const std::string& prompt) override;
    std::string identity() const override;

  private:
    BackendEndpoint cfg_;
    std::string api_key_;
    std::shared_ptr<InFlightLimiter> limiter_;
};

// ---- Caching wrappers ----

class CachedCaptioner : public Captioner {
  public:
    CachedCaptioner(std::shared_ptr<Captioner> inner, std::shared_ptr<ResponseCache> cache);
    Caption caption_frame(const std::filesystem::path& frame_path,
                          const std::string& prompt) override;
    std::string identity() const override { return inner_->identity(); }
    Captioner& inner() { return *inner_; }

  private:
    std::shared_ptr<Captioner> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

class CachedEmbedder : public Embedder {
  public:
    CachedEmbedder(std::shared_ptr<Embedder> inner, std::shared_ptr<ResponseCache> cache);
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override;
    std::vector<EmbeddingVector> embed_frames(
        const std::vector<std::filesystem::path>& frame_paths) override;
    std::string identity() const override { return inner_->identity(); }
    Embedder& inner() { return *inner_; }

  private:
    std::shared_ptr<Embedder> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

class CachedChat : public ChatModel {
  public:
    CachedChat(std::shared_ptr<ChatModel> inner, std::shared_ptr<ResponseCache> cache);
    std::string chat(const ChatRequest& request) override;
    std::string identity() const override { return inner_->identity(); }
    ChatModel& inner() { return *inner_; }

  private:
    std::shared_ptr<ChatModel> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

// ---- Assembly ----

struct BackendSet {
    std::shared_ptr<Captioner> captioner;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<ChatModel> chat;
    std::shared_ptr<ChatModel> judge;
    std::shared_ptr<InFlightLimiter> limiter;
    // Raw backends, for physical-invocation accounting.
    std::vector<std::shared_ptr<Backend>> raw;

    int total_invocations() const;
};

// Conventional fixture layout: captions.tsv, text_embeddings.tsv (optional),
// frame_embeddings/<video_id>.txt (optional), chat_script.json,
// judge_script.json (optional).
BackendSet make_fixture_backends(const std::filesystem::path& fixtures_dir,
                                 const PipelineConfig& config,
                                 std::shared_ptr<ResponseCache> cache);

BackendSet make_http_backends(const PipelineConfig& config,
                              std::shared_ptr<ResponseCache> cache);

}  // namespace vidinfer::backends
