#include "vidinfer/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "vidinfer/descriptor.hpp"
#include "vidinfer/run_record.hpp"
#include "vidinfer/selector.hpp"

namespace vidinfer::pipeline {

namespace fs = std::filesystem;
using backends::ChatRequest;
using backends::EmbeddingVector;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

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

// Per-video proxies that tally logical requests (cache hits included).
class CountingEmbedder : public backends::Embedder {
  public:
    CountingEmbedder(backends::Embedder& inner, CallCounts& counts)
        : inner_(inner), counts_(counts) {}
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override {
        ++counts_.embed_text;
        return inner_.embed_texts(texts);
    }
    std::vector<EmbeddingVector> embed_frames(
        const std::vector<fs::path>& frame_paths) override {
        ++counts_.embed_image;
        return inner_.embed_frames(frame_paths);
    }
    std::string identity() const override { return inner_.identity(); }

  private:
    backends::Embedder& inner_;
    CallCounts& counts_;
};

class CountingCaptioner : public backends::Captioner {
  public:
    CountingCaptioner(backends::Captioner& inner, CallCounts& counts)
        : inner_(inner), counts_(counts) {}
    Caption caption_frame(const fs::path& frame_path, const std::string& prompt) override {
        ++counts_.caption;
        return inner_.caption_frame(frame_path, prompt);
    }
    std::string identity() const override { return inner_.identity(); }

  private:
    backends::Captioner& inner_;
    CallCounts& counts_;
};

bool variant_uses_steps(SelectorVariant v) {
    return v == SelectorVariant::steps_to_frame || v == SelectorVariant::steps_to_caption;
}

// Raw single-line answer with list numbering stripped.
std::string extract_answer(const std::string& reply) {
    try {
        return prompts::parse_numbered_list(reply, 1).at(0);
    } catch (const prompts::ParseError&) {
    }
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (lower(t).rfind("answer:", 0) == 0) t = trim(t.substr(7));
        if (!t.empty()) return t;
    }
    return trim(reply);
}

struct VideoContext {
    const VideoManifestEntry& entry;
    const PipelineConfig& config;
    const prompts::Renderer& renderer;
    backends::ChatModel& chat;
    CountingCaptioner& captioner;
    CountingEmbedder& embedder;
    RunRecord& rec;
    descriptor::FrameResolver resolve;

    std::string chat_call(const ChatRequest& req) {
        ++rec.calls.chat;
        return chat.chat(req);
    }

    // One re-ask on parse failure, nudging the model toward the list format.
    template <typename Parse>
    auto parse_with_reask(const ChatRequest& req, const std::string& nudge, Parse parse) {
        const std::string reply = chat_call(req);
        try {
            return parse(reply);
        } catch (const prompts::ParseError&) {
            ChatRequest retry = req;
            retry.messages.push_back({"assistant", reply});
            retry.messages.push_back({"user", nudge});
            return parse(chat_call(retry));
        }
    }

    HypothesisSet guess(const Description& description, HypothesisOrigin origin) {
        const ChatRequest req = renderer.render_guess(entry.task, description, config.k,
                                                      config.use_icl);
        const auto texts = parse_with_reask(
            req, "Respond only with a numbered list, one item per line.",
            [&](const std::string& reply) {
                return prompts::parse_numbered_list(reply, config.k);
            });
        HypothesisSet set;
        set.k = config.k;
        for (const auto& t : texts) set.items.push_back({t, origin});
        return set;
    }

    StepList gen_steps(const HypothesisSet& hypotheses) {
        const auto parse = [&](const std::string& reply) {
            return prompts::parse_steps(reply, hypotheses);
        };
        const std::string nudge = "List the steps as '-' bullet points, one per line.";
        if (config.steps_call_mode == StepsCallMode::combined)
            return parse_with_reask(renderer.render_steps(hypotheses), nudge, parse);
        StepList all;
        for (std::size_t i = 0; i < hypotheses.items.size(); ++i) {
            HypothesisSet one;
            one.k = 1;
            one.items.push_back(hypotheses.items[i]);
            StepList part = parse_with_reask(renderer.render_steps(one), nudge,
                                             [&](const std::string& reply) {
                                                 return prompts::parse_steps(reply, one);
                                             });
            for (auto& s : part.steps) all.steps.push_back({s.text, static_cast<int>(i)});
        }
        if (all.empty()) throw prompts::ParseError("steps: no steps parsed", "");
        return all;
    }

    std::vector<Caption> caption(const FrameSet& frames) {
        return descriptor::caption_frameset(frames, resolve, captioner,
                                            renderer.caption_prompt());
    }

    std::vector<EmbeddingVector> embed_frames(const FrameSet& frames) {
        std::vector<fs::path> paths;
        paths.reserve(frames.indices.size());
        for (const int idx : frames.indices) paths.push_back(resolve(idx));
        return embedder.embed_frames(paths);
    }
};

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

}  // namespace

std::vector<Hypothesis> combine(const HypothesisSet& a, const HypothesisSet& b,
                                const std::optional<Hypothesis>& c, CombineOp op) {
    if (a.empty()) throw std::invalid_argument("combine: first hypothesis set is empty");
    std::vector<Hypothesis> out = a.items;
    out.insert(out.end(), b.items.begin(), b.items.end());
    if (c) out.push_back(*c);
    if (op == CombineOp::set_union) {
        std::set<std::string> seen;
        std::vector<Hypothesis> dedup;
        for (auto& h : out)
            if (seen.insert(lower(trim(h.text))).second) dedup.push_back(std::move(h));
        out = std::move(dedup);
    }
    return out;
}

RunRecord run_video(const VideoManifestEntry& entry, const PipelineConfig& config,
                    backends::BackendSet& backends, const prompts::Renderer& renderer,
                    const RunOptions& options) {
    RunRecord rec;
    rec.video_id = entry.video_id;
    rec.task = entry.task;
    rec.rho = entry.rho;
    const auto t_total = Clock::now();

    try {
        const ingest::FrameDir frame_dir{fs::path(entry.frame_dir)};
        CountingCaptioner captioner(*backends.captioner, rec.calls);
        CountingEmbedder embedder(*backends.embedder, rec.calls);
        VideoContext ctx{entry,    config,   renderer, *backends.chat,
                         captioner, embedder, rec,
                         [&frame_dir](int idx) { return frame_dir.at(idx); }};

        // See: rho prefix, uniform N, sub-sample L, caption, describe.
        auto t_stage = Clock::now();
        const int observed = ingest::truncate_prefix(entry.frame_count, entry.rho);
        const FrameSet sampled = ingest::uniform_sample(observed, config.n_max, entry.video_id);
        rec.sampled_frames = sampled.indices;
        const FrameSet subsampled = ingest::subsample(sampled, config.l);
        rec.captions_initial = ctx.caption(subsampled);
        const Description description = descriptor::build_description(rec.captions_initial);
        rec.timing.see_ms = ms_since(t_stage);

        // Guess: initial hypotheses (plus their steps when the variant wants them).
        t_stage = Clock::now();
        const HypothesisSet initial = ctx.guess(description, HypothesisOrigin::initial);
        rec.hypotheses_initial = initial.texts();
        StepList steps;
        if (config.selector_variant != SelectorVariant::none &&
            variant_uses_steps(config.selector_variant)) {
            steps = ctx.gen_steps(initial);
            rec.steps = steps.steps;
        }
        rec.timing.guess_ms = ms_since(t_stage);

        if (config.selector_variant == SelectorVariant::none) {
            // Baseline without the evidence selector: infer directly over D.
            t_stage = Clock::now();
            const auto opts = combine(initial, HypothesisSet{}, std::nullopt, config.combine_op);
            const std::string reply =
                ctx.chat_call(renderer.render_final(entry.task, description, opts,
                                                    config.final_icl));
            rec.final_answer = extract_answer(reply);
            const std::string needle = lower(trim(rec.final_answer));
            for (const auto& o : opts)
                if (lower(trim(o.text)) == needle) rec.answer_in_options = true;
            rec.timing.infer_ms = ms_since(t_stage);
            rec.timing.total_ms = ms_since(t_total);
            return rec;
        }

        // Select: per-step argmax over frame similarity, iterated on the
        // previously selected frames when configured.
        t_stage = Clock::now();
        selector::SelectionResult selection;
        selector::SimilarityMatrix sim;
        FrameSet key_frames = sampled;
        std::vector<Caption> iter_captions = rec.captions_initial;
        HypothesisSet iter_hyps = initial;
        StepList iter_steps = steps;
        std::vector<EmbeddingVector> key_vectors;
        for (int iteration = 1; iteration <= config.iterations; ++iteration) {
            if (iteration > 1) {
                key_frames = selection.frames;
                iter_captions = ctx.caption(key_frames);
                const Description d = descriptor::build_description(iter_captions);
                iter_hyps = ctx.guess(d, HypothesisOrigin::initial);
                if (variant_uses_steps(config.selector_variant))
                    iter_steps = ctx.gen_steps(iter_hyps);
            }
            if (config.selector_variant != SelectorVariant::steps_to_caption)
                key_vectors = ctx.embed_frames(key_frames);
            selector::VariantInputs inputs;
            inputs.sampled = &key_frames;
            inputs.frame_vectors = &key_vectors;
            inputs.captions = &iter_captions;
            inputs.hypotheses = &iter_hyps;
            inputs.steps = &iter_steps;
            selection = selector::select_variant(config.selector_variant, inputs, embedder,
                                                 config.m_cap, config.global_topm, &sim);
            if (selection.frames.indices.empty())
                throw std::runtime_error("selection collapsed to zero frames");
        }
        rec.selected_frames = selection.frames.indices;
        if (options.dump_similarity && !options.run_dir.empty())
            write_text_file(options.run_dir / ("sim_" + entry.video_id + ".txt"),
                            selector::dump_matrix(sim));
        rec.timing.select_ms = ms_since(t_stage);

        // Infer: re-see the selected frames, guess again, add the
        // embedding-side hypothesis, and let the LLM pick from the options.
        t_stage = Clock::now();
        rec.captions_selected = ctx.caption(selection.frames);
        const Description selected_description =
            descriptor::build_description(rec.captions_selected);
        const HypothesisSet post =
            ctx.guess(selected_description, HypothesisOrigin::post_selection);
        rec.hypotheses_selected = post.texts();

        std::optional<Hypothesis> clip_pick;
        if (config.use_hc) {
            const auto candidates = combine(initial, post, std::nullopt, config.combine_op);
            const auto selected_vectors = ctx.embed_frames(selection.frames);
            clip_pick = selector::clip_hypothesis(selected_vectors, candidates, embedder);
            rec.clip_hypothesis = clip_pick->text;
        }
        const auto opts = combine(initial, post, clip_pick, config.combine_op);
        const std::string reply = ctx.chat_call(
            renderer.render_final(entry.task, selected_description, opts, config.final_icl));
        rec.final_answer = extract_answer(reply);
        const std::string needle = lower(trim(rec.final_answer));
        for (const auto& o : opts)
            if (lower(trim(o.text)) == needle) rec.answer_in_options = true;
        rec.timing.infer_ms = ms_since(t_stage);
    } catch (const std::exception& e) {
        rec.status = "failed";
        rec.error = e.what();
    }
    rec.timing.total_ms = ms_since(t_total);
    return rec;
}

RunSummary run_manifest(const ingest::Manifest& manifest, const PipelineConfig& config,
                        backends::BackendSet& backends, const prompts::Renderer& renderer,
                        const RunOptions& options, const std::string& variant_label,
                        std::optional<double> rho_override) {
    const auto errors = validate_config(config);
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += " [" + e.field + "] " + e.message + ";";
        throw std::runtime_error(msg);
    }

    const auto t_start = Clock::now();
    RunSummary summary;
    summary.dataset = manifest.dataset_name;
    summary.variant_label = variant_label;
    summary.rho_override = rho_override;
    summary.videos = static_cast<int>(manifest.entries.size());

    std::ofstream records_out;
    std::set<std::string> already_ok;
    if (!options.run_dir.empty()) {
        fs::create_directories(options.run_dir);
        write_text_file(options.run_dir / "config_snapshot.cfg", config_to_text(config));
        const fs::path records_path = options.run_dir / "records.jsonl";
        if (fs::exists(records_path))
            for (const auto& r : read_records(records_path.string()))
                if (r.status == "ok") already_ok.insert(r.video_id);
        records_out.open(records_path, std::ios::binary | std::ios::app);
        if (!records_out)
            throw std::runtime_error("cannot open records file in '" +
                                     options.run_dir.string() + "'");
    }

    std::mutex sink_mu;
    std::atomic<std::size_t> next{0};
    const int workers = std::max(1, std::min(options.parallelism, summary.videos));

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.entries.size()) return;
            VideoManifestEntry entry = manifest.entries[i];
            if (rho_override) entry.rho = *rho_override;
            if (already_ok.count(entry.video_id)) {
                std::lock_guard lock(sink_mu);
                ++summary.ok;
                ++summary.resumed;
                continue;
            }
            const RunRecord rec = run_video(entry, config, backends, renderer, options);
            std::lock_guard lock(sink_mu);
            if (records_out.is_open()) {
                records_out << record_to_json(rec) << "\n";
                records_out.flush();
            }
            if (rec.status == "ok") ++summary.ok; else ++summary.failed;
            summary.calls.chat += rec.calls.chat;
            summary.calls.caption += rec.calls.caption;
            summary.calls.embed_text += rec.calls.embed_text;
            summary.calls.embed_image += rec.calls.embed_image;
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    summary.backend_invocations = backends.total_invocations();
    summary.wall_ms = ms_since(t_start);
    if (!options.run_dir.empty())
        write_text_file(options.run_dir / "summary.json", summary_to_json(summary));
    return summary;
}

std::string summary_to_json(const RunSummary& s) {
    nlohmann::json j{{"dataset", s.dataset},
                     {"variant", s.variant_label},
                     {"rho_override", s.rho_override ? nlohmann::json(*s.rho_override)
                                                     : nlohmann::json(nullptr)},
                     {"videos", s.videos},
                     {"ok", s.ok},
                     {"failed", s.failed},
                     {"resumed", s.resumed},
                     {"calls",
                      {{"chat", s.calls.chat},
                       {"caption", s.calls.caption},
                       {"embed_text", s.calls.embed_text},
                       {"embed_image", s.calls.embed_image}}},
                     {"backend_invocations", s.backend_invocations},
                     {"wall_ms", s.wall_ms}};
    return j.dump(2) + "\n";
}

RunSummary summary_from_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("summary: cannot open '" + path.string() + "'");
    nlohmann::json j;
    in >> j;
    RunSummary s;
    s.dataset = j.at("dataset").get<std::string>();
    s.variant_label = j.at("variant").get<std::string>();
    if (!j.at("rho_override").is_null()) s.rho_override = j.at("rho_override").get<double>();
    s.videos = j.at("videos").get<int>();
    s.ok = j.at("ok").get<int>();
    s.failed = j.at("failed").get<int>();
    s.resumed = j.value("resumed", 0);
    s.calls.chat = j.at("calls").at("chat").get<int>();
    s.calls.caption = j.at("calls").at("caption").get<int>();
    s.calls.embed_text = j.at("calls").at("embed_text").get<int>();
    s.calls.embed_image = j.at("calls").at("embed_image").get<int>();
    s.backend_invocations = j.at("backend_invocations").get<int>();
    s.wall_ms = j.at("wall_ms").get<double>();
    return s;
}

}  // namespace vidinfer::pipeline
