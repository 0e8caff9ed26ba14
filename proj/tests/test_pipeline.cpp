// Four-stage orchestration over the offline fixture pack: hypothesis
// combination, chat-call budgets, per-video isolation, cache determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "vidinfer/pipeline.hpp"
#include "vidinfer/run_record.hpp"

using namespace vidinfer;
namespace fs = std::filesystem;

namespace {

const fs::path kPack = fs::path(VIDINFER_TEST_DIR) / "fixtures" / "pack";

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("vidinfer-pipeline-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig pack_config() { return load_config((kPack / "config.cfg").string()); }

backends::BackendSet pack_backends(const PipelineConfig& config,
                                   std::shared_ptr<ResponseCache> cache = nullptr) {
    return backends::make_fixture_backends(kPack, config, std::move(cache));
}

prompts::Renderer pack_renderer(const PipelineConfig& config) {
    return prompts::Renderer(prompts::TemplateSet::builtin(),
                             {config.temperature, config.repetition_penalty, config.max_tokens},
                             {config.judge_temperature, 1.0, config.max_tokens});
}

VideoManifestEntry entry_by_id(const ingest::Manifest& manifest, const std::string& id) {
    for (const auto& e : manifest.entries)
        if (e.video_id == id) return e;
    FAIL("no such entry: " << id);
    return {};
}

HypothesisSet make_set(const std::vector<std::string>& texts) {
    HypothesisSet set;
    set.k = static_cast<int>(texts.size());
    for (const auto& t : texts) set.items.push_back({t, HypothesisOrigin::initial});
    return set;
}

}  // namespace

TEST_CASE("combine: concat keeps duplicates, union dedups case-insensitively") {
    const auto a = make_set({"a", "b", "c", "d", "e"});
    const auto b = make_set({"A", "b", "f", "g", "h"});  // 2 overlaps with a
    const Hypothesis hc{"z", HypothesisOrigin::clip};

    const auto concat = pipeline::combine(a, b, hc, CombineOp::concat);
    CHECK(concat.size() == 11);
    CHECK(concat[0].text == "a");
    CHECK(concat[5].text == "A");  // order preserved, duplicates retained
    CHECK(concat[10].text == "z");

    const auto uni = pipeline::combine(a, b, hc, CombineOp::set_union);
    CHECK(uni.size() == 9);  // a b c d e f g h z
    CHECK(uni[0].text == "a");
    CHECK(uni[8].text == "z");

    const auto no_c = pipeline::combine(a, b, std::nullopt, CombineOp::concat);
    CHECK(no_c.size() == 10);
    CHECK_THROWS_AS(pipeline::combine(HypothesisSet{}, b, hc, CombineOp::concat),
                    std::invalid_argument);
}

TEST_CASE("full pipeline on the grill-steak fixture") {
    const auto config = pack_config();
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    const auto rec = pipeline::run_video(entry_by_id(manifest, "grill-steak"), config,
                                         backend_set, renderer);

    REQUIRE_MESSAGE(rec.status == "ok", rec.error);
    CHECK(rec.final_answer == "Cooking Steaks on a Grill");
    CHECK(rec.answer_in_options);
    CHECK(rec.calls.chat == 4);
    CHECK(rec.hypotheses_initial.size() == 5);
    CHECK(rec.hypotheses_selected.size() == 5);
    CHECK(rec.steps.size() == 13);
    CHECK(rec.clip_hypothesis == "Cooking Steaks on a Grill");

    // selected is a non-empty subset of sampled, capped at 16, ascending
    REQUIRE_FALSE(rec.selected_frames.empty());
    CHECK(rec.selected_frames.size() <= 16);
    const std::set<int> sampled(rec.sampled_frames.begin(), rec.sampled_frames.end());
    for (const int f : rec.selected_frames) CHECK(sampled.count(f) == 1);
    CHECK(std::is_sorted(rec.selected_frames.begin(), rec.selected_frames.end()));
    // planted steps exclude the car/man frames 0 and 1
    CHECK(std::set<int>(rec.selected_frames.begin(), rec.selected_frames.end()) ==
          std::set<int>{2, 3, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});

    // stage-1 captions cover all 16 subsampled frames
    CHECK(rec.captions_initial.size() == 16);
}

TEST_CASE("action-recognition fixture resolves to Cycling") {
    const auto config = pack_config();
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    const auto rec =
        pipeline::run_video(entry_by_id(manifest, "ride-bike"), config, backend_set, renderer);
    REQUIRE_MESSAGE(rec.status == "ok", rec.error);
    CHECK(rec.final_answer == "Cycling");
    CHECK(rec.calls.chat == 4);
    CHECK(std::set<int>(rec.selected_frames.begin(), rec.selected_frames.end()) ==
          std::set<int>{1, 4, 6, 9, 13});
}

TEST_CASE("without-ES baseline: 2 chat calls, no steps, no selection") {
    auto config = pack_config();
    config.selector_variant = SelectorVariant::none;
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    const auto rec = pipeline::run_video(entry_by_id(manifest, "grill-steak"), config,
                                         backend_set, renderer);
    REQUIRE_MESSAGE(rec.status == "ok", rec.error);
    CHECK(rec.calls.chat == 2);
    CHECK(rec.steps.empty());
    CHECK(rec.selected_frames.empty());
    CHECK(rec.hypotheses_selected.empty());
    CHECK_FALSE(rec.clip_hypothesis.has_value());
    CHECK(rec.calls.embed_image == 0);
    CHECK(rec.final_answer == "Cooking Steaks on a Grill");
}

TEST_CASE("use_hc off drops the embedding-side hypothesis") {
    auto config = pack_config();
    config.use_hc = false;
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    const auto rec = pipeline::run_video(entry_by_id(manifest, "grill-steak"), config,
                                         backend_set, renderer);
    REQUIRE_MESSAGE(rec.status == "ok", rec.error);
    CHECK_FALSE(rec.clip_hypothesis.has_value());
    CHECK(rec.calls.chat == 4);
    CHECK(rec.final_answer == "Cooking Steaks on a Grill");
}

TEST_CASE("iteration budget: extra iterations cost 2 chat calls each, selection shrinks") {
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    const auto entry = entry_by_id(manifest, "grill-steak");

    auto config1 = pack_config();
    config1.iterations = 1;
    auto set1 = pack_backends(config1);
    const auto renderer = pack_renderer(config1);
    const auto rec1 = pipeline::run_video(entry, config1, set1, renderer);
    REQUIRE(rec1.status == "ok");
    CHECK(rec1.calls.chat == 4);

    auto config2 = pack_config();
    config2.iterations = 2;
    auto set2 = pack_backends(config2);
    const auto rec2 = pipeline::run_video(entry, config2, set2, renderer);
    REQUIRE_MESSAGE(rec2.status == "ok", rec2.error);
    CHECK(rec2.calls.chat == 6);

    auto config3 = pack_config();
    config3.iterations = 3;
    auto set3 = pack_backends(config3);
    const auto rec3 = pipeline::run_video(entry, config3, set3, renderer);
    REQUIRE(rec3.status == "ok");
    CHECK(rec3.calls.chat == 8);

    const std::set<int> sel1(rec1.selected_frames.begin(), rec1.selected_frames.end());
    for (const int f : rec2.selected_frames) CHECK(sel1.count(f) == 1);
    CHECK(rec2.final_answer == "Cooking Steaks on a Grill");
}

TEST_CASE("selector variants all produce valid runs on fixtures") {
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    const auto entry = entry_by_id(manifest, "grill-steak");
    for (const auto variant :
         {SelectorVariant::steps_to_frame, SelectorVariant::steps_to_caption,
          SelectorVariant::hypotheses_to_frame, SelectorVariant::captions_to_frame}) {
        auto config = pack_config();
        config.selector_variant = variant;
        auto backend_set = pack_backends(config);
        const auto renderer = pack_renderer(config);
        const auto rec = pipeline::run_video(entry, config, backend_set, renderer);
        REQUIRE_MESSAGE(rec.status == "ok", to_string(variant) << ": " << rec.error);
        CHECK(rec.final_answer == "Cooking Steaks on a Grill");
        CHECK(rec.selected_frames.size() <= 16);
        const std::set<int> sampled(rec.sampled_frames.begin(), rec.sampled_frames.end());
        for (const int f : rec.selected_frames) CHECK(sampled.count(f) == 1);
        // hypothesis queries bound the pre-dedup row count
        if (variant == SelectorVariant::hypotheses_to_frame)
            CHECK(rec.selected_frames.size() <= 5);
    }
}

TEST_CASE("per-hypothesis steps mode issues one chat call per hypothesis") {
    // Minimal throwaway fixture: 4 frames, seeded embeddings, a script that
    // answers single-hypothesis step prompts.
    const fs::path dir = fresh_dir("perhyp");
    fs::create_directories(dir / "frames" / "tiny-vid");
    std::ofstream captions(dir / "captions.tsv");
    for (int i = 0; i < 4; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "%06d.jpg", i);
        std::ofstream(dir / "frames" / "tiny-vid" / name) << "frame" << i;
        captions << "tiny-vid/" << name << "\tscene number " << i << "\n";
    }
    captions.close();
    std::ofstream(dir / "chat_script.json")
        << R"([{"contains": ["Briefly list down the steps to perform Make Tea."],
                "reply": "- boil water\n- steep the tea"},
               {"contains": ["Briefly list down the steps to perform Make Coffee."],
                "reply": "- grind beans"},
               {"contains": ["Briefly list down the steps to perform"],
                "reply": "Make Tea:\n- boil water\n- steep the tea\nMake Coffee:\n- grind beans"},
               {"contains": ["Based on these options:"], "reply": "Make Tea"},
               {"contains": ["most likely"], "reply": "1: Make Tea\n2: Make Coffee"}])";

    PipelineConfig config;
    config.k = 2;
    VideoManifestEntry entry;
    entry.video_id = "tiny-vid";
    entry.frame_dir = (dir / "frames" / "tiny-vid").string();
    entry.frame_count = 4;
    entry.ground_truth = "Make Tea";
    entry.task = TaskSpec::for_task(TaskName::goal_inference);
    entry.rho = 1.0;
    const auto renderer = pack_renderer(config);

    config.steps_call_mode = StepsCallMode::combined;
    auto combined_set = backends::make_fixture_backends(dir, config, nullptr);
    const auto combined = pipeline::run_video(entry, config, combined_set, renderer);
    REQUIRE_MESSAGE(combined.status == "ok", combined.error);
    CHECK(combined.calls.chat == 4);
    CHECK(combined.steps.size() == 3);
    CHECK(combined.steps[0].hypothesis_index == 0);
    CHECK(combined.steps[2].hypothesis_index == 1);

    config.steps_call_mode = StepsCallMode::per_hypothesis;
    auto per_set = backends::make_fixture_backends(dir, config, nullptr);
    const auto per = pipeline::run_video(entry, config, per_set, renderer);
    REQUIRE_MESSAGE(per.status == "ok", per.error);
    CHECK(per.calls.chat == 5);  // guess + 2 step calls + guess + final
    REQUIRE(per.steps.size() == 3);
    CHECK(per.steps[0].hypothesis_index == 0);
    CHECK(per.steps[1].hypothesis_index == 0);
    CHECK(per.steps[2].hypothesis_index == 1);
    CHECK(per.final_answer == "Make Tea");
}

TEST_CASE("run_manifest: records, summary, and per-video isolation") {
    const auto config = pack_config();
    auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    // a third entry whose captions are missing from the fixture table
    VideoManifestEntry broken;
    broken.video_id = "broken";
    broken.frame_dir = (kPack / "frames" / "grill-steak").string();
    broken.frame_count = 32;
    broken.ground_truth = "x";
    broken.task = TaskSpec::for_task(TaskName::goal_inference);
    broken.rho = 1.0;  // reaches frames 16.. which have no caption entries
    manifest.entries.push_back(broken);

    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    const fs::path out = fresh_dir("manifest");
    pipeline::RunOptions options;
    options.run_dir = out;
    options.parallelism = 4;
    const auto summary =
        pipeline::run_manifest(manifest, config, backend_set, renderer, options, "default");
    CHECK(summary.videos == 3);
    CHECK(summary.ok == 2);
    CHECK(summary.failed == 1);
    CHECK(summary.calls.chat == 8);  // 4 per successful video, failure dies in stage 1

    const auto records = read_records((out / "records.jsonl").string());
    REQUIRE(records.size() == 3);
    int failed = 0;
    for (const auto& rec : records)
        if (rec.status == "failed") {
            ++failed;
            CHECK(rec.video_id == "broken");
            CHECK(rec.error.find("caption") != std::string::npos);
        }
    CHECK(failed == 1);
    CHECK(fs::exists(out / "config_snapshot.cfg"));
    CHECK(fs::exists(out / "summary.json"));
    const auto loaded = pipeline::summary_from_json_file(out / "summary.json");
    CHECK(loaded.ok == 2);
    CHECK(loaded.dataset == "fixture-pack");
}

TEST_CASE("rerunning into the same run directory resumes completed videos") {
    const auto config = pack_config();
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    const auto renderer = pack_renderer(config);
    const fs::path out = fresh_dir("resume");
    pipeline::RunOptions options;
    options.run_dir = out;

    auto first_set = pack_backends(config);
    const auto first = pipeline::run_manifest(manifest, config, first_set, renderer, options);
    CHECK(first.ok == 2);
    CHECK(first.resumed == 0);

    auto second_set = pack_backends(config);
    const auto second = pipeline::run_manifest(manifest, config, second_set, renderer, options);
    CHECK(second.ok == 2);
    CHECK(second.resumed == 2);
    CHECK(second.calls.chat == 0);
    CHECK(second_set.total_invocations() == 0);  // nothing recomputed at all
    CHECK(read_records((out / "records.jsonl").string()).size() == 2);  // no duplicates
}

TEST_CASE("ten-video manifest at parallelism 4 is order-independent") {
    // Ten entries sharing the two fixture frame directories; captions and
    // embeddings key on the directory name, so every entry resolves.
    const auto config = pack_config();
    ingest::Manifest manifest;
    manifest.dataset_name = "ten";
    for (int i = 0; i < 10; ++i) {
        VideoManifestEntry e;
        e.video_id = "v" + std::to_string(i);
        const bool grill = i % 2 == 0;
        e.frame_dir = (kPack / "frames" / (grill ? "grill-steak" : "ride-bike")).string();
        e.frame_count = grill ? 32 : 16;
        e.ground_truth = grill ? "Grill Steak" : "Riding Bicycle";
        e.task = TaskSpec::for_task(grill ? TaskName::goal_inference
                                          : TaskName::action_recognition);
        e.rho = grill ? 0.5 : 1.0;
        manifest.entries.push_back(e);
    }
    const auto renderer = pack_renderer(config);

    const auto run_once = [&](const std::string& tag) {
        auto set = pack_backends(config);
        pipeline::RunOptions options;
        options.run_dir = fresh_dir("ten-" + tag);
        options.parallelism = 4;
        const auto summary = pipeline::run_manifest(manifest, config, set, renderer, options);
        CHECK(summary.ok == 10);
        auto records = read_records((options.run_dir / "records.jsonl").string());
        std::sort(records.begin(), records.end(),
                  [](const RunRecord& a, const RunRecord& b) { return a.video_id < b.video_id; });
        return records;
    };
    const auto a = run_once("a");
    const auto b = run_once("b");
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(records_equal_ignoring_timing(a[i], b[i]));
        CHECK(a[i].calls.chat == 4);
    }
}

TEST_CASE("determinism: identical records across runs, zero backend calls when warm") {
    const auto config = pack_config();
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    const auto renderer = pack_renderer(config);
    const fs::path cache_dir = fresh_dir("cache");

    const auto run_once = [&](const std::string& tag, backends::BackendSet& set) {
        pipeline::RunOptions options;
        options.run_dir = fresh_dir("det-" + tag);
        options.parallelism = 2;
        pipeline::run_manifest(manifest, config, set, renderer, options);
        auto records = read_records((options.run_dir / "records.jsonl").string());
        std::sort(records.begin(), records.end(),
                  [](const RunRecord& a, const RunRecord& b) { return a.video_id < b.video_id; });
        return records;
    };

    auto cold_set = pack_backends(config, std::make_shared<ResponseCache>(cache_dir));
    const auto cold = run_once("cold", cold_set);
    CHECK(cold_set.total_invocations() > 0);

    auto warm_set = pack_backends(config, std::make_shared<ResponseCache>(cache_dir));
    const auto warm = run_once("warm", warm_set);
    CHECK(warm_set.total_invocations() == 0);  // everything served from cache

    auto nocache_set = pack_backends(config);
    const auto again = run_once("nocache", nocache_set);

    REQUIRE(cold.size() == warm.size());
    REQUIRE(cold.size() == again.size());
    for (std::size_t i = 0; i < cold.size(); ++i) {
        CHECK(records_equal_ignoring_timing(cold[i], warm[i]));
        CHECK(records_equal_ignoring_timing(cold[i], again[i]));
    }
}

TEST_CASE("similarity dump lands in the run directory when requested") {
    const auto config = pack_config();
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    pipeline::RunOptions options;
    options.run_dir = fresh_dir("dump");
    options.dump_similarity = true;
    const auto rec = pipeline::run_video(entry_by_id(manifest, "grill-steak"), config,
                                         backend_set, renderer, options);
    REQUIRE(rec.status == "ok");
    CHECK(fs::exists(options.run_dir / "sim_grill-steak.txt"));
}

TEST_CASE("run_manifest rejects invalid configs up front") {
    auto config = pack_config();
    config.m_cap = 32;
    const auto manifest = ingest::load_manifest((kPack / "manifest.jsonl").string());
    auto backend_set = pack_backends(config);
    const auto renderer = pack_renderer(config);
    CHECK_THROWS_WITH_AS(pipeline::run_manifest(manifest, config, backend_set, renderer, {}),
                         doctest::Contains("M_cap exceeds 16"), std::runtime_error);
}
