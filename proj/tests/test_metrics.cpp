// Metric oracles: frozen CIDEr values from an independent evaluation of the
// formula, closed-form METEOR cases, and constructed embedding fixtures.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vidinfer/kernels.hpp"
#include "vidinfer/metrics.hpp"

using namespace vidinfer;
using backends::EmbeddingVector;

namespace {

// Text-table embedder for constructed-geometry fixtures.
class TableEmbedder : public backends::Embedder {
  public:
    std::map<std::string, std::vector<float>> table;
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) {
            const auto it = table.find(t);
            REQUIRE_MESSAGE(it != table.end(), "no embedding for: " << t);
            EmbeddingVector v;
            v.values = it->second;
            v.modality = backends::Modality::text;
            out.push_back(std::move(v));
        }
        return out;
    }
    std::vector<EmbeddingVector> embed_frames(
        const std::vector<std::filesystem::path>&) override {
        throw std::logic_error("not used");
    }
    std::string identity() const override { return "table"; }
};

const float kRoot3Over2 = 0.86602540378443864676f;

}  // namespace

TEST_CASE("tokenize") {
    CHECK(metrics::tokenize("Grill Steak!") == std::vector<std::string>{"grill", "steak"});
    CHECK(metrics::tokenize("") == std::vector<std::string>{});
    CHECK(metrics::tokenize("make-french toast") ==
          std::vector<std::string>{"make", "french", "toast"});
    CHECK(metrics::tokenize("A1 b2-c3") == std::vector<std::string>{"a1", "b2", "c3"});
}

TEST_CASE("cider_d: candidate identical to its reference scores 10") {
    // two distinct references, each candidate equals its own reference and
    // every order has n-grams (>= 4 tokens)
    const std::vector<std::string> cands = {"a man slicing a ripe banana",
                                            "a dog running in the green park"};
    const auto scores = metrics::cider_d(cands, cands);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(scores[1] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("cider_d: disjoint vocabulary scores 0") {
    const auto scores = metrics::cider_d({"alpha beta gamma delta"},
                                         {"epsilon zeta eta theta"});
    CHECK(scores[0] == doctest::Approx(0.0));
}

TEST_CASE("cider_d matches the frozen 3-sentence oracle within 1e-6") {
    // Expected values computed independently from the formula definition
    // (orders 1-4, reference-corpus IDF, count clipping, sigma = 6, x10).
    const std::vector<std::string> cands = {"a man is slicing a banana",
                                            "a dog runs in the park",
                                            "someone plays a guitar"};
    const std::vector<std::string> refs = {"a man slices a banana",
                                           "a dog is running in a park",
                                           "a person plays the guitar"};
    const auto scores = metrics::cider_d(cands, refs);
    REQUIRE(scores.size() == 3);
    CHECK(scores[0] == doctest::Approx(2.5260804372887953).epsilon(1e-6));
    CHECK(scores[1] == doctest::Approx(1.9294505786265193).epsilon(1e-6));
    CHECK(scores[2] == doctest::Approx(1.4234673608220616).epsilon(1e-6));
}

TEST_CASE("cider_d: empty candidate scores 0 with a warning") {
    const auto scores = metrics::cider_d({"", "a b c d"}, {"x y z w", "a b c d"});
    CHECK(scores[0] == 0.0);
    CHECK(scores[1] > 0.0);
}

TEST_CASE("cider_d: permuting items permutes scores identically") {
    const std::vector<std::string> cands = {"a man is slicing a banana",
                                            "a dog runs in the park",
                                            "someone plays a guitar"};
    const std::vector<std::string> refs = {"a man slices a banana",
                                           "a dog is running in a park",
                                           "a person plays the guitar"};
    const auto base = metrics::cider_d(cands, refs);
    const auto perm = metrics::cider_d({cands[2], cands[0], cands[1]},
                                       {refs[2], refs[0], refs[1]});
    CHECK(perm[0] == doctest::Approx(base[2]).epsilon(1e-12));
    CHECK(perm[1] == doctest::Approx(base[0]).epsilon(1e-12));
    CHECK(perm[2] == doctest::Approx(base[1]).epsilon(1e-12));
}

TEST_CASE("meteor_lite: identical four-token strings") {
    CHECK(metrics::meteor_lite("grill the big steak", "grill the big steak") ==
          doctest::Approx(0.9921875).epsilon(1e-12));
}

TEST_CASE("meteor_lite: identity closed form for lengths 1-20") {
    std::string text;
    for (int len = 1; len <= 20; ++len) {
        text += (len == 1 ? "" : " ") + std::string("tok") + std::to_string(len);
        const double expect = 1.0 - 0.5 / (double(len) * len * len);
        CHECK(metrics::meteor_lite(text, text) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("meteor_lite: zero overlap scores 0") {
    CHECK(metrics::meteor_lite("alpha beta", "gamma delta") == 0.0);
    CHECK(metrics::meteor_lite("", "x") == 0.0);
}

TEST_CASE("meteor_lite: hand-computed fragmentation case") {
    // candidate "grill the steak" vs reference "grill steak":
    // P = 2/3, R = 1, Fmean = 20/21, chunks = 2 of 2 matches, penalty = 0.5
    CHECK(metrics::meteor_lite("grill the steak", "grill steak") ==
          doctest::Approx(10.0 / 21.0).epsilon(1e-12));
}

TEST_CASE("meteor_lite stays in [0, 1] on random inputs") {
    std::mt19937 rng(101);
    const std::vector<std::string> vocab = {"a", "b", "c", "grill", "steak", "dog", "park"};
    for (int trial = 0; trial < 500; ++trial) {
        const auto make = [&] {
            std::string s;
            const int len = static_cast<int>(rng() % 10);
            for (int i = 0; i < len; ++i) s += vocab[rng() % vocab.size()] + " ";
            return s;
        };
        const double score = metrics::meteor_lite(make(), make());
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
    }
}

TEST_CASE("embed_cos: identical, orthogonal, and 60-degree fixtures") {
    TableEmbedder embedder;
    embedder.table["same"] = {1, 0};
    embedder.table["east"] = {1, 0};
    embedder.table["north"] = {0, 1};
    embedder.table["sixty"] = {0.5f, kRoot3Over2};
    CHECK(metrics::embed_cos("same", "same", embedder) == doctest::Approx(100.0));
    CHECK(metrics::embed_cos("east", "north", embedder) == doctest::Approx(0.0));
    CHECK(metrics::embed_cos("east", "sixty", embedder) == doctest::Approx(50.0).epsilon(1e-6));
    CHECK_THROWS_AS(metrics::embed_cos("", "x", embedder), std::invalid_argument);
}

TEST_CASE("embed_f: identical tokens score 100 under any embedder") {
    TableEmbedder embedder;
    embedder.table["grill"] = {1, 0};
    embedder.table["steak"] = {0.5f, kRoot3Over2};
    CHECK(metrics::embed_f("grill steak", "grill steak", embedder) == doctest::Approx(100.0));
}

TEST_CASE("embed_f: constant 0.5 cross-cosine yields 50") {
    TableEmbedder embedder;
    // all candidate tokens at (1,0); all reference tokens 60 degrees away
    embedder.table["aa"] = {1, 0};
    embedder.table["bb"] = {1, 0};
    embedder.table["cc"] = {0.5f, kRoot3Over2};
    embedder.table["dd"] = {0.5f, kRoot3Over2};
    CHECK(metrics::embed_f("aa bb", "cc dd", embedder) ==
          doctest::Approx(50.0).epsilon(1e-11));
}

TEST_CASE("embed_f: single token pair at cosine 0.8") {
    TableEmbedder embedder;
    embedder.table["one"] = {1, 0};
    embedder.table["two"] = {0.8f, 0.6f};
    CHECK(metrics::embed_f("one", "two", embedder) == doctest::Approx(80.0).epsilon(1e-6));
    CHECK_THROWS_AS(metrics::embed_f("", "two", embedder), std::invalid_argument);
}

TEST_CASE("score_pairs fills all four metrics and exact means") {
    TableEmbedder embedder;
    embedder.table["grill"] = {1, 0};
    embedder.table["steak"] = {1, 0};
    embedder.table["the"] = {1, 0};
    embedder.table["grill steak"] = {1, 0};
    embedder.table["grill the steak"] = {0.5f, kRoot3Over2};
    std::vector<metrics::ScoredItem> items(2);
    items[0].video_id = "a";
    items[0].candidate = "grill steak";
    items[0].reference = "grill steak";
    items[1].video_id = "b";
    items[1].candidate = "grill the steak";
    items[1].reference = "grill steak";
    const auto report = metrics::score_pairs(items, embedder);
    REQUIRE(report.count() == 2);
    CHECK(report.items[0].meteor == doctest::Approx(1.0 - 0.5 / 8.0));
    CHECK(report.items[1].meteor == doctest::Approx(10.0 / 21.0));
    CHECK(report.items[0].embed_cos == doctest::Approx(100.0));
    CHECK(report.items[1].embed_cos == doctest::Approx(50.0).epsilon(1e-6));
    CHECK(report.mean_meteor ==
          doctest::Approx((report.items[0].meteor + report.items[1].meteor) / 2));

    // TSV round trip preserves items
    const auto back = metrics::report_from_tsv(metrics::report_to_tsv(report));
    REQUIRE(back.count() == 2);
    CHECK(back.items[1].video_id == "b");
    CHECK(back.items[1].meteor == doctest::Approx(report.items[1].meteor).epsilon(1e-5));
    CHECK(back.mean_cider == doctest::Approx(report.mean_cider).epsilon(1e-5));
}
