#include "vidinfer/selector.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vidinfer/kernels.hpp"

namespace vidinfer::selector {

using backends::EmbeddingVector;

namespace {

std::vector<float> pack(const std::vector<EmbeddingVector>& vecs, std::size_t& dim) {
    if (vecs.empty()) throw std::invalid_argument("similarity: empty input");
    dim = vecs[0].values.size();
    std::vector<float> flat;
    flat.reserve(vecs.size() * dim);
    for (const auto& v : vecs) {
        if (v.values.size() != dim)
            throw std::invalid_argument("similarity: dimension mismatch");
        flat.insert(flat.end(), v.values.begin(), v.values.end());
    }
    return flat;
}

}  // namespace

SimilarityMatrix similarity(const std::vector<EmbeddingVector>& queries,
                            const std::vector<EmbeddingVector>& keys) {
    std::size_t qdim = 0, kdim = 0;
    const std::vector<float> q = pack(queries, qdim);
    const std::vector<float> k = pack(keys, kdim);
    if (qdim != kdim) throw std::invalid_argument("similarity: dimension mismatch");

    SimilarityMatrix sim;
    sim.rows = queries.size();
    sim.cols = keys.size();
    sim.values.resize(sim.rows * sim.cols);
    kernels::dot_matrix(q.data(), sim.rows, k.data(), sim.cols, qdim, sim.values.data());
    for (auto& v : sim.values) v = std::clamp(v, -1.0f, 1.0f);
    return sim;
}

SelectionResult select_evidence(const SimilarityMatrix& sim, int m_cap, bool global_topm) {
    if (sim.rows == 0 || sim.cols == 0)
        throw std::invalid_argument("select_evidence: empty similarity matrix");
    if (m_cap < 1) throw std::invalid_argument("select_evidence: M_cap must be >= 1");
    if (sim.col_frames.size() != sim.cols)
        throw std::invalid_argument("select_evidence: column frame labels missing");

    SelectionResult result;
    result.per_step_frame.resize(sim.rows);

    // Dedup keys on the resolved frame so the selected FrameSet stays strictly
    // increasing even when columns are captions. frame -> best row score.
    std::map<int, float> best;
    const auto keep_best = [&best](int frame, float score) {
        auto [it, inserted] = best.emplace(frame, score);
        if (!inserted && score > it->second) it->second = score;
    };
    for (std::size_t r = 0; r < sim.rows; ++r) {
        const std::size_t c = kernels::active_ops().argmax(sim.row(r), sim.cols);
        result.per_step_frame[r] = sim.col_frames[c];
        keep_best(sim.col_frames[c], sim.at(r, c));
    }
    if (global_topm) {
        best.clear();
        for (std::size_t c = 0; c < sim.cols; ++c) {
            float col_best = sim.at(0, c);
            for (std::size_t r = 1; r < sim.rows; ++r) col_best = std::max(col_best, sim.at(r, c));
            keep_best(sim.col_frames[c], col_best);
        }
    }

    std::vector<std::pair<int, float>> ranked(best.begin(), best.end());
    if (ranked.size() > static_cast<std::size_t>(m_cap)) {
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;  // ties to the lowest frame
        });
        ranked.resize(static_cast<std::size_t>(m_cap));
        std::sort(ranked.begin(), ranked.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
    }

    result.frames.stage = FrameStage::selected_M;
    for (const auto& [frame, score] : ranked) {
        result.frames.indices.push_back(frame);
        result.per_frame_best_score.push_back(score);
    }
    assert(!result.frames.indices.empty());
    return result;
}

Hypothesis clip_hypothesis(const std::vector<EmbeddingVector>& frame_vectors,
                           const std::vector<Hypothesis>& candidates,
                           backends::Embedder& embedder) {
    if (frame_vectors.empty()) throw std::invalid_argument("clip_hypothesis: no frame vectors");
    if (candidates.empty()) throw std::invalid_argument("clip_hypothesis: no candidates");

    std::size_t dim = 0;
    const std::vector<float> flat = pack(frame_vectors, dim);
    std::vector<float> pooled(dim);
    kernels::mean_pool(flat.data(), frame_vectors.size(), dim, pooled.data());
    if (!kernels::normalize(pooled))
        throw std::runtime_error("clip_hypothesis: mean-pooled frame features have zero norm");

    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& c : candidates) texts.push_back(c.text);
    const auto embedded = embedder.embed_texts(texts);

    std::vector<float> scores;
    scores.reserve(embedded.size());
    for (const auto& e : embedded) {
        if (e.values.size() != dim)
            throw std::invalid_argument("clip_hypothesis: dimension mismatch");
        scores.push_back(kernels::dot(pooled, e.values));
    }
    const std::size_t best = kernels::argmax(scores);
    return Hypothesis{candidates[best].text, HypothesisOrigin::clip};
}

SelectionResult select_variant(SelectorVariant variant, const VariantInputs& in,
                               backends::Embedder& embedder, int m_cap, bool global_topm,
                               SimilarityMatrix* sim_out) {
    std::vector<std::string> query_texts;
    switch (variant) {
        case SelectorVariant::steps_to_frame:
        case SelectorVariant::steps_to_caption:
            if (!in.steps || in.steps->empty())
                throw std::invalid_argument("select_variant: steps required");
            query_texts = in.steps->texts();
            break;
        case SelectorVariant::hypotheses_to_frame:
            if (!in.hypotheses || in.hypotheses->empty())
                throw std::invalid_argument("select_variant: hypotheses required");
            query_texts = in.hypotheses->texts();
            break;
        case SelectorVariant::captions_to_frame:
            if (!in.captions || in.captions->empty())
                throw std::invalid_argument("select_variant: captions required");
            for (const auto& c : *in.captions) query_texts.push_back(c.text);
            break;
        case SelectorVariant::none:
            throw std::invalid_argument("select_variant: variant 'none' performs no selection");
    }

    const auto queries = embedder.embed_texts(query_texts);
    SimilarityMatrix sim;
    if (variant == SelectorVariant::steps_to_caption) {
        if (!in.captions || in.captions->empty())
            throw std::invalid_argument("select_variant: captions required");
        std::vector<std::string> caption_texts;
        std::vector<int> owners;
        for (const auto& c : *in.captions) {
            caption_texts.push_back(c.text);
            owners.push_back(c.frame_index);
        }
        sim = similarity(queries, embedder.embed_texts(caption_texts));
        sim.col_frames = std::move(owners);
    } else {
        if (!in.sampled || !in.frame_vectors ||
            in.sampled->indices.size() != in.frame_vectors->size())
            throw std::invalid_argument("select_variant: frame vectors misaligned with frames");
        sim = similarity(queries, *in.frame_vectors);
        sim.col_frames = in.sampled->indices;
    }
    sim.row_labels = std::move(query_texts);

    SelectionResult result = select_evidence(sim, m_cap, global_topm);
    result.frames.video_id = in.sampled ? in.sampled->video_id : "";
    if (sim_out) *sim_out = std::move(sim);
    return result;
}

std::string dump_matrix(const SimilarityMatrix& sim) {
    std::ostringstream out;
    out << sim.rows << " " << sim.cols << "\n";
    out << "frames:";
    for (const int f : sim.col_frames) out << " " << f;
    out << "\n";
    for (std::size_t r = 0; r < sim.rows; ++r) {
        out << (r < sim.row_labels.size() ? sim.row_labels[r] : "row" + std::to_string(r));
        for (std::size_t c = 0; c < sim.cols; ++c) out << "\t" << sim.at(r, c);
        out << "\n";
    }
    return out.str();
}

}  // namespace vidinfer::selector
