#pragma once

#include <string>
#include <vector>

#include "vidinfer/backends.hpp"
#include "vidinfer/config.hpp"
#include "vidinfer/types.hpp"

namespace vidinfer::selector {

// Row-major query x key cosine scores. Columns carry the temporal frame index
// they resolve to (for caption keys, the caption's owning frame).
struct SimilarityMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;  // clamped to [-1, 1]
    std::vector<std::string> row_labels;
    std::vector<int> col_frames;

    float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    const float* row(std::size_t r) const { return values.data() + r * cols; }
};

struct SelectionResult {
    FrameSet frames;  // stage selected_M, temporally ascending
    std::vector<float> per_frame_best_score;  // parallel to frames.indices
    std::vector<int> per_step_frame;          // argmax frame per query row
};

// Cosine similarity of unit-normalized queries against keys; entry (i, j) is
// dot(q_i, k_j), clamped to [-1, 1]. Throws on dimension mismatch.
SimilarityMatrix similarity(const std::vector<backends::EmbeddingVector>& queries,
                            const std::vector<backends::EmbeddingVector>& keys);

// Per-row argmax (ties to the lowest column), column dedup keeping each
// column's best row score, score-ranked cap at m_cap (ties to the lowest
// column), temporally ascending output. global_topm instead ranks every
// column by its best score over all rows.
SelectionResult select_evidence(const SimilarityMatrix& sim, int m_cap,
                                bool global_topm = false);

// The candidate whose text embedding best matches the re-normalized mean of
// the frame vectors (ties to the lowest index). Throws when the mean pools
// to zero norm.
Hypothesis clip_hypothesis(const std::vector<backends::EmbeddingVector>& frame_vectors,
                           const std::vector<Hypothesis>& candidates,
                           backends::Embedder& embedder);

struct VariantInputs {
    const FrameSet* sampled = nullptr;  // keys for *_to_frame variants
    const std::vector<backends::EmbeddingVector>* frame_vectors = nullptr;  // aligned to sampled
    const std::vector<Caption>* captions = nullptr;  // stage-1 captions
    const HypothesisSet* hypotheses = nullptr;
    const StepList* steps = nullptr;
};

// Wires queries/keys per variant, then select_evidence. Queries embed as text;
// keys are frame vectors except steps_to_caption, where keys are caption text
// embeddings and the owning frame is recovered from the caption.
SelectionResult select_variant(SelectorVariant variant, const VariantInputs& inputs,
                               backends::Embedder& embedder, int m_cap, bool global_topm,
                               SimilarityMatrix* sim_out = nullptr);

// Plain-text dump: one header line "rows cols", then row label + scores per row,
// then the column frame indices.
std::string dump_matrix(const SimilarityMatrix& sim);

}  // namespace vidinfer::selector
