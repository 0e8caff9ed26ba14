#pragma once

#include <string>
#include <vector>

#include "vidinfer/backends.hpp"

namespace vidinfer::metrics {

// Lowercase, split on non-alphanumeric, drop empties.
std::vector<std::string> tokenize(const std::string& text);

// CIDEr-D over n-gram orders 1-4: corpus IDF over the references, candidate
// counts clipped at the reference counts, per-order TF-IDF cosine, Gaussian
// length penalty exp(-(lc-lr)^2 / (2 sigma^2)), averaged over orders, x10.
// One reference per candidate; IDF comes from the run's reference set.
std::vector<double> cider_d(const std::vector<std::string>& candidates,
                            const std::vector<std::string>& references, double sigma = 6.0);

// Exact-unigram METEOR variant: Fmean = 10PR / (R + 9P),
// penalty = 0.5 (chunks / matches)^3, score = Fmean (1 - penalty). In [0, 1].
double meteor_lite(const std::string& candidate, const std::string& reference);

// 100 x cosine of the two sentence embeddings.
double embed_cos(const std::string& candidate, const std::string& reference,
                 backends::Embedder& embedder);

// Greedy-matching token F1 x100 over per-token embeddings: precision is the
// candidate-token mean of the best cosine against reference tokens, recall the
// symmetric quantity, combined harmonically. No baseline rescaling.
double embed_f(const std::string& candidate, const std::string& reference,
               backends::Embedder& embedder);

struct ScoredItem {
    std::string video_id;
    std::string task;
    double rho = 1.0;
    std::string candidate;
    std::string reference;
    double cider = 0;
    double meteor = 0;
    double embed_cos = 0;
    double embed_f = 0;
};

struct ScoreReport {
    std::vector<ScoredItem> items;
    double mean_cider = 0;
    double mean_meteor = 0;
    double mean_embed_cos = 0;
    double mean_embed_f = 0;

    std::size_t count() const { return items.size(); }
    void finalize();  // recompute corpus means
};

// Scores each (candidate, reference) pair with all four metrics; CIDEr IDF is
// built over this report's reference set.
ScoreReport score_pairs(std::vector<ScoredItem> items, backends::Embedder& embedder);

std::string report_to_tsv(const ScoreReport& report);
ScoreReport report_from_tsv(const std::string& text);

}  // namespace vidinfer::metrics
