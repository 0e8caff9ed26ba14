#include "vidinfer/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vidinfer/kernels.hpp"

namespace vidinfer::metrics {

namespace {

constexpr int kMaxOrder = 4;

using NgramCounts = std::map<std::string, int>;

std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start, int n) {
    std::string key = tokens[start];
    for (int i = 1; i < n; ++i) {
        key.push_back('\x1f');
        key += tokens[start + static_cast<std::size_t>(i)];
    }
    return key;
}

std::vector<NgramCounts> count_ngrams(const std::vector<std::string>& tokens) {
    std::vector<NgramCounts> counts(kMaxOrder);
    for (int n = 1; n <= kMaxOrder; ++n) {
        if (tokens.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
            ++counts[static_cast<std::size_t>(n - 1)][ngram_key(tokens, i, n)];
    }
    return counts;
}

void sanitize_cell(std::string& text) {
    for (auto& c : text)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<double> cider_d(const std::vector<std::string>& candidates,
                            const std::vector<std::string>& references, double sigma) {
    if (candidates.size() != references.size())
        throw std::invalid_argument("cider_d: candidate/reference count mismatch");
    const std::size_t n_items = candidates.size();
    if (n_items == 0) return {};

    std::vector<std::vector<std::string>> ref_tokens(n_items);
    std::vector<std::vector<NgramCounts>> ref_counts(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        ref_tokens[i] = tokenize(references[i]);
        ref_counts[i] = count_ngrams(ref_tokens[i]);
    }

    // Document frequency over the reference corpus, per n-gram order.
    std::vector<std::map<std::string, int>> df(kMaxOrder);
    for (const auto& counts : ref_counts)
        for (int n = 0; n < kMaxOrder; ++n)
            for (const auto& [key, _] : counts[static_cast<std::size_t>(n)])
                ++df[static_cast<std::size_t>(n)][key];
    const double log_items = std::log(static_cast<double>(n_items));
    const auto idf = [&](int n, const std::string& key) {
        const auto it = df[static_cast<std::size_t>(n)].find(key);
        const double d = it == df[static_cast<std::size_t>(n)].end() ? 0.0 : it->second;
        return log_items - std::log(std::max(1.0, d));
    };

    std::vector<double> scores(n_items, 0.0);
    for (std::size_t i = 0; i < n_items; ++i) {
        const auto cand_tokens = tokenize(candidates[i]);
        if (cand_tokens.empty()) {
            std::fprintf(stderr, "cider_d: empty candidate at item %zu, scored 0\n", i);
            continue;
        }
        const auto cand_counts = count_ngrams(cand_tokens);
        const double delta =
            static_cast<double>(cand_tokens.size()) - static_cast<double>(ref_tokens[i].size());
        const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));

        double total = 0.0;
        for (int n = 0; n < kMaxOrder; ++n) {
            const auto& hc = cand_counts[static_cast<std::size_t>(n)];
            const auto& hr = ref_counts[i][static_cast<std::size_t>(n)];
            double num = 0.0, norm_c = 0.0, norm_r = 0.0;
            for (const auto& [key, count] : hc) {
                const double w = idf(n, key);
                const double vc = count * w;
                norm_c += vc * vc;
                const auto it = hr.find(key);
                if (it != hr.end()) num += std::min(count, it->second) * w * it->second * w;
            }
            for (const auto& [key, count] : hr) {
                const double vr = count * idf(n, key);
                norm_r += vr * vr;
            }
            if (norm_c > 0.0 && norm_r > 0.0)
                total += penalty * num / (std::sqrt(norm_c) * std::sqrt(norm_r));
        }
        scores[i] = 10.0 * total / kMaxOrder;
    }
    return scores;
}

double meteor_lite(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    // Exact-unigram alignment, preferring the continuation of the previous
    // match and otherwise the leftmost unmatched occurrence.
    std::vector<int> cand_to_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    int prev_ref = -2;
    for (std::size_t ci = 0; ci < cand.size(); ++ci) {
        int chosen = -1;
        const int cont = prev_ref + 1;
        if (cont >= 0 && cont < static_cast<int>(ref.size()) &&
            !ref_used[static_cast<std::size_t>(cont)] &&
            ref[static_cast<std::size_t>(cont)] == cand[ci]) {
            chosen = cont;
        } else {
            for (std::size_t rj = 0; rj < ref.size(); ++rj) {
                if (!ref_used[rj] && ref[rj] == cand[ci]) {
                    chosen = static_cast<int>(rj);
                    break;
                }
            }
        }
        cand_to_ref[ci] = chosen;
        if (chosen >= 0) ref_used[static_cast<std::size_t>(chosen)] = true;
        prev_ref = chosen >= 0 ? chosen : -2;
    }

    int matches = 0, chunks = 0;
    int prev_ci = -2, prev_rj = -2;
    for (std::size_t ci = 0; ci < cand.size(); ++ci) {
        const int rj = cand_to_ref[ci];
        if (rj < 0) continue;
        ++matches;
        if (static_cast<int>(ci) != prev_ci + 1 || rj != prev_rj + 1) ++chunks;
        prev_ci = static_cast<int>(ci);
        prev_rj = rj;
    }
    if (matches == 0) return 0.0;

    const double p = static_cast<double>(matches) / static_cast<double>(cand.size());
    const double r = static_cast<double>(matches) / static_cast<double>(ref.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double embed_cos(const std::string& candidate, const std::string& reference,
                 backends::Embedder& embedder) {
    if (candidate.empty() || reference.empty())
        throw std::invalid_argument("embed_cos: empty input");
    const auto vecs = embedder.embed_texts({candidate, reference});
    return 100.0 * static_cast<double>(kernels::dot(vecs[0].values, vecs[1].values));
}

double embed_f(const std::string& candidate, const std::string& reference,
               backends::Embedder& embedder) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty() || ref.empty())
        throw std::invalid_argument("embed_f: empty token list");

    std::vector<std::string> all(cand.begin(), cand.end());
    all.insert(all.end(), ref.begin(), ref.end());
    const auto vecs = embedder.embed_texts(all);

    const auto cos_at = [&](std::size_t ci, std::size_t rj) {
        return kernels::dot(vecs[ci].values, vecs[cand.size() + rj].values);
    };
    double precision = 0.0;
    for (std::size_t ci = 0; ci < cand.size(); ++ci) {
        float best = cos_at(ci, 0);
        for (std::size_t rj = 1; rj < ref.size(); ++rj) best = std::max(best, cos_at(ci, rj));
        precision += best;
    }
    precision /= static_cast<double>(cand.size());
    double recall = 0.0;
    for (std::size_t rj = 0; rj < ref.size(); ++rj) {
        float best = cos_at(0, rj);
        for (std::size_t ci = 1; ci < cand.size(); ++ci) best = std::max(best, cos_at(ci, rj));
        recall += best;
    }
    recall /= static_cast<double>(ref.size());
    if (precision + recall <= 0.0) return 0.0;
    return 100.0 * 2.0 * precision * recall / (precision + recall);
}

void ScoreReport::finalize() {
    mean_cider = mean_meteor = mean_embed_cos = mean_embed_f = 0;
    if (items.empty()) return;
    for (const auto& it : items) {
        mean_cider += it.cider;
        mean_meteor += it.meteor;
        mean_embed_cos += it.embed_cos;
        mean_embed_f += it.embed_f;
    }
    const auto n = static_cast<double>(items.size());
    mean_cider /= n;
    mean_meteor /= n;
    mean_embed_cos /= n;
    mean_embed_f /= n;
}

ScoreReport score_pairs(std::vector<ScoredItem> items, backends::Embedder& embedder) {
    std::vector<std::string> candidates, references;
    candidates.reserve(items.size());
    references.reserve(items.size());
    for (const auto& it : items) {
        candidates.push_back(it.candidate);
        references.push_back(it.reference);
    }
    const auto cider = cider_d(candidates, references);
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& it = items[i];
        it.cider = cider[i];
        it.meteor = meteor_lite(it.candidate, it.reference);
        it.embed_cos = it.candidate.empty() ? 0.0 : embed_cos(it.candidate, it.reference, embedder);
        it.embed_f = tokenize(it.candidate).empty()
                         ? 0.0
                         : embed_f(it.candidate, it.reference, embedder);
    }
    ScoreReport report;
    report.items = std::move(items);
    report.finalize();
    return report;
}

std::string report_to_tsv(const ScoreReport& report) {
    std::ostringstream out;
    out << "video_id\ttask\trho\tcider\tmeteor_lite\tembed_cos\tembed_f\tcandidate\treference\n";
    char buf[64];
    const auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    for (auto item : report.items) {
        sanitize_cell(item.candidate);
        sanitize_cell(item.reference);
        out << item.video_id << "\t" << item.task << "\t" << fmt(item.rho) << "\t"
            << fmt(item.cider) << "\t" << fmt(item.meteor) << "\t" << fmt(item.embed_cos) << "\t"
            << fmt(item.embed_f) << "\t" << item.candidate << "\t" << item.reference << "\n";
    }
    out << "MEAN\t-\t-\t" << fmt(report.mean_cider) << "\t" << fmt(report.mean_meteor) << "\t"
        << fmt(report.mean_embed_cos) << "\t" << fmt(report.mean_embed_f) << "\t-\t-\n";
    return out.str();
}

ScoreReport report_from_tsv(const std::string& text) {
    ScoreReport report;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (cells.size() != 9) throw std::runtime_error("score report: malformed row");
        if (cells[0] == "MEAN") continue;
        ScoredItem item;
        item.video_id = cells[0];
        item.task = cells[1];
        item.rho = std::stod(cells[2]);
        item.cider = std::stod(cells[3]);
        item.meteor = std::stod(cells[4]);
        item.embed_cos = std::stod(cells[5]);
        item.embed_f = std::stod(cells[6]);
        item.candidate = cells[7];
        item.reference = cells[8];
        report.items.push_back(std::move(item));
    }
    report.finalize();
    return report;
}

}  // namespace vidinfer::metrics
