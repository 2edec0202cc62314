#pragma once
// Adaptive redundancy minimization: segments are admitted in descending
// density order against a decayed coverage accumulator; near-duplicates
// contribute only their novel sentences.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "manta/corpus.hpp"
#include "manta/embed.hpp"
#include "manta/tokenizer.hpp"

namespace manta {

struct CoverageVector {
    EmbeddingVector accumulator;
    double decay = 0.9;

    explicit CoverageVector(std::size_t dim = kDefaultEmbedDim, double lambda = 0.9)
        : decay(lambda) {
        accumulator.values.assign(dim, 0.0);
    }

    void admit(const EmbeddingVector& e) {
        accumulator = add_scaled(std::move(accumulator), e, decay);
    }
};

inline double coverage_overlap(const EmbeddingVector& e, const CoverageVector& c) {
    return cosine(e, c.accumulator); // 0 when accumulator is the zero vector
}

struct DedupConfig {
    double tau_dedup = 0.85;
    std::size_t tau_length = 10; // min novel-delta tokens
    double eta = 0.5;            // novel-delta similarity ceiling vs pool
    double lambda = 0.9;         // coverage decay
};

struct DedupReport {
    std::vector<std::string> retained; // admitted whole
    std::vector<std::string> merged;   // admitted as novel delta
    std::vector<std::string> dropped;
};

struct DedupResult {
    std::vector<Segment> pool;
    DedupReport report;
};

// Whitespace normalization and sentence-boundary repair; no rewriting.
inline std::string refine_delta(const std::vector<std::string>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        std::string norm;
        bool in_ws = false;
        for (char ch : s) {
            if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
                in_ws = !norm.empty();
            } else {
                if (in_ws) norm.push_back(' ');
                in_ws = false;
                norm.push_back(ch);
            }
        }
        if (norm.empty()) continue;
        char last = norm.back();
        if (last != '.' && last != '!' && last != '?') norm.push_back('.');
        if (!out.empty()) out.push_back(' ');
        out += norm;
    }
    return out;
}

// Sentences of the segment not covered (max-cosine >= tau_dedup) by any
// pooled segment; returned refined. Empty when fully covered.
inline std::string novel_delta(const Segment& segment, const std::vector<Segment>& pool,
                               const HashingEmbedder& embedder, double tau_dedup) {
    std::vector<EmbeddingVector> pool_embs;
    pool_embs.reserve(pool.size());
    for (const auto& p : pool) pool_embs.push_back(embedder.embed(p.combined_text()));
    std::vector<std::string> novel;
    for (const auto& sentence : split_sentences(segment.combined_text())) {
        EmbeddingVector se = embedder.embed(sentence);
        double best = 0.0;
        for (const auto& pe : pool_embs) best = std::max(best, cosine(se, pe));
        if (best < tau_dedup) novel.push_back(sentence);
    }
    return refine_delta(novel);
}

// Algorithm: sort by (score desc, start_s asc, id asc); admit whole below
// the coverage threshold, otherwise try the novel delta; update coverage
// on every admission.
inline DedupResult minimize_redundancy(const std::vector<Segment>& segments,
                                       const std::map<std::string, double>& scores,
                                       const DedupConfig& cfg, const HashingEmbedder& embedder) {
    std::vector<const Segment*> order;
    order.reserve(segments.size());
    for (const auto& s : segments) order.push_back(&s);
    std::sort(order.begin(), order.end(), [&](const Segment* a, const Segment* b) {
        double sa = scores.count(a->id) ? scores.at(a->id) : 0.0;
        double sb = scores.count(b->id) ? scores.at(b->id) : 0.0;
        if (sa != sb) return sa > sb;
        if (a->range.start_s != b->range.start_s) return a->range.start_s < b->range.start_s;
        return a->id < b->id;
    });

    DedupResult result;
    CoverageVector coverage(embedder.dim(), cfg.lambda);
    std::vector<EmbeddingVector> pool_embs;
    for (const Segment* s : order) {
        EmbeddingVector e = embedder.embed(s->combined_text());
        // the accumulator cosine alone dilutes toward 1/sqrt(pool size) once
        // the pool is diverse, so a duplicate of any single pooled segment
        // must also trip the gate
        double overlap = coverage_overlap(e, coverage);
        for (const auto& pe : pool_embs) overlap = std::max(overlap, cosine(e, pe));
        if (overlap < cfg.tau_dedup) {
            result.pool.push_back(*s);
            result.report.retained.push_back(s->id);
            coverage.admit(e);
            pool_embs.push_back(std::move(e));
            continue;
        }
        std::string delta = novel_delta(*s, result.pool, embedder, cfg.tau_dedup);
        EmbeddingVector de = embedder.embed(delta);
        double pool_sim = 0.0;
        for (const auto& p : result.pool)
            pool_sim = std::max(pool_sim, cosine(de, embedder.embed(p.combined_text())));
        if (token_count(delta) > cfg.tau_length && pool_sim < cfg.eta) {
            Segment merged = *s;
            for (auto& mt : merged.texts) mt.text.clear();
            merged.texts.clear();
            merged.texts.push_back({Modality::visual, delta, 1.0});
            result.pool.push_back(std::move(merged));
            result.report.merged.push_back(s->id);
            coverage.admit(de);
            pool_embs.push_back(std::move(de));
        } else {
            result.report.dropped.push_back(s->id);
        }
    }
    return result;
}

} // namespace manta
