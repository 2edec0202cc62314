#pragma once
// Information-density scoring: novelty + alpha*entropy + beta*coherence
// - gamma*redundancy, plus the generalized form with same-level neighbor
// and child terms.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "manta/corpus.hpp"
#include "manta/embed.hpp"
#include "manta/textmodel.hpp"

namespace manta {

struct DensityWeights {
    double alpha = 0.35;
    double beta = 0.25;
    double gamma = 0.15;
};

struct DensityScore {
    double total = 0.0;
    double novelty = 0.0;    // bits/token
    double entropy = 0.0;    // bits
    double coherence = 0.0;  // [0,1]
    double redundancy = 0.0; // [0,1]
    bool single_modality = false;
};

// Cosine of the two texts' embeddings, clamped to [0,1]. Either text
// empty yields 0.
inline double cross_modal_coherence(const std::string& caption, const std::string& transcript,
                                    const HashingEmbedder& embedder) {
    if (caption.empty() || transcript.empty()) return 0.0;
    double c = cosine(embedder.embed(caption), embedder.embed(transcript));
    return std::clamp(c, 0.0, 1.0);
}

// Max cosine against the already-selected pool; 0 for an empty pool.
inline double redundancy(const EmbeddingVector& segment_embedding,
                         const std::vector<EmbeddingVector>& pool) {
    double r = 0.0;
    for (const auto& p : pool) r = std::max(r, cosine(segment_embedding, p));
    return std::clamp(r, 0.0, 1.0);
}

inline DensityScore density_score(const Segment& segment, const NGramLM& history_lm,
                                  const std::vector<std::string>& preceding_tokens,
                                  const std::vector<EmbeddingVector>& selected_pool,
                                  const DensityWeights& w, const HashingEmbedder& embedder) {
    DensityScore d;
    auto tokens = tokenize(segment.combined_text());
    d.novelty = novelty(history_lm, tokens, preceding_tokens);
    d.entropy = token_entropy(tokens);
    const std::string* caption = segment.text_for(Modality::visual);
    const std::string* transcript = segment.text_for(Modality::audio);
    if (caption && transcript) {
        d.coherence = cross_modal_coherence(*caption, *transcript, embedder);
    } else {
        d.single_modality = true;
    }
    d.redundancy = redundancy(embedder.embed(segment.combined_text()), selected_pool);
    d.total = d.novelty + w.alpha * d.entropy + w.beta * d.coherence - w.gamma * d.redundancy;
    return d;
}

struct GeneralizedWeights {
    double lambda_neighbor = 0.0;
    double mu_child = 0.0;
};

// Base density plus lambda * sum of neighbor similarities plus mu * sum of
// child similarities. Neighbors are the adjacent siblings under the same
// parent; segment-segment MI uses the embedding-cosine proxy.
inline double generalized_density(const std::string& segment_id, const SegmentHierarchy& h,
                                  const std::map<std::string, EmbeddingVector>& embeddings,
                                  double base_score, const GeneralizedWeights& gw) {
    auto emb = [&](const std::string& id) -> const EmbeddingVector* {
        auto it = embeddings.find(id);
        return it == embeddings.end() ? nullptr : &it->second;
    };
    const EmbeddingVector* self = emb(segment_id);
    if (!self) return base_score;

    double total = base_score;
    auto pit = h.parent_map.find(segment_id);
    if (pit != h.parent_map.end() && gw.lambda_neighbor != 0.0) {
        const auto& siblings = h.child_map.at(pit->second);
        auto sit = std::find(siblings.begin(), siblings.end(), segment_id);
        if (sit != siblings.end()) {
            if (sit != siblings.begin())
                if (const EmbeddingVector* e = emb(*(sit - 1)))
                    total += gw.lambda_neighbor * cosine(*self, *e);
            if (sit + 1 != siblings.end())
                if (const EmbeddingVector* e = emb(*(sit + 1)))
                    total += gw.lambda_neighbor * cosine(*self, *e);
        }
    }
    auto cit = h.child_map.find(segment_id);
    if (cit != h.child_map.end() && gw.mu_child != 0.0)
        for (const auto& cid : cit->second)
            if (const EmbeddingVector* e = emb(cid)) total += gw.mu_child * cosine(*self, *e);
    return total;
}

} // namespace manta
