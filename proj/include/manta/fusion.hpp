#pragma once
// Hierarchical fusion: each segment's caption, transcript, attention-
// weighted children, and parent context are combined into a textual
// template and a mixed embedding. Runs as a bottom-up pass followed by a
// top-down refinement pass that injects parent context (the root uses the
// global video embedding).

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "manta/corpus.hpp"
#include "manta/embed.hpp"
#include "manta/index.hpp"

namespace manta {

struct FusionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ChildWeights = std::map<std::string, double>;

// Softmax of child density scores at the given temperature.
inline ChildWeights child_attention(const std::vector<std::pair<std::string, double>>& child_scores,
                                    double temperature = 1.0) {
    if (child_scores.empty()) throw FusionError("child_attention: no children");
    double t = temperature > 0.0 ? temperature : 1.0;
    double max_s = child_scores.front().second;
    for (const auto& [id, s] : child_scores) max_s = std::max(max_s, s);
    double z = 0.0;
    ChildWeights w;
    for (const auto& [id, s] : child_scores) {
        double e = std::exp((s - max_s) / t);
        w[id] = e;
        z += e;
    }
    for (auto& [id, v] : w) v /= z;
    return w;
}

struct FusedSegment {
    std::string id;
    std::string fused_text;
    EmbeddingVector fused_embedding;
};

struct FusionConfig {
    double mix_caption = 0.35;
    double mix_transcript = 0.35;
    double mix_children = 0.2;
    double mix_parent = 0.1;
    std::size_t top_m_children = 3; // children texts included in the template
    double attention_temperature = 1.0;
};

inline FusedSegment fuse_segment(const std::string& caption, const std::string& transcript,
                                 const std::vector<FusedSegment>& children,
                                 const ChildWeights& weights,
                                 const EmbeddingVector& parent_embedding,
                                 const FusionConfig& cfg, const HashingEmbedder& embedder) {
    bool any_text = !caption.empty() || !transcript.empty();
    for (const auto& c : children) any_text = any_text || !c.fused_text.empty();
    if (!any_text && parent_embedding.values.empty())
        throw FusionError("fuse_segment: nothing to fuse");

    FusedSegment out;
    if (!caption.empty()) out.fused_text += "[VISUAL] " + caption;
    if (!transcript.empty()) {
        if (!out.fused_text.empty()) out.fused_text += " ";
        out.fused_text += "[AUDIO] " + transcript;
    }
    if (!children.empty()) {
        // top-m children by weight, ties by id
        std::vector<const FusedSegment*> by_weight;
        for (const auto& c : children) by_weight.push_back(&c);
        std::sort(by_weight.begin(), by_weight.end(), [&](const FusedSegment* a, const FusedSegment* b) {
            double wa = weights.count(a->id) ? weights.at(a->id) : 0.0;
            double wb = weights.count(b->id) ? weights.at(b->id) : 0.0;
            if (wa != wb) return wa > wb;
            return a->id < b->id;
        });
        std::string detail;
        std::size_t taken = 0;
        for (const FusedSegment* c : by_weight) {
            if (taken >= cfg.top_m_children) break;
            if (c->fused_text.empty()) continue;
            if (!detail.empty()) detail += " ";
            detail += c->fused_text;
            ++taken;
        }
        if (!detail.empty()) {
            if (!out.fused_text.empty()) out.fused_text += " ";
            out.fused_text += "[DETAIL] " + detail;
        }
    }

    EmbeddingVector e;
    e.values.assign(embedder.dim(), 0.0);
    if (!caption.empty()) e = add_scaled(std::move(e), embedder.embed(caption), cfg.mix_caption);
    if (!transcript.empty())
        e = add_scaled(std::move(e), embedder.embed(transcript), cfg.mix_transcript);
    for (const auto& c : children) {
        double w = weights.count(c.id) ? weights.at(c.id) : 0.0;
        e = add_scaled(std::move(e), c.fused_embedding, cfg.mix_children * w);
    }
    if (!parent_embedding.values.empty())
        e = add_scaled(std::move(e), parent_embedding, cfg.mix_parent);
    e.normalize();
    out.fused_embedding = std::move(e);
    return out;
}

struct FusionResult {
    std::map<std::string, FusedSegment> fused; // id -> fused form after both passes
    EmbeddingVector global;                    // per-video global when single video
    std::map<std::string, EmbeddingVector> global_per_video;
};

// Two-pass schedule: bottom-up without parent context, then top-down
// re-fusion using the first pass's parent embeddings; roots take the
// global video embedding as parent context.
inline FusionResult fuse_hierarchy(SegmentHierarchy& h,
                                   const std::map<std::string, double>& density_scores,
                                   const FusionConfig& cfg, const HashingEmbedder& embedder) {
    FusionResult result;
    auto score_of = [&](const std::string& id) {
        auto it = density_scores.find(id);
        return it == density_scores.end() ? 0.0 : it->second;
    };
    auto caption_of = [](const Segment& s) {
        const std::string* t = s.text_for(Modality::visual);
        return t ? *t : std::string();
    };
    auto transcript_of = [](const Segment& s) {
        const std::string* t = s.text_for(Modality::audio);
        return t ? *t : std::string();
    };
    EmbeddingVector no_parent;

    auto fuse_one = [&](const Segment& s, const std::map<std::string, FusedSegment>& lower,
                        const EmbeddingVector& parent) {
        std::vector<FusedSegment> children;
        ChildWeights weights;
        auto cit = h.child_map.find(s.id);
        if (cit != h.child_map.end() && !cit->second.empty()) {
            std::vector<std::pair<std::string, double>> child_scores;
            for (const auto& cid : cit->second) {
                auto fit = lower.find(cid);
                if (fit != lower.end()) children.push_back(fit->second);
                child_scores.emplace_back(cid, score_of(cid));
            }
            weights = child_attention(child_scores, cfg.attention_temperature);
        }
        FusedSegment f = fuse_segment(caption_of(s), transcript_of(s), children, weights, parent,
                                      cfg, embedder);
        f.id = s.id;
        return f;
    };

    // Pass 1: bottom-up, no parent context.
    std::map<std::string, FusedSegment> pass1;
    for (const auto& level : h.levels)
        for (const auto& s : level) pass1[s.id] = fuse_one(s, pass1, no_parent);

    // Global per video from macro-level pass-1 embeddings.
    std::map<std::string, std::vector<EmbeddingVector>> macro_per_video;
    for (const auto& s : h.levels.back())
        macro_per_video[s.video_id].push_back(pass1.at(s.id).fused_embedding);
    for (const auto& [vid, embs] : macro_per_video)
        result.global_per_video[vid] = global_embedding(embs);
    if (result.global_per_video.size() == 1)
        result.global = result.global_per_video.begin()->second;

    // Pass 2: top-down, parent context from pass 1 (root: global).
    for (auto level = h.levels.rbegin(); level != h.levels.rend(); ++level) {
        for (const auto& s : *level) {
            const EmbeddingVector* parent = nullptr;
            auto pit = h.parent_map.find(s.id);
            if (pit != h.parent_map.end()) {
                parent = &pass1.at(pit->second).fused_embedding;
            } else {
                auto git = result.global_per_video.find(s.video_id);
                if (git != result.global_per_video.end()) parent = &git->second;
            }
            result.fused[s.id] = fuse_one(s, pass1, parent ? *parent : no_parent);
        }
    }

    for (auto& level : h.levels)
        for (auto& s : level) s.fused_text = result.fused.at(s.id).fused_text;
    return result;
}

} // namespace manta
