#pragma once
// Synthetic corpus generation with planted needles, the end-to-end
// pipeline wiring, and retrieval evaluation metrics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "manta/config.hpp"
#include "manta/corpus.hpp"
#include "manta/dedup.hpp"
#include "manta/embed.hpp"
#include "manta/fusion.hpp"
#include "manta/index.hpp"
#include "manta/scoring.hpp"
#include "manta/select.hpp"
#include "manta/textmodel.hpp"

namespace manta {

struct SynthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NeedlePlan {
    std::string video_id;
    double position_s = 0.0;
    // "visual", "audio", or "both" (text split across modalities at one range)
    std::string modality = "visual";
    std::string text;
    std::optional<std::pair<double, std::string>> paired; // (position_s, text) long-range partner
};

struct SynthVideo {
    std::string id;
    double duration_s = 180.0;
    double micro_s = 3.0;
};

struct SynthSpec {
    std::vector<SynthVideo> videos;
    std::vector<NeedlePlan> needles;
    double repeat_rate = 0.3; // template reuse probability, drives dedup
    double query_overlap = 0.6;
    std::uint64_t seed = 1;
    std::size_t topic_pools = 8;
    std::size_t pool_tokens = 40;
    std::size_t tokens_per_segment = 8;
};

struct GroundTruthQuery {
    std::string query;
    std::vector<std::string> needle_ids;
    std::vector<std::string> required_texts; // all must appear in the bundle text
    std::string kind;                        // single | paired | cross_modal
};

struct GroundTruth {
    std::vector<GroundTruthQuery> queries;
};

struct SynthCorpus {
    std::vector<Segment> micro; // level-1 segments, ids assigned
    GroundTruth truth;
};

namespace detail_synth {

// Deterministic pseudo-word pools; pool 0 token 0 is always the same word.
inline std::vector<std::vector<std::string>> make_pools(std::size_t pools, std::size_t tokens) {
    static const char* onsets[] = {"ba", "do", "fi", "gu", "ka", "lo", "me", "nu",
                                   "pa", "re", "si", "ta", "vo", "wi", "za", "che"};
    static const char* codas[] = {"lin", "mar", "nes", "rok", "dal", "vim", "sur", "tek",
                                  "pol", "gan", "hel", "dor", "fas", "mun", "ril", "bex"};
    std::vector<std::vector<std::string>> out(pools);
    for (std::size_t p = 0; p < pools; ++p)
        for (std::size_t t = 0; t < tokens; ++t)
            out[p].push_back(std::string(onsets[(p * 7 + t) % 16]) + codas[(p * 3 + t * 5) % 16] +
                             std::to_string(p));
    return out;
}

} // namespace detail_synth

// Deterministic per seed. Filler sentences are drawn from topic pools with
// template reuse at repeat_rate; needles replace the planned segment's
// modality text verbatim.
inline SynthCorpus generate_corpus(const SynthSpec& spec) {
    SynthCorpus out;
    std::mt19937_64 rng(spec.seed);
    auto pools = detail_synth::make_pools(spec.topic_pools, spec.pool_tokens);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto sentence = [&]() {
        std::uniform_int_distribution<std::size_t> pool_pick(0, pools.size() - 1);
        const auto& pool = pools[pool_pick(rng)];
        std::uniform_int_distribution<std::size_t> tok_pick(0, pool.size() - 1);
        std::string text;
        for (std::size_t i = 0; i < spec.tokens_per_segment; ++i) {
            if (!text.empty()) text += " ";
            text += pool[tok_pick(rng)];
        }
        return text + ".";
    };
    // segment-level template reuse: with probability repeat_rate, a segment
    // repeats an earlier (visual, audio) pair verbatim, which is what the
    // deduplication stage exists to collapse
    std::vector<std::pair<std::string, std::string>> templates;
    auto filler_pair = [&]() {
        if (!templates.empty() && unit(rng) < spec.repeat_rate) {
            std::uniform_int_distribution<std::size_t> pick(0, templates.size() - 1);
            return templates[pick(rng)];
        }
        templates.emplace_back(sentence(), sentence());
        return templates.back();
    };

    std::map<std::string, std::size_t> video_micro_count;
    for (const auto& video : spec.videos) {
        std::size_t n = static_cast<std::size_t>(std::llround(video.duration_s / video.micro_s));
        video_micro_count[video.id] = n;
        for (std::size_t i = 0; i < n; ++i) {
            Segment s;
            s.video_id = video.id;
            s.level = 1;
            s.range = {i * video.micro_s, (i + 1) * video.micro_s};
            s.id = make_segment_id(video.id, 1, i);
            auto [visual, audio] = filler_pair();
            s.texts.push_back({Modality::visual, visual, 1.0});
            s.texts.push_back({Modality::audio, audio, 1.0});
            out.micro.push_back(std::move(s));
        }
    }

    auto segment_at = [&](const std::string& video_id, double pos_s) -> Segment& {
        for (const auto& video : spec.videos) {
            if (video.id != video_id) continue;
            if (pos_s < 0.0 || pos_s >= video.duration_s)
                throw SynthError("needle position " + std::to_string(pos_s) + " outside " + video_id);
            std::size_t idx = static_cast<std::size_t>(pos_s / video.micro_s);
            for (auto& s : out.micro)
                if (s.video_id == video_id && s.id == make_segment_id(video_id, 1, idx)) return s;
        }
        throw SynthError("needle references unknown video " + video_id);
    };

    std::set<std::string> used_slots;
    auto plant = [&](const std::string& video_id, double pos_s, const std::string& modality,
                     const std::string& text) -> std::pair<std::string, std::vector<std::string>> {
        Segment& s = segment_at(video_id, pos_s);
        std::vector<std::string> planted_texts;
        auto set_text = [&](Modality m, const std::string& t) {
            std::string slot = s.id + "/" + to_string(m);
            if (!used_slots.insert(slot).second)
                throw SynthError("needle collision at " + slot);
            for (auto& mt : s.texts)
                if (mt.modality == m) mt.text = t;
            planted_texts.push_back(t);
        };
        if (modality == "both") {
            auto toks = tokenize(text);
            if (toks.size() < 2) throw SynthError("cross-modal needle needs at least 2 tokens");
            std::string first, second;
            for (std::size_t i = 0; i < toks.size(); ++i) {
                std::string& half = i < toks.size() / 2 ? first : second;
                if (!half.empty()) half += " ";
                half += toks[i];
            }
            set_text(Modality::visual, first + ".");
            set_text(Modality::audio, second + ".");
        } else if (modality == "visual" || modality == "audio") {
            set_text(modality == "visual" ? Modality::visual : Modality::audio, text);
        } else {
            throw SynthError("needle modality must be visual, audio, or both");
        }
        return {s.id, planted_texts};
    };

    // Paraphrase with token overlap >= query_overlap: replace a bounded
    // fraction of tokens with filler vocabulary.
    auto paraphrase = [&](const std::string& text) {
        auto toks = tokenize(text);
        std::size_t replace = static_cast<std::size_t>(
            std::floor((1.0 - spec.query_overlap) * static_cast<double>(toks.size())));
        std::vector<std::size_t> order(toks.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::uniform_int_distribution<std::size_t> pool_pick(0, pools.size() - 1);
        for (std::size_t r = 0; r < replace; ++r) {
            const auto& pool = pools[pool_pick(rng)];
            std::uniform_int_distribution<std::size_t> tok_pick(0, pool.size() - 1);
            toks[order[r]] = pool[tok_pick(rng)];
        }
        std::string q;
        for (const auto& t : toks) {
            if (!q.empty()) q += " ";
            q += t;
        }
        return q;
    };

    for (const auto& plan : spec.needles) {
        GroundTruthQuery gt;
        auto [id, texts] = plant(plan.video_id, plan.position_s, plan.modality, plan.text);
        gt.needle_ids.push_back(id);
        if (plan.modality == "both") {
            gt.kind = "cross_modal";
            gt.required_texts = texts;
            gt.query = paraphrase(plan.text);
        } else if (plan.paired) {
            gt.kind = "paired";
            auto [pid, ptexts] = plant(plan.video_id, plan.paired->first, plan.modality,
                                       plan.paired->second);
            gt.needle_ids.push_back(pid);
            gt.query = paraphrase(plan.text + " " + plan.paired->second);
        } else {
            gt.kind = "single";
            gt.query = paraphrase(plan.text);
        }
        out.truth.queries.push_back(std::move(gt));
    }
    return out;
}

inline json ground_truth_to_json(const GroundTruth& gt) {
    json out = json::array();
    for (const auto& q : gt.queries)
        out.push_back({{"query", q.query},
                       {"needle_ids", q.needle_ids},
                       {"required_texts", q.required_texts},
                       {"kind", q.kind}});
    return json{{"queries", out}};
}

inline GroundTruth ground_truth_from_json(const json& j) {
    GroundTruth gt;
    for (const auto& q : j.at("queries")) {
        GroundTruthQuery e;
        e.query = q.at("query").get<std::string>();
        e.needle_ids = q.at("needle_ids").get<std::vector<std::string>>();
        e.required_texts = q.at("required_texts").get<std::vector<std::string>>();
        e.kind = q.at("kind").get<std::string>();
        gt.queries.push_back(std::move(e));
    }
    return gt;
}

// The built pipeline: scored, deduplicated, fused, indexed.
struct BuiltPipeline {
    SegmentHierarchy hierarchy;
    std::map<std::string, double> density; // per micro segment
    DedupReport dedup_report;
    std::size_t micro_input = 0;
    std::size_t micro_retained = 0;
    VectorIndex index{kDefaultEmbedDim};
    std::vector<IndexedSegment> indexed;
};

// Density scores are computed per video in temporal order against an
// incrementally trained history model; redundancy is left to the
// deduplication stage (empty pool here).
inline std::map<std::string, double> score_micro_segments(const std::vector<Segment>& micro,
                                                          const PipelineConfig& cfg,
                                                          const HashingEmbedder& embedder) {
    std::map<std::string, double> scores;
    std::map<std::string, std::vector<const Segment*>> per_video;
    for (const auto& s : micro) per_video[s.video_id].push_back(&s);
    for (auto& [vid, segs] : per_video) {
        std::sort(segs.begin(), segs.end(), [](const Segment* a, const Segment* b) {
            return a->range.start_s < b->range.start_s;
        });
        NGramLM lm(cfg.ngram_order, cfg.ngram_k);
        std::vector<std::string> preceding;
        for (const Segment* s : segs) {
            DensityScore d = density_score(*s, lm, preceding, {}, cfg.density, embedder);
            scores[s->id] = d.total;
            auto toks = tokenize(s->combined_text());
            lm.train(toks);
            preceding = std::move(toks); // prob() only consumes the tail
        }
    }
    return scores;
}

// Hierarchy and fusion run over the full micro stream (they need
// contiguous coverage); deduplication then decides which leaf segments
// reach the index. Merged (novel-delta) segments are indexed with their
// delta text.
inline BuiltPipeline build_pipeline(const std::vector<Segment>& micro, const PipelineConfig& cfg) {
    HashingEmbedder embedder(cfg.embed_dim);
    BuiltPipeline built;
    built.micro_input = micro.size();

    built.hierarchy = build_hierarchy(micro, cfg.scales);
    built.density = score_micro_segments(built.hierarchy.levels[0], cfg, embedder);
    FusionResult fused = fuse_hierarchy(built.hierarchy, built.density, cfg.fusion, embedder);

    DedupResult deduped =
        minimize_redundancy(built.hierarchy.levels[0], built.density, cfg.dedup, embedder);
    built.dedup_report = deduped.report;
    built.micro_retained = deduped.pool.size();
    std::set<std::string> merged_ids(deduped.report.merged.begin(), deduped.report.merged.end());
    std::map<std::string, const Segment*> pool_by_id;
    for (const auto& s : deduped.pool) pool_by_id[s.id] = &s;

    built.index = VectorIndex(cfg.embed_dim);
    std::map<std::string, std::vector<const Segment*>> per_video;
    for (const auto& s : deduped.pool) per_video[s.video_id].push_back(&s);
    for (auto& [vid, segs] : per_video) {
        std::sort(segs.begin(), segs.end(), [](const Segment* a, const Segment* b) {
            return a->range.start_s < b->range.start_s;
        });
        std::vector<EmbeddingVector> ordered;
        std::vector<std::string> texts;
        for (const Segment* s : segs) {
            if (merged_ids.count(s->id)) {
                texts.push_back(s->combined_text());
                ordered.push_back(embedder.embed(texts.back()));
            } else {
                texts.push_back(fused.fused.at(s->id).fused_text);
                ordered.push_back(fused.fused.at(s->id).fused_embedding);
            }
        }
        const EmbeddingVector& g = fused.global_per_video.at(vid);
        for (std::size_t k = 0; k < segs.size(); ++k) {
            EmbeddingVector ce = contextual_embedding(k, ordered, cfg.context, g);
            built.index.add(segs[k]->id, ce);
            IndexedSegment is;
            is.id = segs[k]->id;
            is.video_id = vid;
            is.range = segs[k]->range;
            is.text = texts[k];
            is.tokens = token_count(is.text);
            built.indexed.push_back(std::move(is));
        }
    }
    return built;
}

struct EvalReport {
    double needle_recall = 0.0;
    double both_needle_recall = 0.0; // over paired queries only
    double cross_modal_recall = 0.0; // over cross-modal queries only
    double budget_utilization = 0.0;
    double dedup_compression = 1.0; // retained / input
    double latency_p50_ms = 0.0;
    double latency_p95_ms = 0.0;
    std::size_t queries = 0;
    std::size_t paired_queries = 0;
    std::size_t cross_modal_queries = 0;
};

// Dedup may have rebuilt ids; a needle counts as present if a bundled
// segment covers its original range in the same video.
inline bool bundle_covers(const ContextBundle& bundle, const std::string& needle_id,
                          const std::vector<Segment>& original_micro) {
    const Segment* needle = nullptr;
    for (const auto& s : original_micro)
        if (s.id == needle_id) needle = &s;
    if (!needle) return false;
    double mid = 0.5 * (needle->range.start_s + needle->range.end_s);
    for (const auto& e : bundle.entries)
        if (e.segment.video_id == needle->video_id && e.segment.range.start_s <= mid &&
            mid < e.segment.range.end_s)
            return true;
    return false;
}

inline EvalReport evaluate(const SynthCorpus& corpus, const BuiltPipeline& built,
                           const PipelineConfig& cfg) {
    if (built.index.size() == 0) throw SelectError("evaluate: index is empty");
    HashingEmbedder embedder(cfg.embed_dim);
    QueryPipeline pipeline(built.index, built.indexed, embedder);

    EvalReport report;
    report.queries = corpus.truth.queries.size();
    report.dedup_compression = built.micro_input
                                   ? static_cast<double>(built.micro_retained) /
                                         static_cast<double>(built.micro_input)
                                   : 1.0;
    std::vector<double> latencies;
    double hits = 0.0, both_hits = 0.0, cross_hits = 0.0, utilization = 0.0;
    for (const auto& gt : corpus.truth.queries) {
        auto t0 = std::chrono::steady_clock::now();
        ContextBundle bundle = pipeline.run(gt.query, cfg.budget, cfg.rerank_w);
        auto t1 = std::chrono::steady_clock::now();
        latencies.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        utilization += cfg.budget.max_tokens
                           ? static_cast<double>(bundle.total_tokens) /
                                 static_cast<double>(cfg.budget.max_tokens)
                           : 0.0;

        bool any = false, all = true;
        for (const auto& nid : gt.needle_ids) {
            bool covered = bundle_covers(bundle, nid, corpus.micro);
            any = any || covered;
            all = all && covered;
        }
        if (any) hits += 1.0;
        if (gt.kind == "paired") {
            ++report.paired_queries;
            if (all) both_hits += 1.0;
        }
        if (gt.kind == "cross_modal") {
            ++report.cross_modal_queries;
            std::string text = assemble_context(bundle);
            bool present = true;
            for (const auto& req : gt.required_texts) {
                // compare tokenized to ignore template punctuation
                auto needle_toks = tokenize(req);
                auto text_toks = tokenize(text);
                present = present &&
                          std::search(text_toks.begin(), text_toks.end(), needle_toks.begin(),
                                      needle_toks.end()) != text_toks.end();
            }
            if (present) cross_hits += 1.0;
        }
    }
    if (report.queries) {
        report.needle_recall = hits / static_cast<double>(report.queries);
        report.budget_utilization = utilization / static_cast<double>(report.queries);
    }
    if (report.paired_queries)
        report.both_needle_recall = both_hits / static_cast<double>(report.paired_queries);
    if (report.cross_modal_queries)
        report.cross_modal_recall = cross_hits / static_cast<double>(report.cross_modal_queries);
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        report.latency_p50_ms = latencies[latencies.size() / 2];
        report.latency_p95_ms = latencies[std::min(latencies.size() - 1,
                                                   static_cast<std::size_t>(
                                                       std::ceil(0.95 * latencies.size())) )];
    }
    return report;
}

inline json report_to_json(const EvalReport& r) {
    return json{{"needle_recall", r.needle_recall},
                {"both_needle_recall", r.both_needle_recall},
                {"cross_modal_recall", r.cross_modal_recall},
                {"budget_utilization", r.budget_utilization},
                {"dedup_compression", r.dedup_compression},
                {"latency_p50_ms", r.latency_p50_ms},
                {"latency_p95_ms", r.latency_p95_ms},
                {"queries", r.queries},
                {"paired_queries", r.paired_queries},
                {"cross_modal_queries", r.cross_modal_queries}};
}

// Spec file schema, JSON:
// {"seed":1,"repeat_rate":0.3,
//  "videos":[{"id":"v0","duration_s":3600,"micro_s":3}],
//  "needles":[{"video":"v0","position_s":120,"modality":"visual","text":"...",
//              "paired":{"position_s":3000,"text":"..."}}]}
inline SynthSpec parse_synth_spec(const json& j) {
    SynthSpec spec;
    spec.seed = j.value("seed", 1ull);
    spec.repeat_rate = j.value("repeat_rate", 0.3);
    spec.query_overlap = j.value("query_overlap", 0.6);
    for (const auto& v : j.at("videos"))
        spec.videos.push_back({v.at("id").get<std::string>(), v.at("duration_s").get<double>(),
                               v.value("micro_s", 3.0)});
    if (j.contains("needles"))
        for (const auto& n : j["needles"]) {
            NeedlePlan plan;
            plan.video_id = n.at("video").get<std::string>();
            plan.position_s = n.at("position_s").get<double>();
            plan.modality = n.value("modality", "visual");
            plan.text = n.at("text").get<std::string>();
            if (n.contains("paired"))
                plan.paired = {n["paired"].at("position_s").get<double>(),
                               n["paired"].at("text").get<std::string>()};
            spec.needles.push_back(std::move(plan));
        }
    return spec;
}

} // namespace manta
