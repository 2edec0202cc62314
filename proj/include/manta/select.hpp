#pragma once
// Query-time selection: encode, coarse retrieve, rerank, budget the
// selection (rank-prefix or greedy density knapsack), check coherence,
// and assemble the final context.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "manta/corpus.hpp"
#include "manta/embed.hpp"
#include "manta/index.hpp"
#include "manta/tokenizer.hpp"

namespace manta {

struct SelectError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Query {
    std::string text;
    EmbeddingVector embedding;
};

inline Query encode_query(const std::string& text, const HashingEmbedder& embedder) {
    if (tokenize(text).empty()) throw SelectError("empty query");
    return Query{text, embedder.embed(text)};
}

struct BudgetConfig {
    std::size_t max_tokens = 2048; // L
    std::size_t k0 = 50;
    double coherence_tau = 0.0; // 0 disables the coherence retry
    bool density_mode = false;  // rank-prefix when false
    std::size_t max_coherence_retries = 5;
};

// What the query pipeline needs to know about an indexed segment.
struct IndexedSegment {
    std::string id;
    std::string video_id;
    TimeRange range;
    std::string text;
    std::size_t tokens = 0;
};

struct Candidate {
    IndexedSegment segment;
    double cosine_score = 0.0;
    double rerank_score = 0.0;
};

// Document frequencies over the indexed texts, for the lexical rerank term.
class IdfTable {
public:
    IdfTable() = default;

    explicit IdfTable(const std::vector<IndexedSegment>& corpus) : docs_(corpus.size()) {
        for (const auto& s : corpus) {
            std::set<std::string> seen;
            for (const auto& t : tokenize(s.text)) seen.insert(t);
            for (const auto& t : seen) df_[t] += 1;
        }
    }

    double idf(const std::string& token) const {
        auto it = df_.find(token);
        double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
        return std::log(1.0 + static_cast<double>(docs_ + 1) / (df + 1.0));
    }

private:
    std::map<std::string, std::size_t> df_;
    std::size_t docs_ = 0;
};

struct RerankWeights {
    double w_cos = 0.7;
    double w_lex = 0.3;
};

// IDF-weighted fraction of query tokens present in the candidate text.
inline double lexical_overlap(const std::string& query_text, const std::string& candidate_text,
                              const IdfTable& idf) {
    auto qtoks = tokenize(query_text);
    if (qtoks.empty()) return 0.0;
    std::set<std::string> ctoks;
    for (const auto& t : tokenize(candidate_text)) ctoks.insert(t);
    std::set<std::string> qset(qtoks.begin(), qtoks.end());
    double hit = 0.0, total = 0.0;
    for (const auto& t : qset) {
        double w = idf.idf(t);
        total += w;
        if (ctoks.count(t)) hit += w;
    }
    return total > 0.0 ? hit / total : 0.0;
}

inline std::vector<Candidate> rerank(std::vector<Candidate> candidates, const std::string& query_text,
                                     const IdfTable& idf, const RerankWeights& w = {}) {
    if (candidates.empty()) throw SelectError("rerank: no candidates");
    for (auto& c : candidates) {
        c.rerank_score =
            w.w_cos * c.cosine_score + w.w_lex * lexical_overlap(query_text, c.segment.text, idf);
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.rerank_score != b.rerank_score) return a.rerank_score > b.rerank_score;
        return a.segment.id < b.segment.id;
    });
    return candidates;
}

// Largest k with the top-k ranked token lengths summing to at most L.
inline std::size_t budget_k_star(const std::vector<std::size_t>& ranked_lengths, std::size_t L) {
    std::size_t total = 0, k = 0;
    for (std::size_t len : ranked_lengths) {
        if (total + len > L) break;
        total += len;
        ++k;
    }
    return k;
}

struct KnapsackItem {
    std::string id;
    double value = 0.0;
    std::size_t length = 1;
};

// Greedy by value density, skipping items that would exceed the budget.
inline std::vector<std::string> knapsack_select(std::vector<KnapsackItem> items, std::size_t L) {
    std::sort(items.begin(), items.end(), [](const KnapsackItem& a, const KnapsackItem& b) {
        double da = a.value / static_cast<double>(a.length);
        double db = b.value / static_cast<double>(b.length);
        if (da != db) return da > db;
        return a.id < b.id;
    });
    std::vector<std::string> selected;
    std::size_t used = 0;
    for (const auto& it : items) {
        if (used + it.length > L) continue;
        used += it.length;
        selected.push_back(it.id);
    }
    return selected;
}

// Exact optimum by subset enumeration; guarded to small instances since
// this is a test oracle. Ties resolve to the lexicographically smallest
// sorted id set.
inline std::vector<std::string> brute_force_select(const std::vector<KnapsackItem>& items,
                                                   std::size_t L) {
    if (items.size() > 22) throw SelectError("brute_force_select: instance too large for oracle");
    const std::size_t n = items.size();
    double best_value = -1.0;
    std::vector<std::string> best_set;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double value = 0.0;
        std::size_t weight = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                value += items[i].value;
                weight += items[i].length;
            }
        if (weight > L) continue;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) ids.push_back(items[i].id);
        std::sort(ids.begin(), ids.end());
        if (value > best_value + 1e-12 ||
            (std::abs(value - best_value) <= 1e-12 && ids < best_set)) {
            best_value = value;
            best_set = std::move(ids);
        }
    }
    return best_set;
}

struct BundleEntry {
    IndexedSegment segment;
    double cosine_score = 0.0;
    double rerank_score = 0.0;
};

struct ContextBundle {
    std::vector<BundleEntry> entries; // ordered by (video_id, start_s)
    std::size_t total_tokens = 0;
};

// Mean cosine of temporally adjacent selected segments within each video;
// 1.0 for bundles of one or fewer segments.
inline double coherence(const ContextBundle& bundle, const VectorIndex& index) {
    if (bundle.entries.size() <= 1) return 1.0;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 1; i < bundle.entries.size(); ++i) {
        const auto& a = bundle.entries[i - 1];
        const auto& b = bundle.entries[i];
        if (a.segment.video_id != b.segment.video_id) continue;
        const EmbeddingVector* ea = index.get(a.segment.id);
        const EmbeddingVector* eb = index.get(b.segment.id);
        if (!ea || !eb) continue;
        sum += cosine(*ea, *eb);
        ++pairs;
    }
    return pairs ? sum / static_cast<double>(pairs) : 1.0;
}

inline std::string format_timestamp(double seconds) {
    long s = static_cast<long>(seconds + 0.5);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%02ld:%02ld:%02ld", s / 3600, (s / 60) % 60, s % 60);
    return buf;
}

inline ContextBundle make_bundle(std::vector<BundleEntry> entries) {
    std::sort(entries.begin(), entries.end(), [](const BundleEntry& a, const BundleEntry& b) {
        if (a.segment.video_id != b.segment.video_id) return a.segment.video_id < b.segment.video_id;
        return a.segment.range.start_s < b.segment.range.start_s;
    });
    ContextBundle bundle;
    for (auto& e : entries) {
        bundle.total_tokens += e.segment.tokens;
        bundle.entries.push_back(std::move(e));
    }
    return bundle;
}

inline std::string assemble_context(const ContextBundle& bundle) {
    std::string out;
    for (const auto& e : bundle.entries) {
        out += "[" + format_timestamp(e.segment.range.start_s) + "–" +
               format_timestamp(e.segment.range.end_s) + "] " + e.segment.text + "\n";
    }
    return out;
}

// Full query pipeline over a sealed index and its segment metadata.
class QueryPipeline {
public:
    QueryPipeline(const VectorIndex& index, std::vector<IndexedSegment> segments,
                  const HashingEmbedder& embedder)
        : index_(index), embedder_(embedder), idf_(segments) {
        for (auto& s : segments) segments_[s.id] = std::move(s);
    }

    const IdfTable& idf() const { return idf_; }

    std::vector<Candidate> retrieve(const Query& q, std::size_t k0, bool approximate = false) const {
        auto hits = approximate ? index_.search_approximate(q.embedding, k0)
                                : index_.search(q.embedding, k0);
        std::vector<Candidate> out;
        for (const auto& h : hits) {
            auto it = segments_.find(h.id);
            if (it == segments_.end()) continue;
            Candidate c;
            c.segment = it->second;
            c.cosine_score = h.score;
            out.push_back(std::move(c));
        }
        return out;
    }

    ContextBundle run(const std::string& query_text, const BudgetConfig& cfg,
                      const RerankWeights& weights = {}, bool approximate = false) const {
        Query q = encode_query(query_text, embedder_);
        auto candidates = retrieve(q, cfg.k0, approximate);
        if (candidates.empty()) return {};
        auto ranked = rerank(std::move(candidates), query_text, idf_, weights);

        std::vector<std::size_t> selected = pick(ranked, cfg);
        ContextBundle bundle = bundle_from(ranked, selected);

        if (cfg.coherence_tau > 0.0) {
            for (std::size_t retry = 0;
                 retry < cfg.max_coherence_retries && coherence(bundle, index_) < cfg.coherence_tau;
                 ++retry) {
                if (!substitute_worst(ranked, selected, cfg)) break;
                bundle = bundle_from(ranked, selected);
            }
        }
        return bundle;
    }

private:
    std::vector<std::size_t> pick(const std::vector<Candidate>& ranked,
                                  const BudgetConfig& cfg) const {
        std::vector<std::size_t> selected;
        if (cfg.density_mode) {
            std::vector<KnapsackItem> items;
            for (const auto& c : ranked)
                items.push_back({c.segment.id, std::max(c.rerank_score, 0.0),
                                 std::max<std::size_t>(c.segment.tokens, 1)});
            auto ids = knapsack_select(std::move(items), cfg.max_tokens);
            std::set<std::string> idset(ids.begin(), ids.end());
            for (std::size_t i = 0; i < ranked.size(); ++i)
                if (idset.count(ranked[i].segment.id)) selected.push_back(i);
        } else {
            std::vector<std::size_t> lengths;
            for (const auto& c : ranked) lengths.push_back(c.segment.tokens);
            std::size_t k = budget_k_star(lengths, cfg.max_tokens);
            for (std::size_t i = 0; i < k; ++i) selected.push_back(i);
        }
        return selected;
    }

    ContextBundle bundle_from(const std::vector<Candidate>& ranked,
                              const std::vector<std::size_t>& selected) const {
        std::vector<BundleEntry> entries;
        for (std::size_t i : selected)
            entries.push_back({ranked[i].segment, ranked[i].cosine_score, ranked[i].rerank_score});
        return make_bundle(std::move(entries));
    }

    // Swap the lowest-ranked selected candidate for the next unselected
    // one that still fits the budget.
    bool substitute_worst(const std::vector<Candidate>& ranked, std::vector<std::size_t>& selected,
                          const BudgetConfig& cfg) const {
        if (selected.empty()) return false;
        std::size_t worst = *std::max_element(selected.begin(), selected.end());
        std::size_t used = 0;
        for (std::size_t i : selected)
            if (i != worst) used += ranked[i].segment.tokens;
        for (std::size_t cand = worst + 1; cand < ranked.size(); ++cand) {
            if (std::find(selected.begin(), selected.end(), cand) != selected.end()) continue;
            if (used + ranked[cand].segment.tokens > cfg.max_tokens) continue;
            selected.erase(std::find(selected.begin(), selected.end(), worst));
            selected.push_back(cand);
            return true;
        }
        return false;
    }

    const VectorIndex& index_;
    const HashingEmbedder& embedder_;
    IdfTable idf_;
    std::map<std::string, IndexedSegment> segments_;
};

} // namespace manta
