#pragma once
// Statistical text primitives: add-k n-gram language model, unigram
// entropy, and a plug-in mutual-information estimator over discrete pairs.
// All information quantities are in bits (base 2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace manta {

// Add-k smoothed n-gram model over a fixed vocabulary. The vocabulary is
// the set of distinct tokens seen in training unless given explicitly.
// An unseen context (or k = 0 with no evidence) falls back to the uniform
// distribution over the vocabulary.
class NGramLM {
public:
    NGramLM() = default;

    NGramLM(std::size_t order, double smoothing_k,
            std::vector<std::string> explicit_vocab = {})
        : order_(std::max<std::size_t>(order, 1)), k_(smoothing_k) {
        for (auto& t : explicit_vocab) vocab_.insert(std::move(t));
    }

    void train(const std::vector<std::string>& tokens) {
        for (const auto& t : tokens) vocab_.insert(t);
        if (tokens.empty()) return;
        const std::size_t ctx_len = order_ - 1;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            std::string ctx = context_key(tokens, i, ctx_len);
            auto& slot = counts_[ctx];
            slot.total += 1;
            slot.per_token[tokens[i]] += 1;
        }
    }

    std::size_t order() const { return order_; }
    double smoothing() const { return k_; }
    std::size_t vocab_size() const { return vocab_.empty() ? 1 : vocab_.size(); }

    // P(token | context tokens), context being the up-to-(n-1) preceding tokens.
    double prob(const std::string& token, const std::vector<std::string>& context) const {
        const double v = static_cast<double>(vocab_size());
        std::string ctx = tail_key(context, order_ - 1);
        auto it = counts_.find(ctx);
        double cnt = 0.0, total = 0.0;
        if (it != counts_.end()) {
            total = static_cast<double>(it->second.total);
            auto jt = it->second.per_token.find(token);
            if (jt != it->second.per_token.end()) cnt = static_cast<double>(jt->second);
        }
        if (total + k_ * v <= 0.0) return 1.0 / v;
        return (cnt + k_) / (total + k_ * v);
    }

private:
    struct ContextCounts {
        std::uint64_t total = 0;
        std::map<std::string, std::uint64_t> per_token;
    };

    static std::string tail_key(const std::vector<std::string>& ctx, std::size_t len) {
        std::string key;
        std::size_t begin = ctx.size() > len ? ctx.size() - len : 0;
        for (std::size_t i = begin; i < ctx.size(); ++i) {
            if (!key.empty()) key.push_back('\x1f');
            key += ctx[i];
        }
        return key;
    }

    static std::string context_key(const std::vector<std::string>& tokens,
                                   std::size_t pos, std::size_t len) {
        std::string key;
        std::size_t begin = pos > len ? pos - len : 0;
        for (std::size_t i = begin; i < pos; ++i) {
            if (!key.empty()) key.push_back('\x1f');
            key += tokens[i];
        }
        return key;
    }

    std::size_t order_ = 3;
    double k_ = 0.5;
    std::set<std::string> vocab_;
    std::map<std::string, ContextCounts> counts_;
};

inline NGramLM train_ngram(const std::vector<std::vector<std::string>>& history,
                           std::size_t n, double k,
                           std::vector<std::string> explicit_vocab = {}) {
    NGramLM lm(n, k, std::move(explicit_vocab));
    for (const auto& seq : history) lm.train(seq);
    return lm;
}

// Mean negative log2-probability per token of `segment` continuing
// `preceding`. Empty segments carry no surprise.
inline double novelty(const NGramLM& lm, const std::vector<std::string>& segment,
                      const std::vector<std::string>& preceding = {}) {
    if (segment.empty()) return 0.0;
    std::vector<std::string> ctx = preceding;
    double bits = 0.0;
    for (const auto& tok : segment) {
        double p = lm.prob(tok, ctx);
        p = std::max(p, 1e-300);
        bits += -std::log2(p);
        ctx.push_back(tok);
    }
    return bits / static_cast<double>(segment.size());
}

// Shannon entropy of the segment's empirical unigram distribution.
inline double token_entropy(const std::vector<std::string>& tokens) {
    if (tokens.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : tokens) counts[t] += 1;
    const double n = static_cast<double>(tokens.size());
    double h = 0.0;
    for (const auto& [tok, c] : counts) {
        double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return std::max(h, 0.0);
}

// Plug-in mutual information of the empirical joint of (x, y) pairs.
inline double plugin_mi(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) return 0.0;
    std::map<std::pair<std::string, std::string>, std::size_t> joint;
    std::map<std::string, std::size_t> mx, my;
    for (const auto& p : pairs) {
        joint[p] += 1;
        mx[p.first] += 1;
        my[p.second] += 1;
    }
    const double n = static_cast<double>(pairs.size());
    double mi = 0.0;
    for (const auto& [xy, c] : joint) {
        double pxy = static_cast<double>(c) / n;
        double px = static_cast<double>(mx[xy.first]) / n;
        double py = static_cast<double>(my[xy.second]) / n;
        mi += pxy * std::log2(pxy / (px * py));
    }
    return std::max(mi, 0.0);
}

} // namespace manta
