#pragma once
// Deterministic feature-hashing text embedder. Token unigrams and bigrams
// are hashed (FNV-1a 64) into d signed buckets and the result is
// L2-normalized. Empty text maps to the zero vector, which is flagged
// non-unit and excluded from similarity.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "manta/tokenizer.hpp"

namespace manta {

constexpr std::size_t kDefaultEmbedDim = 1024;

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }

    double norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }

    bool is_unit() const { return std::abs(norm() - 1.0) < 1e-6; }
    bool is_zero() const { return norm() < 1e-12; }

    void normalize() {
        double n = norm();
        if (n < 1e-12) return;
        for (double& v : values) v /= n;
    }
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size() && i < b.values.size(); ++i)
        s += a.values[i] * b.values[i];
    return s;
}

// Cosine similarity; zero vectors have similarity 0 to everything.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return dot(a, b) / (na * nb);
}

inline EmbeddingVector add_scaled(EmbeddingVector acc, const EmbeddingVector& v, double w) {
    if (acc.values.size() < v.values.size()) acc.values.resize(v.values.size(), 0.0);
    for (std::size_t i = 0; i < v.values.size(); ++i) acc.values[i] += w * v.values[i];
    return acc;
}

namespace detail {
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 1469598103934665603ull) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}
} // namespace detail

class HashingEmbedder {
public:
    explicit HashingEmbedder(std::size_t dim = kDefaultEmbedDim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }

    EmbeddingVector embed(std::string_view text) const {
        EmbeddingVector e;
        e.values.assign(dim_, 0.0);
        auto toks = tokenize(text);
        auto hit = [&](std::string_view feat) {
            std::uint64_t h = detail::fnv1a64(feat);
            std::size_t bucket = static_cast<std::size_t>(h % dim_);
            double sign = ((h >> 63) & 1u) ? -1.0 : 1.0;
            e.values[bucket] += sign;
        };
        for (std::size_t i = 0; i < toks.size(); ++i) {
            hit(toks[i]);
            if (i + 1 < toks.size()) hit(toks[i] + "\x1f" + toks[i + 1]);
        }
        e.normalize();
        return e;
    }

private:
    std::size_t dim_;
};

} // namespace manta
