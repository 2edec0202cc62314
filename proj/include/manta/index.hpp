#pragma once
// Similarity index: exact cosine search, an optional small-world graph for
// approximate search, checksummed binary persistence, and the contextual /
// global embedding constructions.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "manta/embed.hpp"

namespace manta {

struct SearchHit {
    std::string id;
    double score = 0.0;
};

struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFFu));
}

template <typename T>
T get_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

} // namespace detail

// Single-layer navigable small-world graph over the stored vectors.
// Insertion connects each node to its nearest predecessors found by beam
// search; queries reuse the same beam search.
struct GraphParams {
    std::size_t max_neighbors = 16;   // M
    std::size_t ef_construction = 64; // build beam width
    std::size_t ef_search = 256;      // query beam width
};

class VectorIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    explicit VectorIndex(std::size_t dim = kDefaultEmbedDim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }

    void add(const std::string& id, const EmbeddingVector& vec) {
        if (vec.dim() != dim_) throw IndexError("dimension mismatch for id " + id);
        if (by_id_.count(id)) throw IndexError("duplicate id " + id);
        by_id_[id] = ids_.size();
        ids_.push_back(id);
        vectors_.push_back(vec);
        graph_.clear(); // stale after mutation
    }

    const EmbeddingVector* get(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &vectors_[it->second];
    }

    const std::vector<std::string>& ids() const { return ids_; }

    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const {
        if (k == 0 || ids_.empty()) return {};
        std::vector<SearchHit> hits;
        hits.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i)
            hits.push_back({ids_[i], cosine(query, vectors_[i])});
        rank(hits, k);
        return hits;
    }

    void build_graph(const GraphParams& params = {}) {
        params_ = params;
        graph_.assign(ids_.size(), {});
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (i == 0) continue;
            auto near = beam_search(vectors_[i], params_.ef_construction, i);
            std::size_t m = std::min(params_.max_neighbors, near.size());
            for (std::size_t j = 0; j < m; ++j) {
                link(i, near[j].second);
                link(near[j].second, i);
            }
        }
    }

    bool has_graph() const { return !graph_.empty(); }

    std::vector<SearchHit> search_approximate(const EmbeddingVector& query, std::size_t k) const {
        if (k == 0 || ids_.empty()) return {};
        if (graph_.empty()) throw IndexError("approximate search requested but graph not built");
        auto near = beam_search(query, std::max(params_.ef_search, k), ids_.size());
        std::vector<SearchHit> hits;
        for (const auto& [d, idx] : near) hits.push_back({ids_[idx], d});
        rank(hits, k);
        return hits;
    }

    void save(std::ostream& out) const {
        std::vector<std::uint8_t> payload;
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            detail::put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(ids_[i].size()));
            payload.insert(payload.end(), ids_[i].begin(), ids_[i].end());
            for (double v : vectors_[i].values) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof(bits));
                detail::put_le<std::uint64_t>(payload, bits);
            }
        }
        std::vector<std::uint8_t> header;
        header.insert(header.end(), kMagic, kMagic + 8);
        detail::put_le<std::uint32_t>(header, kFormatVersion);
        detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(dim_));
        detail::put_le<std::uint64_t>(header, static_cast<std::uint64_t>(ids_.size()));
        detail::put_le<std::uint32_t>(header, detail::crc32(payload.data(), payload.size()));
        out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IndexError("cannot open " + path + " for writing");
        save(f);
    }

    static VectorIndex load(std::istream& in) {
        std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
        constexpr std::size_t header_len = 8 + 4 + 4 + 8 + 4;
        if (raw.size() < header_len || std::memcmp(raw.data(), kMagic, 8) != 0)
            throw IndexError("bad magic: not an index file");
        const std::uint8_t* p = raw.data() + 8;
        auto version = detail::get_le<std::uint32_t>(p); p += 4;
        if (version != kFormatVersion)
            throw IndexError("unsupported index version " + std::to_string(version));
        auto dim = detail::get_le<std::uint32_t>(p); p += 4;
        auto count = detail::get_le<std::uint64_t>(p); p += 8;
        auto crc = detail::get_le<std::uint32_t>(p); p += 4;
        const std::uint8_t* payload = raw.data() + header_len;
        std::size_t payload_len = raw.size() - header_len;
        if (detail::crc32(payload, payload_len) != crc)
            throw IndexError("checksum mismatch: index file corrupt or truncated");

        VectorIndex idx(dim);
        const std::uint8_t* q = payload;
        const std::uint8_t* end = payload + payload_len;
        for (std::uint64_t i = 0; i < count; ++i) {
            if (q + 4 > end) throw IndexError("truncated payload");
            auto id_len = detail::get_le<std::uint32_t>(q); q += 4;
            if (q + id_len + 8ull * dim > end) throw IndexError("truncated payload");
            std::string id(reinterpret_cast<const char*>(q), id_len); q += id_len;
            EmbeddingVector v;
            v.values.resize(dim);
            for (std::uint32_t d = 0; d < dim; ++d) {
                auto bits = detail::get_le<std::uint64_t>(q); q += 8;
                std::memcpy(&v.values[d], &bits, sizeof(double));
            }
            idx.add(id, v);
        }
        return idx;
    }

    static VectorIndex load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IndexError("cannot open " + path);
        return load(f);
    }

private:
    static constexpr std::uint8_t kMagic[8] = {'M', 'A', 'N', 'T', 'A', 'I', 'D', 'X'};

    static void rank(std::vector<SearchHit>& hits, std::size_t k) {
        std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        if (hits.size() > k) hits.resize(k);
    }

    void link(std::size_t from, std::size_t to) {
        auto& nbrs = graph_[from];
        if (std::find(nbrs.begin(), nbrs.end(), to) != nbrs.end()) return;
        nbrs.push_back(to);
        if (nbrs.size() > 2 * params_.max_neighbors) {
            std::sort(nbrs.begin(), nbrs.end(), [&](std::size_t a, std::size_t b) {
                return cosine(vectors_[from], vectors_[a]) > cosine(vectors_[from], vectors_[b]);
            });
            nbrs.resize(2 * params_.max_neighbors);
        }
    }

    // Best-first beam search over nodes [0, limit); returns up to ef hits
    // sorted by descending similarity.
    std::vector<std::pair<double, std::size_t>> beam_search(const EmbeddingVector& query,
                                                            std::size_t ef, std::size_t limit) const {
        std::vector<std::pair<double, std::size_t>> result;
        if (limit == 0) return result;
        std::set<std::size_t> visited;
        // max-heap of candidates by similarity
        std::priority_queue<std::pair<double, std::size_t>> candidates;
        // min-heap of current best ef
        std::priority_queue<std::pair<double, std::size_t>,
                            std::vector<std::pair<double, std::size_t>>,
                            std::greater<>> best;
        auto consider = [&](std::size_t idx) {
            if (!visited.insert(idx).second) return;
            double d = cosine(query, vectors_[idx]);
            candidates.push({d, idx});
            best.push({d, idx});
            if (best.size() > ef) best.pop();
        };
        // spread entry points protect against a bad region around any
        // single seed on a flat (single-layer) graph
        std::size_t entries = std::min<std::size_t>(limit, 8);
        for (std::size_t e = 0; e < entries; ++e) consider(e * limit / entries);
        while (!candidates.empty()) {
            auto [d, idx] = candidates.top();
            candidates.pop();
            if (best.size() >= ef && d < best.top().first) break;
            if (idx < graph_.size())
                for (std::size_t nb : graph_[idx])
                    if (nb < limit) consider(nb);
        }
        while (!best.empty()) {
            result.push_back(best.top());
            best.pop();
        }
        std::sort(result.begin(), result.end(), [](const auto& a, const auto& b) {
            return a.first > b.first;
        });
        return result;
    }

    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::map<std::string, std::size_t> by_id_;
    std::vector<std::vector<std::size_t>> graph_;
    GraphParams params_;
};

struct ContextWindowConfig {
    std::size_t window = 2;
    double neighbor_decay = 0.5;
    double global_weight = 0.25;
};

// Enrich the k-th embedding of an ordered run with decayed neighbors and
// the global video vector, then renormalize.
inline EmbeddingVector contextual_embedding(std::size_t k,
                                            const std::vector<EmbeddingVector>& ordered,
                                            const ContextWindowConfig& cfg,
                                            const EmbeddingVector& global) {
    EmbeddingVector e = ordered.at(k);
    for (std::size_t j = 0; j < ordered.size(); ++j) {
        if (j == k) continue;
        std::size_t dist = j > k ? j - k : k - j;
        if (dist > cfg.window) continue;
        double w = 1.0;
        for (std::size_t d = 0; d < dist; ++d) w *= cfg.neighbor_decay;
        e = add_scaled(std::move(e), ordered[j], w);
    }
    if (cfg.global_weight > 0.0 && !global.values.empty())
        e = add_scaled(std::move(e), global, cfg.global_weight);
    e.normalize();
    return e;
}

// Normalized mean of macro-level embeddings.
inline EmbeddingVector global_embedding(const std::vector<EmbeddingVector>& macro) {
    if (macro.empty()) throw IndexError("global embedding of empty set");
    EmbeddingVector g;
    g.values.assign(macro.front().dim(), 0.0);
    for (const auto& e : macro) g = add_scaled(std::move(g), e, 1.0 / static_cast<double>(macro.size()));
    g.normalize();
    return g;
}

// External-embedding JSONL: {"id": str, "vec": [float...]} per line.
inline std::map<std::string, EmbeddingVector> load_external_embeddings(std::istream& in) {
    std::map<std::string, EmbeddingVector> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IndexError("embeddings line " + std::to_string(lineno) + ": " + e.what());
        }
        EmbeddingVector v;
        v.values = j.at("vec").get<std::vector<double>>();
        v.normalize();
        out[j.at("id").get<std::string>()] = std::move(v);
    }
    return out;
}

} // namespace manta
