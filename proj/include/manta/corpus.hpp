#pragma once
// Segment corpus: JSONL ingestion, the multi-scale hierarchy, and its
// structural validation.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace manta {

using json = nlohmann::json;

struct TimeRange {
    double start_s = 0.0;
    double end_s = 0.0;

    double duration() const { return end_s - start_s; }
    bool valid() const { return start_s >= 0.0 && end_s > start_s; }
};

enum class Modality { visual, audio };

inline std::string to_string(Modality m) { return m == Modality::visual ? "visual" : "audio"; }

inline std::optional<Modality> modality_from_string(const std::string& s) {
    if (s == "visual") return Modality::visual;
    if (s == "audio") return Modality::audio;
    return std::nullopt;
}

struct ModalityText {
    Modality modality = Modality::visual;
    std::string text;
    double confidence = 1.0;
};

struct Segment {
    std::string id;
    std::string video_id;
    int level = 1;
    TimeRange range;
    std::vector<ModalityText> texts;
    std::string fused_text; // empty until fusion

    const std::string* text_for(Modality m) const {
        for (const auto& t : texts)
            if (t.modality == m) return &t.text;
        return nullptr;
    }

    // All modality texts joined, visual first.
    std::string combined_text() const {
        std::string out;
        for (Modality m : {Modality::visual, Modality::audio}) {
            if (const std::string* t = text_for(m)) {
                if (!out.empty()) out += " ";
                out += *t;
            }
        }
        return out;
    }
};

struct ScaleConfig {
    std::vector<double> level_durations = {3.0, 30.0, 180.0};
    double tolerance = 0.5; // slack on leaf durations, seconds

    std::size_t levels() const { return level_durations.size(); }

    void validate() const {
        if (level_durations.empty()) throw std::invalid_argument("scale config: no levels");
        for (std::size_t i = 1; i < level_durations.size(); ++i)
            if (level_durations[i] < level_durations[i - 1])
                throw std::invalid_argument("scale config: durations must be non-decreasing");
    }
};

struct SegmentHierarchy {
    std::vector<std::vector<Segment>> levels; // levels[0] = level 1
    std::map<std::string, std::vector<std::string>> child_map;
    std::map<std::string, std::string> parent_map;

    const Segment* find(const std::string& id) const {
        for (const auto& lv : levels)
            for (const auto& s : lv)
                if (s.id == id) return &s;
        return nullptr;
    }

    Segment* find(const std::string& id) {
        for (auto& lv : levels)
            for (auto& s : lv)
                if (s.id == id) return &s;
        return nullptr;
    }

    std::size_t total_segments() const {
        std::size_t n = 0;
        for (const auto& lv : levels) n += lv.size();
        return n;
    }
};

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string make_segment_id(const std::string& video_id, int level, std::size_t index) {
    return video_id + ":" + std::to_string(level) + ":" + std::to_string(index);
}

// Parse segment-record JSONL. Records sharing (video_id, level, range) are
// merged into one Segment. Ids are position-derived after sorting by
// start_s within (video_id, level). Malformed lines and overlapping
// same-level ranges are hard errors.
inline std::vector<Segment> ingest_segments(std::istream& in) {
    struct Key {
        std::string video_id;
        int level;
        double start_s, end_s;
        bool operator<(const Key& o) const {
            return std::tie(video_id, level, start_s, end_s) <
                   std::tie(o.video_id, o.level, o.start_s, o.end_s);
        }
    };
    std::map<Key, std::vector<ModalityText>> merged;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IngestError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        auto fail = [&](const std::string& why) -> IngestError {
            return IngestError("line " + std::to_string(lineno) + ": " + why);
        };
        if (!j.is_object()) throw fail("record is not an object");
        for (const char* req : {"video_id", "level", "start_s", "end_s", "modality", "text"})
            if (!j.contains(req)) throw fail(std::string("missing field '") + req + "'");
        if (!j["video_id"].is_string() || !j["text"].is_string() || !j["modality"].is_string() ||
            !j["level"].is_number_integer() || !j["start_s"].is_number() || !j["end_s"].is_number())
            throw fail("field has wrong type");
        ModalityText mt;
        auto mod = modality_from_string(j["modality"].get<std::string>());
        if (!mod) throw fail("unknown modality '" + j["modality"].get<std::string>() + "'");
        mt.modality = *mod;
        mt.text = j["text"].get<std::string>();
        if (mt.text.empty()) throw fail("empty text");
        mt.confidence = j.value("confidence", 1.0);
        if (mt.confidence < 0.0 || mt.confidence > 1.0) throw fail("confidence out of [0,1]");
        Key key{j["video_id"].get<std::string>(), j["level"].get<int>(),
                j["start_s"].get<double>(), j["end_s"].get<double>()};
        if (key.level < 1) throw fail("level must be >= 1");
        if (!(key.end_s > key.start_s) || key.start_s < 0.0) throw fail("invalid time range");
        merged[key].push_back(std::move(mt));
    }

    // Overlap check within (video_id, level); map iteration is already
    // sorted by start_s within each group.
    std::vector<std::string> overlaps;
    const Key* prev = nullptr;
    for (const auto& [key, texts] : merged) {
        if (prev && prev->video_id == key.video_id && prev->level == key.level &&
            key.start_s < prev->end_s - 1e-9) {
            std::ostringstream os;
            os << key.video_id << " level " << key.level << " [" << prev->start_s << ","
               << prev->end_s << ") overlaps [" << key.start_s << "," << key.end_s << ")";
            overlaps.push_back(os.str());
        }
        prev = &key;
    }
    if (!overlaps.empty()) {
        std::string msg = "overlapping same-level ranges:";
        for (const auto& o : overlaps) msg += "\n  " + o;
        throw IngestError(msg);
    }

    std::vector<Segment> out;
    std::map<std::pair<std::string, int>, std::size_t> counters;
    for (auto& [key, texts] : merged) {
        Segment s;
        s.video_id = key.video_id;
        s.level = key.level;
        s.range = {key.start_s, key.end_s};
        std::stable_sort(texts.begin(), texts.end(), [](const ModalityText& a, const ModalityText& b) {
            return static_cast<int>(a.modality) < static_cast<int>(b.modality);
        });
        s.texts = std::move(texts);
        std::size_t& idx = counters[{key.video_id, key.level}];
        s.id = make_segment_id(key.video_id, key.level, idx++);
        out.push_back(std::move(s));
    }
    return out;
}

inline void serialize_segments(const std::vector<Segment>& segments, std::ostream& out) {
    for (const auto& s : segments) {
        for (const auto& t : s.texts) {
            json j{{"video_id", s.video_id}, {"level", s.level},
                   {"start_s", s.range.start_s}, {"end_s", s.range.end_s},
                   {"modality", to_string(t.modality)}, {"text", t.text},
                   {"confidence", t.confidence}};
            out << j.dump() << "\n";
        }
    }
}

// Build levels 2..L by grouping fixed multiples of children. The last
// group at each level may be partial; parent texts stay empty for the
// fusion pass.
inline SegmentHierarchy build_hierarchy(const std::vector<Segment>& micro, const ScaleConfig& cfg) {
    cfg.validate();
    SegmentHierarchy h;
    h.levels.assign(cfg.levels(), {});

    // Partition by video, preserving temporal order.
    std::map<std::string, std::vector<Segment>> per_video;
    for (const auto& s : micro) {
        if (s.level != 1) throw std::invalid_argument("build_hierarchy: segment " + s.id + " is not level 1");
        per_video[s.video_id].push_back(s);
    }
    for (auto& [vid, segs] : per_video) {
        std::stable_sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) {
            return a.range.start_s < b.range.start_s;
        });
        for (std::size_t i = 1; i < segs.size(); ++i) {
            double gap = segs[i].range.start_s - segs[i - 1].range.end_s;
            if (std::abs(gap) > 1e-6) {
                std::ostringstream os;
                os << "non-contiguous micro coverage in " << vid << ": gap of " << gap
                   << " s at t=" << segs[i - 1].range.end_s;
                throw std::invalid_argument(os.str());
            }
        }
        std::size_t idx = 0;
        for (auto& s : segs) {
            s.id = make_segment_id(vid, 1, idx++);
            h.levels[0].push_back(s);
        }
    }

    for (std::size_t lv = 1; lv < cfg.levels(); ++lv) {
        std::size_t multiple = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.level_durations[lv] / cfg.level_durations[lv - 1])));
        std::map<std::string, std::size_t> counters;
        std::vector<Segment>& children = h.levels[lv - 1];
        std::size_t i = 0;
        while (i < children.size()) {
            const std::string vid = children[i].video_id;
            std::size_t j = i;
            Segment parent;
            parent.video_id = vid;
            parent.level = static_cast<int>(lv + 1);
            parent.range = children[i].range;
            std::vector<std::string> child_ids;
            while (j < children.size() && children[j].video_id == vid && j - i < multiple) {
                parent.range.end_s = children[j].range.end_s;
                child_ids.push_back(children[j].id);
                ++j;
            }
            parent.id = make_segment_id(vid, parent.level, counters[vid]++);
            for (const auto& cid : child_ids) h.parent_map[cid] = parent.id;
            h.child_map[parent.id] = std::move(child_ids);
            h.levels[lv].push_back(std::move(parent));
            i = j;
        }
    }
    return h;
}

struct HierarchyIssue {
    enum class Kind { gap, overlap, orphan, map_inconsistency } kind;
    std::string message;
};

inline const char* to_string(HierarchyIssue::Kind k) {
    switch (k) {
        case HierarchyIssue::Kind::gap: return "gap";
        case HierarchyIssue::Kind::overlap: return "overlap";
        case HierarchyIssue::Kind::orphan: return "orphan";
        case HierarchyIssue::Kind::map_inconsistency: return "map_inconsistency";
    }
    return "?";
}

// Report-only structural check: child ranges must tile each parent's range
// and child_map/parent_map must agree.
inline std::vector<HierarchyIssue> validate_hierarchy(const SegmentHierarchy& h) {
    std::vector<HierarchyIssue> issues;
    auto add = [&](HierarchyIssue::Kind k, const std::string& msg) {
        issues.push_back({k, msg});
    };

    for (const auto& [pid, child_ids] : h.child_map) {
        const Segment* parent = h.find(pid);
        if (!parent) {
            add(HierarchyIssue::Kind::orphan, "child_map parent " + pid + " not in corpus");
            continue;
        }
        double cursor = parent->range.start_s;
        for (const auto& cid : child_ids) {
            auto pit = h.parent_map.find(cid);
            if (pit == h.parent_map.end() || pit->second != pid)
                add(HierarchyIssue::Kind::map_inconsistency,
                    "child " + cid + " of " + pid + " missing or wrong in parent_map");
            const Segment* child = h.find(cid);
            if (!child) {
                add(HierarchyIssue::Kind::orphan, "child " + cid + " not in corpus");
                continue;
            }
            if (child->range.start_s > cursor + 1e-6)
                add(HierarchyIssue::Kind::gap,
                    "gap in " + pid + " at " + std::to_string(cursor) + " s");
            if (child->range.start_s < cursor - 1e-6)
                add(HierarchyIssue::Kind::overlap,
                    "overlap in " + pid + " at " + std::to_string(child->range.start_s) + " s");
            cursor = child->range.end_s;
        }
        if (std::abs(cursor - parent->range.end_s) > 1e-6)
            add(HierarchyIssue::Kind::gap,
                "children of " + pid + " end at " + std::to_string(cursor) + " s, parent ends at " +
                    std::to_string(parent->range.end_s) + " s");
    }

    for (const auto& [cid, pid] : h.parent_map) {
        auto it = h.child_map.find(pid);
        bool listed = false;
        if (it != h.child_map.end())
            listed = std::find(it->second.begin(), it->second.end(), cid) != it->second.end();
        if (!listed)
            add(HierarchyIssue::Kind::map_inconsistency,
                "parent_map entry " + cid + " -> " + pid + " not mirrored in child_map");
    }
    return issues;
}

} // namespace manta
