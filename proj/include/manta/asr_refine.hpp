#pragma once
// Transcript refinement: confidence filtering, gap/punctuation
// segmentation into semantic units, and snapping of unit boundaries to
// nearby shot transitions. The remaining enrichment stages (rescoring,
// NER, homophones, diarization, terminology) are pluggable hooks that
// default to identity.

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "manta/corpus.hpp"

namespace manta {

struct Utterance {
    std::string text;
    double start_s = 0.0;
    double end_s = 0.0;
    double confidence = 1.0;
    std::optional<std::string> speaker;
};

struct TranscriptChunk {
    std::string text;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct RefineConfig {
    double tau_conf = 0.5;
    double gap_s = 1.5;
    double snap_tolerance_s = 1.0;
};

using ChunkHook = std::function<std::vector<TranscriptChunk>(std::vector<TranscriptChunk>)>;

struct RefineHooks {
    ChunkHook lm_rescoring;
    ChunkHook named_entities;
    ChunkHook homophones;
    ChunkHook diarization;
    ChunkHook terminology;
};

inline bool ends_sentence(const std::string& text) {
    for (auto it = text.rbegin(); it != text.rend(); ++it) {
        if (*it == ' ' || *it == '\t') continue;
        return *it == '.' || *it == '!' || *it == '?';
    }
    return false;
}

inline std::vector<TranscriptChunk> refine_transcript(const std::vector<Utterance>& utterances,
                                                      const std::vector<double>& shot_transitions,
                                                      const RefineConfig& cfg,
                                                      const RefineHooks& hooks = {}) {
    // 1. confidence filter
    std::vector<const Utterance*> kept;
    for (const auto& u : utterances)
        if (u.confidence > cfg.tau_conf) kept.push_back(&u);

    // 2. merge into semantic units: split on sentence-final punctuation or
    //    an inter-utterance gap of at least gap_s
    std::vector<TranscriptChunk> chunks;
    TranscriptChunk cur;
    bool open = false;
    auto close = [&]() {
        if (open && !cur.text.empty()) chunks.push_back(cur);
        open = false;
    };
    for (const Utterance* u : kept) {
        if (open && u->start_s - cur.end_s >= cfg.gap_s) close();
        if (!open) {
            cur = {u->text, u->start_s, u->end_s};
            open = true;
        } else {
            cur.text += " " + u->text;
            cur.end_s = u->end_s;
        }
        if (ends_sentence(u->text)) close();
    }
    close();

    // 3. snap boundaries to the nearest shot transition within tolerance,
    //    keeping chunks non-degenerate and ordered
    auto snap = [&](double t) {
        double best = t, best_d = cfg.snap_tolerance_s;
        for (double shot : shot_transitions) {
            double d = std::abs(shot - t);
            if (d <= best_d) {
                best_d = d;
                best = shot;
            }
        }
        return best;
    };
    if (!shot_transitions.empty()) {
        for (auto& c : chunks) {
            double s = snap(c.start_s), e = snap(c.end_s);
            if (e > s) {
                c.start_s = s;
                c.end_s = e;
            }
        }
        for (std::size_t i = 1; i < chunks.size(); ++i)
            if (chunks[i].start_s < chunks[i - 1].end_s) chunks[i].start_s = chunks[i - 1].end_s;
        chunks.erase(std::remove_if(chunks.begin(), chunks.end(),
                                    [](const TranscriptChunk& c) { return c.end_s <= c.start_s; }),
                     chunks.end());
    }

    // 4-10. pluggable enrichment hooks, identity by default
    for (const ChunkHook* hook : {&hooks.lm_rescoring, &hooks.named_entities, &hooks.homophones,
                                  &hooks.diarization, &hooks.terminology})
        if (*hook) chunks = (*hook)(std::move(chunks));
    return chunks;
}

// Utterance JSONL: {"text","start_s","end_s","confidence","speaker"?}.
inline std::vector<Utterance> load_utterances(std::istream& in) {
    std::vector<Utterance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IngestError("utterance line " + std::to_string(lineno) + ": " + e.what());
        }
        Utterance u;
        u.text = j.at("text").get<std::string>();
        u.start_s = j.at("start_s").get<double>();
        u.end_s = j.at("end_s").get<double>();
        u.confidence = j.value("confidence", 1.0);
        if (j.contains("speaker")) u.speaker = j["speaker"].get<std::string>();
        out.push_back(std::move(u));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Utterance& a, const Utterance& b) { return a.start_s < b.start_s; });
    return out;
}

// Shot-transition sidecar JSONL: {"video_id","t_s"}; returns times for the
// requested video.
inline std::vector<double> load_shot_transitions(std::istream& in, const std::string& video_id) {
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line);
        if (j.at("video_id").get<std::string>() == video_id) out.push_back(j.at("t_s").get<double>());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Emit refined chunks as audio-modality segment records.
inline void chunks_to_segment_jsonl(const std::vector<TranscriptChunk>& chunks,
                                    const std::string& video_id, std::ostream& out) {
    for (const auto& c : chunks) {
        nlohmann::json j{{"video_id", video_id}, {"level", 1},      {"start_s", c.start_s},
                         {"end_s", c.end_s},     {"modality", "audio"}, {"text", c.text},
                         {"confidence", 1.0}};
        out << j.dump() << "\n";
    }
}

} // namespace manta
