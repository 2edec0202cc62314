#pragma once
// Flat key-value pipeline configuration. Every tunable default named by
// the engine lives here so one file drives the whole pipeline.
//
// File syntax: one `key = value` per line, '#' starts a comment.

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "manta/corpus.hpp"
#include "manta/dedup.hpp"
#include "manta/fusion.hpp"
#include "manta/index.hpp"
#include "manta/scoring.hpp"
#include "manta/select.hpp"
#include "manta/asr_refine.hpp"

namespace manta {

struct PipelineConfig {
    std::size_t embed_dim = kDefaultEmbedDim;
    std::size_t ngram_order = 3;
    double ngram_k = 0.5;

    ScaleConfig scales;          // level durations
    DensityWeights density;      // alpha, beta, gamma
    DedupConfig dedup;           // tau_dedup, tau_length, eta, lambda
    FusionConfig fusion;         // mixing a,b,c,d + top m
    ContextWindowConfig context; // w, decay, global weight
    RerankWeights rerank_w;      // w_cos, w_lex
    BudgetConfig budget;         // L, k0, coherence tau, mode
    RefineConfig asr;            // tau_conf, gap_s, snap tolerance
};

inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    auto num = [&](const char* key, double& target) {
        auto it = kv.find(key);
        if (it != kv.end()) target = std::stod(it->second);
    };
    auto integer = [&](const char* key, std::size_t& target) {
        auto it = kv.find(key);
        if (it != kv.end()) target = static_cast<std::size_t>(std::stoull(it->second));
    };

    integer("embed_dim", cfg.embed_dim);
    integer("ngram_order", cfg.ngram_order);
    num("ngram_k", cfg.ngram_k);

    if (auto it = kv.find("scale_durations"); it != kv.end()) {
        cfg.scales.level_durations.clear();
        std::istringstream ss(it->second);
        std::string part;
        while (std::getline(ss, part, ',')) cfg.scales.level_durations.push_back(std::stod(part));
        cfg.scales.validate();
    }

    num("alpha", cfg.density.alpha);
    num("beta", cfg.density.beta);
    num("gamma", cfg.density.gamma);

    num("tau_dedup", cfg.dedup.tau_dedup);
    integer("tau_length", cfg.dedup.tau_length);
    num("eta", cfg.dedup.eta);
    num("lambda", cfg.dedup.lambda);

    num("mix_caption", cfg.fusion.mix_caption);
    num("mix_transcript", cfg.fusion.mix_transcript);
    num("mix_children", cfg.fusion.mix_children);
    num("mix_parent", cfg.fusion.mix_parent);
    integer("top_m_children", cfg.fusion.top_m_children);
    num("attention_temperature", cfg.fusion.attention_temperature);

    integer("context_window", cfg.context.window);
    num("context_decay", cfg.context.neighbor_decay);
    num("global_weight", cfg.context.global_weight);

    num("rerank_w_cos", cfg.rerank_w.w_cos);
    num("rerank_w_lex", cfg.rerank_w.w_lex);

    integer("budget_tokens", cfg.budget.max_tokens);
    integer("k0", cfg.budget.k0);
    num("coherence_tau", cfg.budget.coherence_tau);
    if (auto it = kv.find("mode"); it != kv.end()) {
        if (it->second == "density") cfg.budget.density_mode = true;
        else if (it->second == "rank") cfg.budget.density_mode = false;
        else throw std::invalid_argument("config: mode must be 'rank' or 'density'");
    }

    num("tau_conf", cfg.asr.tau_conf);
    num("gap_s", cfg.asr.gap_s);
    num("snap_tolerance_s", cfg.asr.snap_tolerance_s);
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config " + path);
    return parse_config(f);
}

} // namespace manta
