// Acceptance gate: ten criteria, one pass/fail line each, nonzero exit on
// any failure. Tolerances are pinned here and must not be loosened.

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include "manta/align.hpp"
#include "manta/harness.hpp"

using namespace manta;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int number, const char* name, bool ok, const std::string& detail) {
    std::printf("criterion %2d %-28s %s  (%s)\n", number, name, ok ? "PASS" : "FAIL",
                detail.c_str());
    if (!ok) ++failures;
}

double elapsed_s(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(d);
    for (auto& x : v) x = n(rng);
    return v;
}

// --- criterion 1: greedy knapsack vs exact oracle ---------------------------
void criterion_knapsack() {
    auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    bool ok = true;
    std::string why = "200 instances";
    for (int trial = 0; trial < 200 && ok; ++trial) {
        std::size_t n = 2 + rng() % 14; // n <= 15
        std::vector<KnapsackItem> items;
        double max_value = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            KnapsackItem it{"i" + std::to_string(i), val(rng), 1 + rng() % 10};
            max_value = std::max(max_value, it.value);
            items.push_back(it);
        }
        std::size_t L = 1 + rng() % 40;
        auto value_of = [&](const std::vector<std::string>& ids) {
            double v = 0.0;
            for (const auto& id : ids)
                for (const auto& it : items)
                    if (it.id == id) v += it.value;
            return v;
        };
        double greedy = value_of(knapsack_select(items, L));
        double opt = value_of(brute_force_select(items, L));
        if (greedy < opt - max_value - 1e-9) {
            ok = false;
            why = "additive bound violated at trial " + std::to_string(trial);
        }
        auto unit = items;
        for (auto& it : unit) it.length = 1;
        if (std::abs(value_of(knapsack_select(unit, L)) - value_of(brute_force_select(unit, L))) >
            1e-9) {
            ok = false;
            why = "unit-length greedy != OPT at trial " + std::to_string(trial);
        }
    }
    double dt = elapsed_s(t0);
    if (dt >= 10.0) {
        ok = false;
        why = "runtime " + std::to_string(dt) + " s >= 10 s";
    }
    report(1, "knapsack oracle", ok, why + ", " + std::to_string(dt) + " s");
}

// --- criterion 2: k* maximality ---------------------------------------------
void criterion_k_star() {
    std::mt19937_64 rng(102);
    bool ok = true;
    std::string why = "1000 ranked lists";
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        std::vector<std::size_t> lengths;
        std::size_t n = 1 + rng() % 30;
        for (std::size_t i = 0; i < n; ++i) lengths.push_back(1 + rng() % 100);
        std::size_t L = rng() % 600;
        std::size_t k = budget_k_star(lengths, L);
        std::size_t total = 0;
        for (std::size_t i = 0; i < k; ++i) total += lengths[i];
        if (total > L) {
            ok = false;
            why = "top-k* exceeds budget at trial " + std::to_string(trial);
        }
        if (k < lengths.size() && total + lengths[k] <= L) {
            ok = false;
            why = "k* not maximal at trial " + std::to_string(trial);
        }
    }
    report(2, "k* contract", ok, why);
}

// --- criterion 3: loss floor and gradients ----------------------------------
void criterion_loss() {
    std::mt19937_64 rng(103);
    bool ok = true;
    std::string why;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        std::size_t b = 1 + rng() % 6;
        auto params = ProjectionParams::random_init(10, 6, rng());
        AlignBatch batch;
        for (std::size_t i = 0; i < b; ++i)
            batch.pairs.emplace_back(random_vec(rng, 10), random_vec(rng, 10));
        double loss = contrastive_loss(batch, params, 0.5).loss;
        if (loss < static_cast<double>(b) * std::log(2.0) - 1e-9) {
            ok = false;
            why = "loss below batch*ln2 at trial " + std::to_string(trial);
        }
    }
    for (int trial = 0; trial < 5 && ok; ++trial) {
        auto params = ProjectionParams::random_init(8, 4, rng());
        AlignBatch single;
        single.pairs.emplace_back(random_vec(rng, 8), random_vec(rng, 8));
        if (std::abs(contrastive_loss(single, params, 1.0).loss - std::log(2.0)) > 1e-9) {
            ok = false;
            why = "single-pair loss != ln 2";
        }
    }
    double worst = 0.0;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        auto params = ProjectionParams::random_init(6, 4, rng());
        AlignBatch batch;
        std::size_t b = 2 + rng() % 4;
        for (std::size_t i = 0; i < b; ++i)
            batch.pairs.emplace_back(random_vec(rng, 6), random_vec(rng, 6));
        worst = std::max(worst, grad_check(params, batch, 0.7, 1e-5));
    }
    if (ok && worst >= 1e-4) {
        ok = false;
        why = "gradient check error " + std::to_string(worst);
    }
    if (ok) why = "100 floors, ln2 exact, grad err " + std::to_string(worst);
    report(3, "contrastive loss + grads", ok, why);
}

// --- criterion 4: convergence-rate consistency ------------------------------
void criterion_convergence() {
    auto t0 = Clock::now();
    bool ok = true;
    std::string why;
    std::vector<double> slopes;
    double worst_margin = 1e9;
    const std::size_t d = 32, steps = 2000;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed * 100);
        AlignBatch corpus;
        for (std::size_t i = 0; i < 64; ++i) {
            auto v = random_vec(rng, d);
            std::vector<double> a(d);
            for (std::size_t j = 0; j < d; ++j) a[j] = v[(j + 1) % d];
            corpus.pairs.emplace_back(std::move(v), std::move(a));
        }
        TrainSchedule schedule;
        schedule.steps = steps;
        schedule.base_eta = 0.1;
        schedule.seed = seed;
        auto result = train_alignment(corpus, schedule);
        auto [pos, neg] = positive_negative_cosines(corpus, result.params);
        worst_margin = std::min(worst_margin, pos - neg);

        // window-averaged excess over the analytic floor, log-log fit
        double floor =
            static_cast<double>(std::min<std::size_t>(schedule.batch_size, corpus.pairs.size())) *
            std::log(2.0);
        std::vector<double> xs, ys;
        for (std::size_t t = 100; t <= steps; t += 50) {
            double acc = 0.0;
            int c = 0;
            for (std::size_t u = t - 25; u <= std::min(t + 24, steps); ++u) {
                acc += result.loss_trace[u - 1];
                ++c;
            }
            double excess = std::max(acc / c - floor, 1e-12);
            xs.push_back(std::log(static_cast<double>(t)));
            ys.push_back(std::log(excess));
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= xs.size();
        my /= ys.size();
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            num += (xs[i] - mx) * (ys[i] - my);
            den += (xs[i] - mx) * (xs[i] - mx);
        }
        slopes.push_back(num / den);
    }
    std::sort(slopes.begin(), slopes.end());
    double median = slopes[slopes.size() / 2];
    if (worst_margin < 0.3) {
        ok = false;
        why = "positive-negative margin " + std::to_string(worst_margin) + " < 0.3";
    }
    if (median < -0.75 || median > -0.25) {
        ok = false;
        why = "median slope " + std::to_string(median) + " outside [-0.75,-0.25]";
    }
    double dt = elapsed_s(t0);
    if (dt >= 60.0) {
        ok = false;
        why = "runtime " + std::to_string(dt) + " s >= 60 s";
    }
    if (ok)
        why = "median slope " + std::to_string(median) + ", margin " +
              std::to_string(worst_margin) + ", " + std::to_string(dt) + " s";
    report(4, "SGD convergence rate", ok, why);
}

// --- criterion 5: dedup properties ------------------------------------------
void criterion_dedup() {
    HashingEmbedder embedder(kDefaultEmbedDim);
    bool ok = true;
    std::string why;
    std::mt19937_64 rng(105);
    const char* vocab[] = {"river", "stone", "lamp",  "orbit", "casual", "window",
                           "tiger", "maple", "seven", "quiet", "harbor", "comet"};

    // idempotence over 50 random corpora
    for (int trial = 0; trial < 50 && ok; ++trial) {
        std::vector<Segment> segs;
        std::map<std::string, double> scores;
        std::vector<std::string> sentences;
        for (int i = 0; i < 15; ++i) {
            std::string text;
            if (!sentences.empty() && rng() % 10 < 4) {
                text = sentences[rng() % sentences.size()];
            } else {
                for (int w = 0; w < 8; ++w)
                    text += std::string(vocab[rng() % 12]) + std::to_string(rng() % 30) + " ";
                text += ".";
                sentences.push_back(text);
            }
            Segment s;
            s.id = "s" + std::to_string(i);
            s.video_id = "v";
            s.range = {i * 3.0, (i + 1) * 3.0};
            s.texts.push_back({Modality::visual, text, 1.0});
            segs.push_back(std::move(s));
            scores["s" + std::to_string(i)] = static_cast<double>(rng() % 100) / 10.0;
        }
        auto once = minimize_redundancy(segs, scores, DedupConfig{}, embedder);
        auto twice = minimize_redundancy(once.pool, scores, DedupConfig{}, embedder);
        if (twice.pool.size() != once.pool.size()) {
            ok = false;
            why = "not idempotent at trial " + std::to_string(trial);
        } else {
            for (std::size_t i = 0; i < once.pool.size(); ++i)
                if (twice.pool[i].id != once.pool[i].id ||
                    twice.pool[i].combined_text() != once.pool[i].combined_text()) {
                    ok = false;
                    why = "pool changed on re-run at trial " + std::to_string(trial);
                }
        }
    }

    // exact-duplicate classes collapse to one representative each
    if (ok) {
        std::vector<Segment> segs;
        std::map<std::string, double> scores;
        for (int cls = 0; cls < 3; ++cls)
            for (int copy = 0; copy < 4; ++copy) {
                Segment s;
                s.id = "c" + std::to_string(cls) + "_" + std::to_string(copy);
                s.video_id = "v";
                s.range = {(cls * 4 + copy) * 3.0, (cls * 4 + copy + 1) * 3.0};
                s.texts.push_back({Modality::visual,
                                   "class " + std::to_string(cls) + " sentence about " +
                                       vocab[cls] + " " + vocab[cls + 3] + ".",
                                   1.0});
                segs.push_back(std::move(s));
                scores[segs.back().id] = 1.0;
            }
        auto r = minimize_redundancy(segs, scores, DedupConfig{}, embedder);
        if (r.pool.size() != 3) {
            ok = false;
            why = "duplicate classes collapsed to " + std::to_string(r.pool.size()) + " != 3";
        }
    }

    // synthetic corpus at repeat rate 0.3: compression with needle survival
    if (ok) {
        SynthSpec spec;
        spec.videos.push_back({"v0", 600.0, 3.0});
        spec.seed = 9;
        spec.repeat_rate = 0.3;
        for (int i = 0; i < 8; ++i)
            spec.needles.push_back({"v0", 30.0 + i * 60.0, "visual",
                                    "distinct needle marker " + std::to_string(i * 7919) +
                                        " planted here",
                                    {}});
        auto corpus = generate_corpus(spec);
        PipelineConfig cfg; // tau_dedup 0.85, tau_length 10
        auto built = build_pipeline(corpus.micro, cfg);
        if (built.micro_retained >= built.micro_input) {
            ok = false;
            why = "no compression on the synthetic corpus";
        }
        for (const auto& gt : corpus.truth.queries)
            for (const auto& nid : gt.needle_ids)
                if (!built.index.get(nid)) {
                    ok = false;
                    why = "needle " + nid + " lost in dedup";
                }
        if (ok)
            why = "idempotent, classes collapse, retained " +
                  std::to_string(built.micro_retained) + "/" + std::to_string(built.micro_input);
    }
    report(5, "dedup invariants", ok, why);
}

// --- criterion 6: hierarchy invariant ---------------------------------------
void criterion_hierarchy() {
    bool ok = true;
    std::string why;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        SynthSpec spec;
        spec.videos.push_back({"v0", 180.0, 3.0});
        spec.videos.push_back({"v1", 540.0, 3.0});
        spec.seed = seed;
        auto corpus = generate_corpus(spec);
        auto h = build_hierarchy(corpus.micro, ScaleConfig{});
        auto issues = validate_hierarchy(h);
        if (!issues.empty()) {
            ok = false;
            why = std::to_string(issues.size()) + " violations at seed " + std::to_string(seed);
        }
    }
    if (ok) {
        SynthSpec spec;
        spec.videos.push_back({"v0", 180.0, 3.0});
        auto h = build_hierarchy(generate_corpus(spec).micro, ScaleConfig{});
        std::size_t n0 = h.levels[0].size(), n1 = h.levels[1].size(), n2 = h.levels[2].size();
        if (n0 != 60 || n1 != 6 || n2 != 1) {
            ok = false;
            why = "ladder " + std::to_string(n0) + "/" + std::to_string(n1) + "/" +
                  std::to_string(n2) + " != 60/6/1";
        } else {
            why = "zero violations, 60/6/1 ladder";
        }
    }
    report(6, "hierarchy invariant", ok, why);
}

// --- criterion 7: needle retrieval ------------------------------------------
void criterion_needles() {
    bool ok = true;
    std::string why;

    // 60-minute video, 1200 micro segments, 100 single-modality needles
    SynthSpec spec;
    spec.videos.push_back({"v0", 3600.0, 3.0});
    spec.seed = 7;
    std::mt19937_64 rng(107);
    for (int i = 0; i < 100; ++i) {
        std::string text = "needle";
        for (int w = 0; w < 9; ++w) text += " mark" + std::to_string(rng() % 100000);
        spec.needles.push_back(
            {"v0", 9.0 + i * 36.0, i % 2 ? "audio" : "visual", text, {}});
    }
    auto corpus = generate_corpus(spec);
    PipelineConfig cfg;
    auto built = build_pipeline(corpus.micro, cfg);
    if (built.micro_input != 1200) {
        ok = false;
        why = "micro count " + std::to_string(built.micro_input) + " != 1200";
    }

    HashingEmbedder embedder(cfg.embed_dim);
    QueryPipeline pipeline(built.index, built.indexed, embedder);
    std::vector<double> latencies;
    int hits5 = 0;
    for (const auto& gt : corpus.truth.queries) {
        auto t0 = Clock::now();
        auto q = encode_query(gt.query, embedder);
        auto candidates = pipeline.retrieve(q, cfg.budget.k0);
        auto ranked = rerank(std::move(candidates), gt.query, pipeline.idf(), cfg.rerank_w);
        latencies.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
        for (std::size_t i = 0; i < std::min<std::size_t>(5, ranked.size()); ++i)
            if (ranked[i].segment.id == gt.needle_ids[0]) ++hits5;
    }
    double recall5 = hits5 / 100.0;
    std::sort(latencies.begin(), latencies.end());
    double p95 = latencies[static_cast<std::size_t>(0.95 * latencies.size())];
    if (recall5 < 0.95) {
        ok = false;
        why = "recall@5 " + std::to_string(recall5) + " < 0.95";
    }
    if (p95 >= 100.0) {
        ok = false;
        why = "latency p95 " + std::to_string(p95) + " ms >= 100 ms";
    }

    // cross-modal variant: both halves must reach the bundle
    double cross = 0.0;
    if (ok) {
        SynthSpec xspec;
        xspec.videos.push_back({"v0", 3600.0, 3.0});
        xspec.seed = 8;
        std::mt19937_64 xrng(108);
        for (int i = 0; i < 30; ++i) {
            std::string text = "needle";
            for (int w = 0; w < 9; ++w) text += " mark" + std::to_string(xrng() % 100000);
            xspec.needles.push_back({"v0", 21.0 + i * 111.0, "both", text, {}});
        }
        auto xcorpus = generate_corpus(xspec);
        auto xbuilt = build_pipeline(xcorpus.micro, cfg);
        auto xreport = evaluate(xcorpus, xbuilt, cfg);
        cross = xreport.cross_modal_recall;
        if (cross < 0.90) {
            ok = false;
            why = "cross-modal recall " + std::to_string(cross) + " < 0.90";
        }
    }
    if (ok)
        why = "recall@5 " + std::to_string(recall5) + ", p95 " + std::to_string(p95) +
              " ms, cross-modal " + std::to_string(cross);
    report(7, "needle retrieval", ok, why);
}

// --- criterion 8: MI estimator ----------------------------------------------
void criterion_mi() {
    bool ok = true;
    std::string why;
    std::vector<std::pair<std::string, std::string>> table;
    for (int i = 0; i < 4; ++i) table.emplace_back("0", "0");
    table.emplace_back("0", "1");
    table.emplace_back("1", "0");
    for (int i = 0; i < 4; ++i) table.emplace_back("1", "1");
    double mi = plugin_mi(table);
    if (std::abs(mi - 0.278) > 0.01) {
        ok = false;
        why = "2x2 table MI " + std::to_string(mi) + " not within 0.01 of 0.278";
    }
    std::mt19937_64 rng(109);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::pair<std::string, std::string>> coins;
    for (int i = 0; i < 100000; ++i)
        coins.emplace_back(coin(rng) ? "1" : "0", coin(rng) ? "1" : "0");
    double mi0 = plugin_mi(coins);
    if (mi0 >= 0.01) {
        ok = false;
        why = "independent coins MI " + std::to_string(mi0) + " >= 0.01";
    }
    if (ok) why = "table " + std::to_string(mi) + ", coins " + std::to_string(mi0);
    report(8, "MI estimator", ok, why);
}

// --- criterion 9: index persistence and approximate recall -------------------
void criterion_index() {
    bool ok = true;
    std::string why;
    std::mt19937_64 rng(110);
    const std::size_t dim = 64;
    VectorIndex idx(dim);
    for (int i = 0; i < 10000; ++i) {
        EmbeddingVector e;
        e.values = random_vec(rng, dim);
        e.normalize();
        idx.add("v" + std::to_string(i), e);
    }
    std::ostringstream first;
    idx.save(first);
    std::istringstream in(first.str());
    auto loaded = VectorIndex::load(in);
    std::ostringstream second;
    loaded.save(second);
    if (first.str() != second.str()) {
        ok = false;
        why = "10k round-trip not bit-exact";
    }

    if (ok) {
        idx.build_graph();
        double recall_sum = 0.0;
        for (int q = 0; q < 100; ++q) {
            EmbeddingVector query;
            query.values = random_vec(rng, dim);
            query.normalize();
            auto exact = idx.search(query, 10);
            auto approx = idx.search_approximate(query, 10);
            std::set<std::string> exact_ids;
            for (const auto& h : exact) exact_ids.insert(h.id);
            std::size_t inter = 0;
            for (const auto& h : approx) inter += exact_ids.count(h.id);
            recall_sum += inter / 10.0;
        }
        double recall = recall_sum / 100.0;
        if (recall < 0.95) {
            ok = false;
            why = "approximate recall@10 " + std::to_string(recall) + " < 0.95";
        } else {
            why = "bit-exact, approximate recall@10 " + std::to_string(recall);
        }
    }
    report(9, "index persistence", ok, why);
}

// --- criterion 10: budget safety --------------------------------------------
void criterion_budget() {
    bool ok = true;
    std::string why = "1000 randomized queries";
    SynthSpec spec;
    spec.videos.push_back({"v0", 900.0, 3.0});
    spec.videos.push_back({"v1", 900.0, 3.0});
    spec.seed = 11;
    auto corpus = generate_corpus(spec);
    PipelineConfig cfg;
    auto built = build_pipeline(corpus.micro, cfg);
    HashingEmbedder embedder(cfg.embed_dim);
    QueryPipeline pipeline(built.index, built.indexed, embedder);

    std::mt19937_64 rng(111);
    auto pools = std::vector<std::string>();
    for (const auto& s : built.indexed)
        for (const auto& t : tokenize(s.text)) pools.push_back(t);
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        std::string query;
        std::size_t n = 1 + rng() % 8;
        for (std::size_t i = 0; i < n; ++i) {
            if (!query.empty()) query += " ";
            query += pools[rng() % pools.size()];
        }
        BudgetConfig budget = cfg.budget;
        budget.max_tokens = rng() % 400;
        budget.k0 = 1 + rng() % 60;
        budget.density_mode = rng() % 2 == 0;
        budget.coherence_tau = (rng() % 4 == 0) ? 0.5 : 0.0;
        auto bundle = pipeline.run(query, budget, cfg.rerank_w);
        if (bundle.total_tokens > budget.max_tokens) {
            ok = false;
            why = "bundle " + std::to_string(bundle.total_tokens) + " tokens > L " +
                  std::to_string(budget.max_tokens) + " at trial " + std::to_string(trial);
        }
    }
    report(10, "budget safety", ok, why);
}

} // namespace

int main() {
    criterion_knapsack();
    criterion_k_star();
    criterion_loss();
    criterion_convergence();
    criterion_dedup();
    criterion_hierarchy();
    criterion_needles();
    criterion_mi();
    criterion_index();
    criterion_budget();
    if (failures) {
        std::printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    std::printf("all 10 criteria passed\n");
    return 0;
}
