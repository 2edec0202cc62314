#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "manta/harness.hpp"

using namespace manta;

namespace {

std::string dump(const std::vector<Segment>& segs) {
    std::ostringstream out;
    serialize_segments(segs, out);
    return out.str();
}

SynthSpec small_spec() {
    SynthSpec spec;
    spec.videos.push_back({"v0", 180.0, 3.0});
    spec.seed = 42;
    return spec;
}

} // namespace

TEST_CASE("generate_corpus: identical seeds give byte-identical corpora") {
    auto spec = small_spec();
    spec.needles.push_back({"v0", 30.0, "visual", "zephyr quartz beacon humming twice", {}});
    auto a = generate_corpus(spec);
    auto b = generate_corpus(spec);
    CHECK(dump(a.micro) == dump(b.micro));
    REQUIRE(a.truth.queries.size() == b.truth.queries.size());
    CHECK(a.truth.queries[0].query == b.truth.queries[0].query);

    spec.seed = 43; // different seed changes filler text
    auto c = generate_corpus(spec);
    CHECK(dump(a.micro) != dump(c.micro));
}

TEST_CASE("generate_corpus: 180 s video yields 60 micro segments, both modalities") {
    auto corpus = generate_corpus(small_spec());
    REQUIRE(corpus.micro.size() == 60);
    for (const auto& s : corpus.micro) {
        CHECK(s.level == 1);
        CHECK(s.text_for(Modality::visual) != nullptr);
        CHECK(s.text_for(Modality::audio) != nullptr);
    }
    CHECK(corpus.micro.front().id == make_segment_id("v0", 1, 0));
    CHECK(corpus.truth.queries.empty()); // no needles, no queries
}

TEST_CASE("generate_corpus: needle text is planted verbatim at its position") {
    auto spec = small_spec();
    std::string needle = "zephyr quartz beacon humming twice";
    spec.needles.push_back({"v0", 30.0, "visual", needle, {}});
    auto corpus = generate_corpus(spec);
    const auto& gt = corpus.truth.queries.at(0);
    REQUIRE(gt.needle_ids.size() == 1);
    CHECK(gt.needle_ids[0] == make_segment_id("v0", 1, 10)); // 30 s / 3 s
    const Segment* s = nullptr;
    for (const auto& m : corpus.micro)
        if (m.id == gt.needle_ids[0]) s = &m;
    REQUIRE(s != nullptr);
    CHECK(*s->text_for(Modality::visual) == needle);
    CHECK(gt.kind == "single");
}

TEST_CASE("generate_corpus: paraphrased query keeps at least the overlap fraction") {
    auto spec = small_spec();
    std::string needle = "zephyr quartz beacon humming twice over the frozen pier tonight";
    spec.needles.push_back({"v0", 60.0, "audio", needle, {}});
    auto corpus = generate_corpus(spec);
    auto qtoks = tokenize(corpus.truth.queries[0].query);
    auto ntoks = tokenize(needle);
    REQUIRE(qtoks.size() == ntoks.size());
    std::size_t same = 0;
    for (std::size_t i = 0; i < qtoks.size(); ++i)
        if (qtoks[i] == ntoks[i]) ++same;
    CHECK(static_cast<double>(same) >=
          spec.query_overlap * static_cast<double>(ntoks.size()) - 1e-9);
}

TEST_CASE("generate_corpus: cross-modal needle splits across visual and audio") {
    auto spec = small_spec();
    spec.needles.push_back({"v0", 90.0, "both", "amber falcon gliding north beyond rooftops", {}});
    auto corpus = generate_corpus(spec);
    const auto& gt = corpus.truth.queries[0];
    CHECK(gt.kind == "cross_modal");
    REQUIRE(gt.required_texts.size() == 2);
    const Segment* s = nullptr;
    for (const auto& m : corpus.micro)
        if (m.id == gt.needle_ids[0]) s = &m;
    REQUIRE(s != nullptr);
    CHECK(*s->text_for(Modality::visual) == gt.required_texts[0]);
    CHECK(*s->text_for(Modality::audio) == gt.required_texts[1]);
    // the halves reassemble to the full needle
    CHECK(tokenize(gt.required_texts[0] + " " + gt.required_texts[1]) ==
          tokenize("amber falcon gliding north beyond rooftops"));
}

TEST_CASE("generate_corpus: colliding needles and bad positions are rejected") {
    auto spec = small_spec();
    spec.needles.push_back({"v0", 30.0, "visual", "first needle text", {}});
    spec.needles.push_back({"v0", 31.0, "visual", "second needle text", {}}); // same segment slot
    CHECK_THROWS_AS(generate_corpus(spec), SynthError);

    auto out_of_range = small_spec();
    out_of_range.needles.push_back({"v0", 500.0, "visual", "way out there", {}});
    CHECK_THROWS_AS(generate_corpus(out_of_range), SynthError);

    auto unknown = small_spec();
    unknown.needles.push_back({"nope", 10.0, "visual", "lost needle", {}});
    CHECK_THROWS_AS(generate_corpus(unknown), SynthError);
}

TEST_CASE("ground truth JSON round-trip") {
    auto spec = small_spec();
    spec.needles.push_back(
        {"v0", 12.0, "visual", "paired start marker here", {{150.0, "paired end marker there"}}});
    auto corpus = generate_corpus(spec);
    auto j = ground_truth_to_json(corpus.truth);
    auto back = ground_truth_from_json(j);
    REQUIRE(back.queries.size() == corpus.truth.queries.size());
    CHECK(back.queries[0].query == corpus.truth.queries[0].query);
    CHECK(back.queries[0].needle_ids == corpus.truth.queries[0].needle_ids);
    CHECK(back.queries[0].kind == "paired");
}

TEST_CASE("parse_synth_spec reads the documented schema") {
    auto j = json::parse(R"({
        "seed": 7, "repeat_rate": 0.4,
        "videos": [{"id": "v0", "duration_s": 3600, "micro_s": 3}],
        "needles": [{"video": "v0", "position_s": 120, "modality": "audio",
                     "text": "needle words here",
                     "paired": {"position_s": 3000, "text": "partner words there"}}]
    })");
    auto spec = parse_synth_spec(j);
    CHECK(spec.seed == 7);
    CHECK(spec.repeat_rate == Catch::Approx(0.4));
    REQUIRE(spec.videos.size() == 1);
    CHECK(spec.videos[0].duration_s == Catch::Approx(3600.0));
    REQUIRE(spec.needles.size() == 1);
    CHECK(spec.needles[0].modality == "audio");
    REQUIRE(spec.needles[0].paired.has_value());
    CHECK(spec.needles[0].paired->second == "partner words there");
}

TEST_CASE("parse_config: defaults plus overrides, bad mode rejected") {
    std::istringstream in(R"(
# pipeline overrides
alpha = 0.5
tau_dedup = 0.9
budget_tokens = 512
mode = density
scale_durations = 3, 30, 180
)");
    auto cfg = parse_config(in);
    CHECK(cfg.density.alpha == Catch::Approx(0.5));
    CHECK(cfg.density.beta == Catch::Approx(0.25)); // untouched default
    CHECK(cfg.dedup.tau_dedup == Catch::Approx(0.9));
    CHECK(cfg.budget.max_tokens == 512);
    CHECK(cfg.budget.density_mode);
    REQUIRE(cfg.scales.level_durations.size() == 3);

    std::istringstream bad("mode = fancy\n");
    CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
    std::istringstream junk("this is not a key value line\n");
    CHECK_THROWS_WITH(parse_config(junk), Catch::Matchers::ContainsSubstring("line 1"));
}

TEST_CASE("build_pipeline: hierarchy valid, dedup compresses, index populated") {
    auto spec = small_spec();
    spec.needles.push_back({"v0", 45.0, "visual", "zephyr quartz beacon humming twice", {}});
    auto corpus = generate_corpus(spec);
    PipelineConfig cfg;
    auto built = build_pipeline(corpus.micro, cfg);

    CHECK(validate_hierarchy(built.hierarchy).empty());
    REQUIRE(built.hierarchy.levels.size() == 3);
    CHECK(built.hierarchy.levels[0].size() == 60);
    CHECK(built.hierarchy.levels[1].size() == 6);
    CHECK(built.hierarchy.levels[2].size() == 1);

    CHECK(built.micro_input == 60);
    CHECK(built.micro_retained < built.micro_input); // repeat rate 0.3 plants duplicates
    CHECK(built.index.size() == built.micro_retained);
    CHECK(built.indexed.size() == built.micro_retained);

    // the needle segment survives dedup
    std::string needle_id = corpus.truth.queries[0].needle_ids[0];
    CHECK(built.index.get(needle_id) != nullptr);
}

TEST_CASE("end-to-end: planted needles are retrieved on a small corpus") {
    auto spec = small_spec();
    spec.videos[0].duration_s = 360.0;
    spec.needles.push_back({"v0", 45.0, "visual", "zephyr quartz beacon humming twice", {}});
    spec.needles.push_back({"v0", 200.0, "audio", "crimson lantern drifting past the jetty", {}});
    spec.needles.push_back({"v0", 300.0, "both", "ivory compass spinning wildly under glass", {}});
    auto corpus = generate_corpus(spec);
    PipelineConfig cfg;
    cfg.budget.max_tokens = 256;
    auto built = build_pipeline(corpus.micro, cfg);
    auto report = evaluate(corpus, built, cfg);

    CHECK(report.queries == 3);
    CHECK(report.cross_modal_queries == 1);
    CHECK(report.needle_recall == Catch::Approx(1.0));
    CHECK(report.cross_modal_recall == Catch::Approx(1.0));
    CHECK(report.dedup_compression < 1.0);
    CHECK(report.budget_utilization > 0.0);
    CHECK(report.latency_p95_ms >= report.latency_p50_ms);

    auto j = report_to_json(report);
    CHECK(j.at("needle_recall").get<double>() == Catch::Approx(1.0));
    CHECK(j.at("queries").get<std::size_t>() == 3);
}
