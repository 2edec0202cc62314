// Command-line front end for the retrieval pipeline: corpus synthesis,
// ingestion, index building, alignment training, deduplication, querying,
// and end-to-end evaluation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "manta/align.hpp"
#include "manta/asr_refine.hpp"
#include "manta/harness.hpp"

namespace fs = std::filesystem;
using namespace manta;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

PipelineConfig config_or_default(const std::string& path) {
    return path.empty() ? PipelineConfig{} : load_config(path);
}

// Sidecar metadata for the indexed segments, one JSON object per line.
void save_indexed(const std::vector<IndexedSegment>& segs, const std::string& path) {
    auto out = open_out(path);
    for (const auto& s : segs) {
        json j{{"id", s.id},           {"video_id", s.video_id}, {"start_s", s.range.start_s},
               {"end_s", s.range.end_s}, {"text", s.text},       {"tokens", s.tokens}};
        out << j.dump() << "\n";
    }
}

std::vector<IndexedSegment> load_indexed(const std::string& path) {
    auto in = open_in(path);
    std::vector<IndexedSegment> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = json::parse(line);
        IndexedSegment s;
        s.id = j.at("id").get<std::string>();
        s.video_id = j.at("video_id").get<std::string>();
        s.range = {j.at("start_s").get<double>(), j.at("end_s").get<double>()};
        s.text = j.at("text").get<std::string>();
        s.tokens = j.at("tokens").get<std::size_t>();
        out.push_back(std::move(s));
    }
    return out;
}

BuiltPipeline build_from_segments(const std::string& segments_path, const PipelineConfig& cfg) {
    auto in = open_in(segments_path);
    auto micro = ingest_segments(in);
    return build_pipeline(micro, cfg);
}

void write_index_dir(const BuiltPipeline& built, const std::string& dir) {
    fs::create_directories(dir);
    built.index.save(dir + "/index.bin");
    save_indexed(built.indexed, dir + "/segments.jsonl");
}

json bundle_to_json(const ContextBundle& bundle) {
    json entries = json::array();
    for (const auto& e : bundle.entries)
        entries.push_back({{"id", e.segment.id},
                           {"video_id", e.segment.video_id},
                           {"start_s", e.segment.range.start_s},
                           {"end_s", e.segment.range.end_s},
                           {"tokens", e.segment.tokens},
                           {"cosine", e.cosine_score},
                           {"rerank", e.rerank_score},
                           {"text", e.segment.text}});
    return json{{"total_tokens", bundle.total_tokens}, {"entries", entries}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrieval and context selection over multimodal segment streams"};
    app.require_subcommand(1);

    // synth
    std::string synth_spec_path, synth_out_dir;
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted needles");
    synth->add_option("--spec", synth_spec_path, "synthesis spec (JSON)")->required();
    synth->add_option("--out", synth_out_dir, "output directory")->required();

    // ingest
    std::string ingest_in, ingest_out;
    auto* ingest = app.add_subcommand("ingest", "validate and normalize segment JSONL");
    ingest->add_option("--in", ingest_in, "segment JSONL input")->required();
    ingest->add_option("--out", ingest_out, "normalized JSONL output")->required();

    // build-index
    std::string bi_segments, bi_config, bi_out;
    auto* build = app.add_subcommand("build-index", "score, fuse, dedup, and index segments");
    build->add_option("--segments", bi_segments, "micro-segment JSONL")->required();
    build->add_option("--config", bi_config, "pipeline config file");
    build->add_option("--out", bi_out, "output directory")->required();

    // align-train
    std::string at_pairs, at_out;
    TrainSchedule at_schedule;
    std::size_t at_dout = 32;
    auto* align = app.add_subcommand("align-train", "train cross-modal projections");
    align->add_option("--pairs", at_pairs, "JSONL of {\"visual\":[..],\"audio\":[..]}")->required();
    align->add_option("--out", at_out, "output params file")->required();
    align->add_option("--steps", at_schedule.steps, "SGD steps");
    align->add_option("--eta", at_schedule.base_eta, "base learning rate");
    align->add_option("--tau", at_schedule.temperature, "softmax temperature");
    align->add_option("--seed", at_schedule.seed, "RNG seed");
    align->add_option("--batch", at_schedule.batch_size, "minibatch size");
    align->add_option("--d-out", at_dout, "projection output dimension");

    // dedup
    std::string dd_segments, dd_config, dd_out, dd_report;
    auto* dd = app.add_subcommand("dedup", "redundancy-minimize a segment stream");
    dd->add_option("--segments", dd_segments, "segment JSONL")->required();
    dd->add_option("--config", dd_config, "pipeline config file");
    dd->add_option("--out", dd_out, "deduplicated JSONL output")->required();
    dd->add_option("--report", dd_report, "JSON report of retained/merged/dropped ids");

    // query
    std::string q_index, q_question, q_config, q_mode = "rank", q_emit = "prompt";
    std::size_t q_budget = 2048, q_k0 = 50;
    auto* query = app.add_subcommand("query", "retrieve and assemble context for a question");
    query->add_option("--index", q_index, "index directory from build-index")->required();
    query->add_option("--question", q_question, "query text")->required();
    query->add_option("--budget", q_budget, "token budget L")->required();
    query->add_option("--k0", q_k0, "coarse retrieval depth");
    query->add_option("--mode", q_mode, "rank | density")->check(CLI::IsMember({"rank", "density"}));
    query->add_option("--emit", q_emit, "prompt | json")->check(CLI::IsMember({"prompt", "json"}));
    query->add_option("--config", q_config, "pipeline config file");

    // eval
    std::string ev_corpus, ev_config, ev_report;
    auto* ev = app.add_subcommand("eval", "run the retrieval experiment on a synthetic corpus");
    ev->add_option("--corpus", ev_corpus, "directory from synth")->required();
    ev->add_option("--config", ev_config, "pipeline config file");
    ev->add_option("--report", ev_report, "metrics JSON output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            auto in = open_in(synth_spec_path);
            json j = json::parse(in);
            auto corpus = generate_corpus(parse_synth_spec(j));
            fs::create_directories(synth_out_dir);
            auto seg_out = open_out(synth_out_dir + "/segments.jsonl");
            serialize_segments(corpus.micro, seg_out);
            open_out(synth_out_dir + "/truth.json") << ground_truth_to_json(corpus.truth).dump(2)
                                                    << "\n";
            std::cout << "wrote " << corpus.micro.size() << " segments, "
                      << corpus.truth.queries.size() << " queries to " << synth_out_dir << "\n";
        } else if (*ingest) {
            auto in = open_in(ingest_in);
            auto segs = ingest_segments(in);
            auto out = open_out(ingest_out);
            serialize_segments(segs, out);
            std::cout << "ingested " << segs.size() << " segments\n";
        } else if (*build) {
            auto cfg = config_or_default(bi_config);
            auto built = build_from_segments(bi_segments, cfg);
            write_index_dir(built, bi_out);
            std::cout << "indexed " << built.index.size() << " of " << built.micro_input
                      << " segments (dedup dropped "
                      << built.dedup_report.dropped.size() << ", merged "
                      << built.dedup_report.merged.size() << ")\n";
        } else if (*align) {
            AlignBatch corpus;
            auto in = open_in(at_pairs);
            std::string line;
            while (std::getline(in, line)) {
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                auto j = json::parse(line);
                corpus.pairs.emplace_back(j.at("visual").get<std::vector<double>>(),
                                          j.at("audio").get<std::vector<double>>());
            }
            if (corpus.pairs.empty()) throw std::runtime_error("no training pairs in " + at_pairs);
            std::size_t d_in = corpus.pairs.front().first.size();
            auto initial = ProjectionParams::random_init(d_in, at_dout, at_schedule.seed);
            auto result = train_alignment(corpus, at_schedule, initial);
            save_params(result.params, at_out);
            auto [pos, neg] = positive_negative_cosines(corpus, result.params);
            std::cout << "trained " << at_schedule.steps << " steps, final loss "
                      << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back())
                      << ", positive/negative cosine " << pos << " / " << neg << "\n";
        } else if (*dd) {
            auto cfg = config_or_default(dd_config);
            auto in = open_in(dd_segments);
            auto segs = ingest_segments(in);
            HashingEmbedder embedder(cfg.embed_dim);
            auto scores = score_micro_segments(segs, cfg, embedder);
            auto result = minimize_redundancy(segs, scores, cfg.dedup, embedder);
            auto out = open_out(dd_out);
            serialize_segments(result.pool, out);
            if (!dd_report.empty()) {
                json j{{"retained", result.report.retained},
                       {"merged", result.report.merged},
                       {"dropped", result.report.dropped}};
                open_out(dd_report) << j.dump(2) << "\n";
            }
            std::cout << "retained " << result.pool.size() << " of " << segs.size()
                      << " segments\n";
        } else if (*query) {
            auto cfg = config_or_default(q_config);
            cfg.budget.max_tokens = q_budget;
            cfg.budget.k0 = q_k0;
            cfg.budget.density_mode = q_mode == "density";
            auto index = VectorIndex::load(q_index + "/index.bin");
            auto segs = load_indexed(q_index + "/segments.jsonl");
            HashingEmbedder embedder(index.dim());
            QueryPipeline pipeline(index, segs, embedder);
            auto bundle = pipeline.run(q_question, cfg.budget, cfg.rerank_w);
            if (q_emit == "json")
                std::cout << bundle_to_json(bundle).dump(2) << "\n";
            else
                std::cout << assemble_context(bundle);
        } else if (*ev) {
            auto cfg = config_or_default(ev_config);
            auto seg_in = open_in(ev_corpus + "/segments.jsonl");
            SynthCorpus corpus;
            corpus.micro = ingest_segments(seg_in);
            auto truth_in = open_in(ev_corpus + "/truth.json");
            corpus.truth = ground_truth_from_json(json::parse(truth_in));
            auto built = build_pipeline(corpus.micro, cfg);
            auto report = evaluate(corpus, built, cfg);
            open_out(ev_report) << report_to_json(report).dump(2) << "\n";
            std::cout << report_to_json(report).dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
