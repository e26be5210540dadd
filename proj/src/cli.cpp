#include "tierrank/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tierrank/chunking.hpp"
#include "tierrank/eval.hpp"
#include "tierrank/prompts.hpp"
#include "tierrank/rerank.hpp"

namespace tierrank {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int guard(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "tierrank: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tierrank: error: " << e.what() << "\n";
        return 1;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const IngestArgs& args, const PipelineConfig& config) {
    return guard([&] {
        auto gateway = make_gateway(config.gateway);
        std::ifstream manifest(args.manifest_path);
        if (!manifest) {
            throw FormatError("cannot open manifest: " + args.manifest_path);
        }
        const fs::path base = fs::path(args.manifest_path).parent_path();

        IngestOptions options;
        options.strip_patterns = args.strip_patterns;
        options.semantic_grouping = args.semantic_grouping;

        WindowStore store;
        std::string line;
        int line_no = 0;
        while (std::getline(manifest, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto fields = split_csv_line(line);
            if (line_no == 1 && !fields.empty() && fields[0] == "doc_id") {
                continue;  // header row
            }
            if (fields.size() != 4) {
                throw FormatError("manifest line " + std::to_string(line_no) +
                                  ": expected doc_id,grade,condition_code,path");
            }
            const std::string& doc_id = fields[0];
            const EvidenceGrade grade = parse_grade(fields[1]);
            const std::string& condition = fields[2];
            fs::path doc_path = fields[3];
            if (doc_path.is_relative()) doc_path = base / doc_path;

            const std::string markdown = read_file(doc_path.string());
            for (auto& window : ingest_document(doc_id, grade, condition,
                                                markdown, options, *gateway)) {
                store.add(std::move(window));
            }
            spdlog::info("ingested '{}' ({} windows so far)", doc_id,
                         store.size());
        }
        save_store(store, args.out_path);
        std::cout << "wrote " << store.size() << " windows to " << args.out_path
                  << "\n";
    });
}

// ---------------------------------------------------------------------------
// build-graph

int cmd_build_graph(const BuildGraphArgs& args, const PipelineConfig& config) {
    return guard([&] {
        auto gateway = make_gateway(config.gateway);
        const WindowStore store = load_store(args.windows_path);
        Schema schema = args.schema_path.empty() ? Schema::pico_default()
                                                 : load_schema(args.schema_path);
        const KnowledgeGraph graph =
            build_graph(store, std::move(schema), config.graph, *gateway);
        save_graph(graph, args.out_path);
        std::cout << "wrote graph with " << graph.nodes.size() << " nodes, "
                  << graph.triples.size() << " triples, "
                  << graph.communities.size() << " communities to "
                  << args.out_path << "\n";
    });
}

// ---------------------------------------------------------------------------
// train-betr

namespace {

EvidenceGrade grade_from_json(const json& j) {
    return parse_grade(j.get<std::string>());
}

void load_pairs_file(const std::string& path,
                     std::vector<PairwiseRecord>& train,
                     std::vector<PairwiseRecord>& val) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open pairs file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            PairwiseRecord r;
            r.query_id = j.at("query_id").get<std::string>();
            r.delta_s = j.at("delta_s").get<double>();
            r.grade_pos = grade_from_json(j.at("grade_pos"));
            r.grade_neg = grade_from_json(j.at("grade_neg"));
            (j.value("split", "train") == "val" ? val : train).push_back(r);
        } catch (const json::exception& e) {
            throw FormatError("pairs file line " + std::to_string(line_no) +
                              ": " + e.what());
        }
    }
}

void load_candidates_file(const std::string& path,
                          std::vector<LabeledCandidateSet>& train,
                          std::vector<LabeledCandidateSet>& val) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open candidates file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            LabeledCandidateSet set;
            set.query_id = j.at("query_id").get<std::string>();
            for (const auto& c : j.at("candidates")) {
                set.candidates.push_back({c.at("window_id").get<std::string>(),
                                          c.at("s").get<double>(),
                                          grade_from_json(c.at("grade"))});
            }
            const auto golds =
                j.at("gold_ids").get<std::vector<std::string>>();
            set.gold_ids.insert(golds.begin(), golds.end());
            (j.value("split", "train") == "val" ? val : train)
                .push_back(std::move(set));
        } catch (const json::exception& e) {
            throw FormatError("candidates file line " +
                              std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

int cmd_train_betr(const TrainBetrArgs& args, const PipelineConfig& config) {
    return guard([&] {
        if (args.pairs_path.empty() == args.candidates_path.empty()) {
            throw ConfigError(
                "train-betr needs exactly one of --pairs or --candidates");
        }
        FitResult fit;
        if (!args.pairs_path.empty()) {
            std::vector<PairwiseRecord> train;
            std::vector<PairwiseRecord> val;
            load_pairs_file(args.pairs_path, train, val);
            fit = fit_calibrator_groups(group_records(train),
                                        group_records(val), config.betr);
        } else {
            std::vector<LabeledCandidateSet> train;
            std::vector<LabeledCandidateSet> val;
            load_candidates_file(args.candidates_path, train, val);
            fit = fit_calibrator(train, val, config.betr);
        }
        save_params(fit.params, args.out_params_path);
        const std::string curve_path = args.out_curve_path.empty()
                                           ? args.out_params_path + ".curve.csv"
                                           : args.out_curve_path;
        save_training_curve(fit, curve_path);

        const auto u = grade_biases(fit.params);
        std::cout << "fit a=" << fit.params.scale() << " u=[" << u[0] << ", "
                  << u[1] << ", " << u[2] << ", " << u[3] << ", " << u[4]
                  << "] best_epoch=" << fit.best_epoch << "\n";
        std::cout << "wrote " << args.out_params_path << " and " << curve_path
                  << "\n";
    });
}

// ---------------------------------------------------------------------------
// query

namespace {

json ranking_to_json(const ChannelRanking& ranking) {
    json entries = json::array();
    for (const auto& e : ranking.entries) {
        entries.push_back({{"window_id", e.window_id},
                           {"rank", e.rank},
                           {"score", e.score}});
    }
    return {{"channel", std::string(channel_label(ranking.channel))},
            {"entries", entries}};
}

json track_to_json(const TrackTrace& track) {
    json channels = json::array();
    for (const auto& c : track.channels) channels.push_back(ranking_to_json(c));
    json fused = json::array();
    for (const auto& [id, score] : track.fused) {
        fused.push_back({{"window_id", id}, {"rrf_score", score}});
    }
    return {{"channels", channels}, {"fused", fused}};
}

json anchors_to_json(const PicotAnchors& anchors) {
    auto field = [](const std::optional<std::string>& v) {
        return v ? json(*v) : json();
    };
    return {{"P", field(anchors.population)},
            {"I", field(anchors.intervention)},
            {"C", field(anchors.comparator)},
            {"O", field(anchors.outcome)},
            {"T", field(anchors.timeframe)}};
}

struct QueryOutcome {
    std::string answer;
    json trace;
};

QueryOutcome run_query_pipeline(const std::string& question,
                                const PipelineConfig& config,
                                ModelGateway& gateway) {
    if (config.windows_path.empty()) {
        throw ConfigError("query requires paths.windows (or --windows)");
    }
    if (config.rerank.final_top_k < 1 ||
        config.rerank.coarse_top_k < config.rerank.final_top_k) {
        throw ConfigError(
            "rerank config requires coarse_top_k >= final_top_k >= 1");
    }
    const WindowStore store = load_store(config.windows_path);

    CalibratorParams params;  // prior mode: pure semantic ranking
    if (!config.betr_params_path.empty()) {
        params = load_params(config.betr_params_path);
    }
    KnowledgeGraph graph;
    bool has_graph = false;
    if (!config.graph_path.empty()) {
        graph = load_graph(config.graph_path);
        has_graph = true;
    }

    const std::set<EvidenceGrade> grades_a = {EvidenceGrade::A};
    const std::set<EvidenceGrade> grades_be = {
        EvidenceGrade::B, EvidenceGrade::C, EvidenceGrade::D, EvidenceGrade::E};
    const VectorIndex index_a = build_dense_index(store, grades_a, gateway);
    const VectorIndex index_be = build_dense_index(store, grades_be, gateway);

    RetrievalInputs inputs;
    inputs.index_a = &index_a;
    inputs.index_be = &index_be;
    inputs.graph = has_graph ? &graph : nullptr;
    inputs.store = &store;

    const DualTrackResult candidates =
        dual_track_candidates(question, inputs, config.fusion, gateway);

    // Candidate pool in merged order, optionally reordered by a merge-time
    // calibration pass over the RRF scores.
    std::vector<DualTrackResult::Candidate> pool = candidates.merged;
    if (config.rerank.betr_at_merge) {
        std::vector<GradedScore> merged_scores;
        for (const auto& c : pool) {
            const auto grade = store.grade_of(c.window_id);
            merged_scores.push_back(
                {c.window_id, c.rrf_score,
                 grade.value_or(EvidenceGrade::E)});
        }
        const auto reordered = apply_betr(merged_scores, params);
        std::map<std::string, DualTrackResult::Candidate> by_id;
        for (const auto& c : pool) by_id[c.window_id] = c;
        pool.clear();
        for (const auto& r : reordered) pool.push_back(by_id[r.window_id]);
    }

    // Optional retrieve-reflect loop appends windows the loop surfaced.
    IrcotResult ircot;
    if (config.ircot_max_iters > 0) {
        std::vector<std::string> subquery_texts;
        if (has_graph) {
            for (const auto& sq :
                 decompose_query(question, graph.schema, gateway)) {
                subquery_texts.push_back(sq.text);
            }
        }
        auto retrieve_fn = [&](const std::string& q) {
            const auto embedding = gateway.embed({q}).front();
            std::vector<std::string> ids;
            for (const auto* index : {&index_a, &index_be}) {
                if (index->empty()) continue;
                for (const auto& [id, _] : index->search(embedding, 10)) {
                    ids.push_back(id);
                }
            }
            return ids;
        };
        ircot = ircot_loop(question, subquery_texts, retrieve_fn, gateway,
                           config.ircot_max_iters);
        std::set<std::string> in_pool;
        for (const auto& c : pool) in_pool.insert(c.window_id);
        for (const auto& id : ircot.accumulated) {
            if (in_pool.insert(id).second) {
                const auto grade = store.grade_of(id);
                pool.push_back(
                    {id, 0.0, grade == EvidenceGrade::A ? 'A' : 'B'});
            }
        }
    }

    // Coarse MaxSim ranking over the pool.
    const TokenEmbeddingMatrix query_tokens = gateway.embed_tokens(question);
    std::vector<CoarseCandidate> coarse_input;
    for (const auto& c : pool) {
        const EvidenceWindow* w = store.find(c.window_id);
        if (!w) continue;
        coarse_input.push_back({c.window_id, gateway.embed_tokens(w->text)});
    }
    const auto coarse =
        coarse_rank(query_tokens, coarse_input, config.rerank.coarse_top_k);

    // Fine cross-encoder pass and calibration.
    std::vector<FineInput> fine_input;
    for (const auto& [id, _] : coarse) {
        fine_input.push_back({id, store.find(id)->text});
    }
    const auto fine = fine_rank(question, fine_input, gateway);

    std::vector<GradedScore> graded;
    for (const auto& [id, logit] : fine) {
        graded.push_back(
            {id, logit, store.grade_of(id).value_or(EvidenceGrade::E)});
    }
    const auto calibrated = apply_betr(graded, params);
    const auto [selection, quota] = soft_quota_select(
        calibrated, config.rerank.final_top_k, config.rerank.quota_margin);

    // Answer generation from the selected windows.
    std::string evidence;
    for (const auto& s : selection) {
        const EvidenceWindow* w = store.find(s.window_id);
        evidence += "[" + s.window_id + " | grade " +
                    std::string(grade_label(s.grade)) + "]\n" + w->text +
                    "\n\n";
    }
    std::string prompt = prompts::fill(prompts::kStructuredAnswerTemplate,
                                       "question", question);
    prompt = prompts::fill(std::move(prompt), "evidence", evidence);
    const std::string answer = gateway.complete(prompt, 0.0);

    // Trace assembly.
    json trace;
    trace["format"] = "tierrank-trace";
    trace["version"] = 1;
    trace["seed"] = config.seed;
    trace["question"] = question;
    trace["anchors"] = anchors_to_json(candidates.anchors);
    trace["hyde_passages"] = candidates.hyde_passages;
    trace["tracks"] = {{"A", track_to_json(candidates.track_a)},
                       {"BE", track_to_json(candidates.track_be)}};
    json merged = json::array();
    for (const auto& c : candidates.merged) {
        merged.push_back({{"window_id", c.window_id},
                          {"rrf_score", c.rrf_score},
                          {"track", std::string(1, c.track)}});
    }
    trace["merged_candidates"] = merged;
    trace["betr_at_merge"] = config.rerank.betr_at_merge;
    json ircot_steps = json::array();
    for (const auto& step : ircot.trace) {
        ircot_steps.push_back({{"iteration", step.iteration},
                               {"query", step.query},
                               {"retrieved", step.retrieved},
                               {"sufficient", step.sufficient},
                               {"followup", step.followup}});
    }
    trace["ircot"] = ircot_steps;
    json coarse_json = json::array();
    for (const auto& [id, score] : coarse) {
        coarse_json.push_back({{"window_id", id}, {"maxsim", score}});
    }
    trace["coarse"] = coarse_json;
    json fine_json = json::array();
    for (const auto& [id, logit] : fine) {
        fine_json.push_back({{"window_id", id}, {"logit", logit}});
    }
    trace["fine"] = fine_json;
    json calibrated_json = json::array();
    for (const auto& c : calibrated) {
        calibrated_json.push_back(
            {{"window_id", c.window_id},
             {"calibrated", c.calibrated},
             {"grade", std::string(grade_label(c.grade))}});
    }
    trace["calibrated"] = calibrated_json;
    trace["quota"] = {{"applied", quota.applied},
                      {"small_pool", quota.small_pool},
                      {"already_present", quota.already_present},
                      {"promoted_id", quota.promoted_id},
                      {"displaced_id", quota.displaced_id}};
    json selection_json = json::array();
    for (const auto& s : selection) selection_json.push_back(s.window_id);
    trace["selection"] = selection_json;
    trace["answer"] = answer;

    return {answer, std::move(trace)};
}

}  // namespace

int cmd_query(const QueryArgs& args, const PipelineConfig& config) {
    return guard([&] {
        if (args.question.empty()) throw ConfigError("--question is required");
        auto gateway = make_gateway(config.gateway);
        const QueryOutcome outcome =
            run_query_pipeline(args.question, config, *gateway);
        if (!args.trace_path.empty()) {
            std::ofstream out(args.trace_path);
            if (!out) {
                throw FormatError("cannot write trace: " + args.trace_path);
            }
            out << outcome.trace.dump(2) << "\n";
        }
        std::cout << outcome.answer << "\n";
    });
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const EvaluateArgs& args, const PipelineConfig& config) {
    return guard([&] {
        auto gateway = make_gateway(config.gateway);
        const auto loaded = load_benchmark(args.benchmark_path);
        for (const auto& err : loaded.errors) {
            std::cerr << "tierrank: benchmark line " << err.line << ": "
                      << err.message << "\n";
        }

        std::function<std::string(const BenchmarkItem&)> answer_fn;
        if (!args.answers_path.empty() && args.answers_path != "pipeline") {
            auto answers = std::make_shared<std::map<std::string, std::string>>();
            std::ifstream in(args.answers_path);
            if (!in) {
                throw FormatError("cannot open answers file: " +
                                  args.answers_path);
            }
            std::string line;
            while (std::getline(in, line)) {
                if (line.find_first_not_of(" \t\r") == std::string::npos) {
                    continue;
                }
                const json j = json::parse(line);
                (*answers)[j.at("id").get<std::string>()] =
                    j.at("answer").get<std::string>();
            }
            answer_fn = [answers](const BenchmarkItem& item) {
                auto it = answers->find(item.id);
                if (it == answers->end()) {
                    throw Error("no canned answer for item '" + item.id + "'");
                }
                return it->second;
            };
        } else {
            answer_fn = [&config, &gateway](const BenchmarkItem& item) {
                return run_query_pipeline(item.question, config, *gateway)
                    .answer;
            };
        }

        EvalReport report = evaluate_run(loaded.items, answer_fn, *gateway);
        report.seed = config.seed;
        save_report(report, args.report_path);

        std::cout << "evaluated " << report.items.size() << " items";
        if (report.mean_nugget_coverage) {
            std::cout << "  nugget_coverage=" << *report.mean_nugget_coverage;
        }
        if (report.mean_picot_match) {
            std::cout << "  picot_match=" << *report.mean_picot_match;
        }
        if (report.mean_semantic_similarity) {
            std::cout << "  semantic_similarity="
                      << *report.mean_semantic_similarity;
        }
        std::cout << "\n" << "wrote " << args.report_path << "\n";
    });
}

// ---------------------------------------------------------------------------
// argument parsing

int run_cli(int argc, char** argv) {
    CLI::App app{"tierrank: evidence-tier-aware retrieval and reranking"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::string log_level = "warn";
    app.add_option("--config", config_path, "config file (key = value)");
    app.add_option("--seed", seed_override, "override the configured seed");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error");

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "build a window store");
    ingest->add_option("--manifest", ingest_args.manifest_path,
                       "CSV: doc_id,grade,condition_code,path")
        ->required();
    ingest->add_option("--out", ingest_args.out_path, "windows.jsonl output")
        ->required();
    ingest->add_option("--strip-pattern", ingest_args.strip_patterns,
                       "regex for lines to drop (repeatable)");
    bool no_grouping = false;
    ingest->add_flag("--no-semantic-grouping", no_grouping,
                     "one window per atomic block");

    BuildGraphArgs graph_args;
    std::optional<double> lambda_flag;
    std::optional<double> epsilon_flag;
    std::optional<double> mu_flag;
    auto* build = app.add_subcommand("build-graph", "build the knowledge graph");
    build->add_option("--windows", graph_args.windows_path)->required();
    build->add_option("--schema", graph_args.schema_path,
                      "schema JSON (default: built-in PICO schema)");
    build->add_option("--out", graph_args.out_path)->required();
    build->add_option("--lambda", lambda_flag, "semantic affinity weight");
    build->add_option("--epsilon", epsilon_flag, "merge threshold");
    build->add_option("--mu", mu_flag, "schema extension confidence threshold");

    TrainBetrArgs train_args;
    std::optional<double> tau_flag;
    std::optional<double> sigma_a_flag;
    std::optional<int> k_flag;
    std::optional<double> lr_flag;
    std::optional<int> epochs_flag;
    auto* train = app.add_subcommand("train-betr", "fit the grade calibrator");
    train->add_option("--pairs", train_args.pairs_path,
                      "JSONL of pairwise records");
    train->add_option("--candidates", train_args.candidates_path,
                      "JSONL of labeled candidate sets");
    train->add_option("--out", train_args.out_params_path)->required();
    train->add_option("--curve", train_args.out_curve_path);
    train->add_option("--tau", tau_flag);
    train->add_option("--sigma-a", sigma_a_flag);
    train->add_option("--k", k_flag, "negatives per positive");
    train->add_option("--lr", lr_flag);
    train->add_option("--epochs", epochs_flag);

    QueryArgs query_args;
    std::string windows_flag;
    std::string graph_flag;
    std::string params_flag;
    auto* query = app.add_subcommand("query", "answer one question");
    query->add_option("--question", query_args.question)->required();
    query->add_option("--windows", windows_flag);
    query->add_option("--graph", graph_flag);
    query->add_option("--betr-params", params_flag);
    query->add_option("--trace", query_args.trace_path);

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "run the benchmark metrics");
    evaluate->add_option("--benchmark", eval_args.benchmark_path)->required();
    evaluate->add_option("--answers", eval_args.answers_path,
                         "answers JSONL, or 'pipeline'");
    evaluate->add_option("--report", eval_args.report_path)->required();

    // Global flags may also appear after the subcommand name.
    for (auto* sub : {ingest, build, train, query, evaluate}) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    const auto level = spdlog::level::from_str(log_level);
    spdlog::set_level(level);

    PipelineConfig config;
    try {
        config = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "tierrank: config error: " << e.what() << "\n";
        return 2;
    }
    if (seed_override) {
        config.seed = *seed_override;
        config.betr.seed = *seed_override;
    }

    if (ingest->parsed()) {
        ingest_args.semantic_grouping = !no_grouping;
        return cmd_ingest(ingest_args, config);
    }
    if (build->parsed()) {
        if (lambda_flag) config.graph.lambda = *lambda_flag;
        if (epsilon_flag) config.graph.epsilon = *epsilon_flag;
        if (mu_flag) config.graph.mu = *mu_flag;
        return cmd_build_graph(graph_args, config);
    }
    if (train->parsed()) {
        if (tau_flag) config.betr.tau = *tau_flag;
        if (sigma_a_flag) config.betr.sigma_a = *sigma_a_flag;
        if (k_flag) config.betr.negatives_per_positive = *k_flag;
        if (lr_flag) config.betr.learning_rate = *lr_flag;
        if (epochs_flag) config.betr.epochs = *epochs_flag;
        return cmd_train_betr(train_args, config);
    }
    if (query->parsed()) {
        if (!windows_flag.empty()) config.windows_path = windows_flag;
        if (!graph_flag.empty()) config.graph_path = graph_flag;
        if (!params_flag.empty()) config.betr_params_path = params_flag;
        return cmd_query(query_args, config);
    }
    if (evaluate->parsed()) {
        return cmd_evaluate(eval_args, config);
    }
    return 1;
}

}  // namespace tierrank
