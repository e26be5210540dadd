#pragma once

#include <string>
#include <vector>

#include "tierrank/config.hpp"

namespace tierrank {

// Subcommand entry points. Each returns a process exit code and reports
// failures on stderr; artifact outputs are deterministic given identical
// inputs and seeds.

struct IngestArgs {
    std::string manifest_path;  // CSV: doc_id,grade,condition_code,path
    std::string out_path;       // windows.jsonl
    std::vector<std::string> strip_patterns;
    bool semantic_grouping = true;
};
int cmd_ingest(const IngestArgs& args, const PipelineConfig& config);

struct BuildGraphArgs {
    std::string windows_path;
    std::string schema_path;  // empty -> built-in PICO schema
    std::string out_path;
};
int cmd_build_graph(const BuildGraphArgs& args, const PipelineConfig& config);

struct TrainBetrArgs {
    std::string pairs_path;       // JSONL of pairwise records, or
    std::string candidates_path;  // JSONL of labeled candidate sets
    std::string out_params_path;
    std::string out_curve_path;   // empty -> "<params>.curve.csv"
};
int cmd_train_betr(const TrainBetrArgs& args, const PipelineConfig& config);

struct QueryArgs {
    std::string question;
    std::string trace_path;  // empty -> no trace file
};
int cmd_query(const QueryArgs& args, const PipelineConfig& config);

struct EvaluateArgs {
    std::string benchmark_path;
    std::string answers_path;  // JSONL {"id","answer"}; empty -> run pipeline
    std::string report_path;
};
int cmd_evaluate(const EvaluateArgs& args, const PipelineConfig& config);

int run_cli(int argc, char** argv);

}  // namespace tierrank
