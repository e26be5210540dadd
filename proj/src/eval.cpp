#include "tierrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tierrank/prompts.hpp"
#include "tierrank/vec.hpp"

namespace tierrank {

using json = nlohmann::json;

namespace {

std::optional<std::string> optional_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) {
        throw FormatError(std::string("field '") + key +
                          "' must be a string or null");
    }
    const auto value = j[key].get<std::string>();
    if (value.empty()) return std::nullopt;
    return value;
}

BenchmarkItem item_from_json(const json& j) {
    BenchmarkItem item;
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    item.exact_answer = j.at("exact_answer").get<std::string>();
    item.nuggets = j.at("nuggets").get<std::vector<std::string>>();
    if (j.contains("gold_picot") && !j["gold_picot"].is_null()) {
        const auto& g = j["gold_picot"];
        item.gold_picot.population = optional_field(g, "P");
        item.gold_picot.intervention = optional_field(g, "I");
        item.gold_picot.comparator = optional_field(g, "C");
        item.gold_picot.outcome = optional_field(g, "O");
        item.gold_picot.timeframe = optional_field(g, "T");
    }
    item.gold_window_ids =
        j.at("gold_window_ids").get<std::vector<std::string>>();
    item.evidence_certainty = j.value("evidence_certainty", "sufficient");
    item.split = j.at("split").get<std::string>();
    item.condition_code = j.value("condition_code", "");

    if (item.id.empty()) throw FormatError("item id must be non-empty");
    if (item.question.empty()) throw FormatError("question must be non-empty");
    if (item.split != "main" && item.split != "challenge") {
        throw FormatError("split must be 'main' or 'challenge', got '" +
                          item.split + "'");
    }
    if (item.split == "main" && item.nuggets.empty()) {
        throw FormatError("main-split item '" + item.id + "' has no nuggets");
    }
    if (item.evidence_certainty != "sufficient" &&
        item.evidence_certainty != "uncertain") {
        throw FormatError("evidence_certainty must be sufficient|uncertain");
    }
    return item;
}

}  // namespace

std::map<std::string, int> BenchmarkLoadResult::counts_by_condition() const {
    std::map<std::string, int> out;
    for (const auto& item : items) ++out[item.condition_code];
    return out;
}

std::map<std::string, int> BenchmarkLoadResult::counts_by_split() const {
    std::map<std::string, int> out;
    for (const auto& item : items) ++out[item.split];
    return out;
}

BenchmarkLoadResult load_benchmark(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open benchmark file: " + path);
    BenchmarkLoadResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            result.items.push_back(item_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            result.errors.push_back({line_no, e.what()});
        }
    }
    return result;
}

JudgeVerdict judge_nugget(const std::string& question,
                          const std::string& answer,
                          const std::string& nugget, ModelGateway& gateway) {
    if (question.empty() || answer.empty() || nugget.empty()) {
        throw Error("judge_nugget requires non-empty inputs");
    }
    std::string prompt =
        prompts::fill(prompts::kNuggetJudgeTemplate, "question", question);
    prompt = prompts::fill(std::move(prompt), "answer", answer);
    prompt = prompts::fill(std::move(prompt), "nugget", nugget);

    JudgeVerdict verdict;
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        if (!j.contains("covered") || !j["covered"].is_boolean()) {
            verdict.parse_flag = true;  // conservative: not covered
            verdict.reason = "judge reply missing boolean 'covered'";
            return verdict;
        }
        verdict.covered = j["covered"].get<bool>();
        verdict.reason = j.value("reason", "");
    } catch (const std::exception& e) {
        verdict.parse_flag = true;
        verdict.reason = std::string("judge reply unparseable: ") + e.what();
    }
    return verdict;
}

CoverageResult nugget_coverage(const BenchmarkItem& item,
                               const std::string& answer,
                               ModelGateway& gateway) {
    if (item.nuggets.empty()) throw Error("item has no nuggets");
    CoverageResult result;
    result.total = static_cast<int>(item.nuggets.size());
    for (const auto& nugget : item.nuggets) {
        const auto verdict = judge_nugget(item.question, answer, nugget, gateway);
        if (verdict.covered) ++result.covered;
        if (verdict.parse_flag) ++result.parse_flags;
    }
    result.fraction =
        static_cast<double>(result.covered) / static_cast<double>(result.total);
    return result;
}

PicotMatchResult picot_match(const BenchmarkItem& item,
                             const std::string& answer,
                             ModelGateway& gateway) {
    PicotMatchResult result;
    const auto gold_fields = item.gold_picot.present();
    if (gold_fields.empty()) return result;  // metric absent for the item

    json gold;
    for (const char* key : {"P", "I", "C", "O", "T"}) gold[key] = nullptr;
    for (const auto& [field, value] : gold_fields) {
        gold[std::string(1, field)] = value;
    }
    std::string prompt =
        prompts::fill(prompts::kPicotMatchTemplate, "question", item.question);
    prompt = prompts::fill(std::move(prompt), "gold_picot", gold.dump());
    prompt = prompts::fill(std::move(prompt), "answer", answer);

    json match;
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        match = j.at("match");
    } catch (const std::exception& e) {
        spdlog::warn("picot match judge unparseable for '{}': {}", item.id,
                     e.what());
        for (const auto& [field, _] : gold_fields) {
            result.field_scores[field] = 0;
        }
        result.parse_flags = static_cast<int>(gold_fields.size());
        result.rate = 0.0;
        return result;
    }

    int matched = 0;
    for (const auto& [field, _] : gold_fields) {
        const std::string key(1, field);
        int score = 0;
        if (match.contains(key) && match[key].is_number_integer()) {
            score = match[key].get<int>() == 1 ? 1 : 0;
        } else {
            ++result.parse_flags;  // field scored 0 with flag
        }
        result.field_scores[field] = score;
        matched += score;
    }
    result.rate = static_cast<double>(matched) /
                  static_cast<double>(gold_fields.size());
    return result;
}

SimilarityResult semantic_similarity(const std::string& answer,
                                     const std::string& exact_answer,
                                     ModelGateway& gateway) {
    if (answer.empty() || exact_answer.empty()) {
        throw Error("semantic_similarity requires non-empty texts");
    }
    const auto vectors = gateway.embed({answer, exact_answer});
    SimilarityResult result;
    if (norm(vectors[0]) == 0.0 || norm(vectors[1]) == 0.0) {
        result.zero_vector_flag = true;
        result.cosine = 0.0;
        return result;
    }
    result.cosine = cosine(vectors[0], vectors[1]);
    return result;
}

std::string accessibility_check(
    const std::string& question, const std::string& seed_window_id,
    const std::function<std::vector<std::string>(const std::string&)>&
        retrieve_fn,
    int top_k) {
    const auto retrieved = retrieve_fn(question);
    const auto limit = std::min<std::size_t>(retrieved.size(),
                                             static_cast<std::size_t>(top_k));
    for (std::size_t i = 0; i < limit; ++i) {
        if (retrieved[i] == seed_window_id) return "main";  // rank <= top_k
    }
    return "challenge";
}

std::vector<std::string> decompose_nuggets(const std::string& exact_answer,
                                           ModelGateway& gateway) {
    if (exact_answer.empty()) throw Error("exact answer must be non-empty");
    const std::string prompt = prompts::fill(prompts::kNuggetDecomposeTemplate,
                                             "answer", exact_answer);
    try {
        const json j = json::parse(gateway.complete(prompt, 0.0));
        auto nuggets = j.get<std::vector<std::string>>();
        std::erase_if(nuggets, [](const std::string& n) { return n.empty(); });
        if (nuggets.empty()) return {exact_answer};
        return nuggets;
    } catch (const std::exception& e) {
        spdlog::warn("nugget decomposition failed: {}", e.what());
        return {exact_answer};
    }
}

EvalReport evaluate_run(
    std::span<const BenchmarkItem> benchmark,
    const std::function<std::string(const BenchmarkItem&)>& answer_fn,
    ModelGateway& gateway) {
    EvalReport report;
    for (const auto& item : benchmark) {
        ItemEvaluation row;
        row.id = item.id;
        row.split = item.split;
        row.condition_code = item.condition_code;
        try {
            const std::string answer = answer_fn(item);
            if (!item.nuggets.empty()) {
                const auto coverage = nugget_coverage(item, answer, gateway);
                row.nugget_coverage = coverage.fraction;
                row.judge_parse_flags += coverage.parse_flags;
            }
            const auto picot = picot_match(item, answer, gateway);
            row.picot_match_rate = picot.rate;
            row.judge_parse_flags += picot.parse_flags;
            row.semantic_similarity =
                semantic_similarity(answer, item.exact_answer, gateway).cosine;
        } catch (const std::exception& e) {
            row.error = e.what();
            ++report.failed_items;
        }
        ++report.count_by_split[item.split];
        ++report.count_by_condition[item.condition_code];
        report.items.push_back(std::move(row));
    }

    std::sort(report.items.begin(), report.items.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });

    auto macro = [&](auto getter) -> std::optional<double> {
        double sum = 0.0;
        int count = 0;
        for (const auto& row : report.items) {
            const auto value = getter(row);
            if (value) {
                sum += *value;
                ++count;
            }
        }
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    };
    report.mean_nugget_coverage =
        macro([](const ItemEvaluation& r) { return r.nugget_coverage; });
    report.mean_picot_match =
        macro([](const ItemEvaluation& r) { return r.picot_match_rate; });
    report.mean_semantic_similarity =
        macro([](const ItemEvaluation& r) { return r.semantic_similarity; });
    return report;
}

void save_report(const EvalReport& report, const std::string& path) {
    json rows = json::array();
    for (const auto& row : report.items) {
        json r = {{"id", row.id},
                  {"split", row.split},
                  {"condition_code", row.condition_code},
                  {"judge_parse_flags", row.judge_parse_flags}};
        r["nugget_coverage"] =
            row.nugget_coverage ? json(*row.nugget_coverage) : json();
        r["picot_match_rate"] =
            row.picot_match_rate ? json(*row.picot_match_rate) : json();
        r["semantic_similarity"] =
            row.semantic_similarity ? json(*row.semantic_similarity) : json();
        if (!row.error.empty()) r["error"] = row.error;
        rows.push_back(std::move(r));
    }
    json aggregates;
    aggregates["mean_nugget_coverage"] = report.mean_nugget_coverage
                                             ? json(*report.mean_nugget_coverage)
                                             : json();
    aggregates["mean_picot_match"] =
        report.mean_picot_match ? json(*report.mean_picot_match) : json();
    aggregates["mean_semantic_similarity"] =
        report.mean_semantic_similarity
            ? json(*report.mean_semantic_similarity)
            : json();
    aggregates["count_by_split"] = report.count_by_split;
    aggregates["count_by_condition"] = report.count_by_condition;
    aggregates["failed_items"] = report.failed_items;

    const json j = {{"format", "tierrank-report"},
                    {"version", 1},
                    {"seed", report.seed},
                    {"items", rows},
                    {"aggregates", aggregates}};
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write report file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace tierrank
