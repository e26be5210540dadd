#include "tierrank/window.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "tierrank/errors.hpp"

namespace tierrank {

using json = nlohmann::json;

void WindowStore::add(EvidenceWindow window) {
    if (window.text.empty()) {
        throw FormatError("window '" + window.id + "' has empty text");
    }
    if (by_id_.count(window.id)) {
        throw FormatError("duplicate window id: " + window.id);
    }
    by_id_[window.id] = windows_.size();
    windows_.push_back(std::move(window));
}

const EvidenceWindow* WindowStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &windows_[it->second];
}

std::optional<EvidenceGrade> WindowStore::grade_of(const std::string& id) const {
    const EvidenceWindow* w = find(id);
    if (!w) return std::nullopt;
    return w->grade;
}

std::map<EvidenceGrade, std::vector<std::string>> WindowStore::grade_partition()
    const {
    std::map<EvidenceGrade, std::vector<std::string>> out;
    for (const auto& w : windows_) out[w.grade].push_back(w.id);
    return out;
}

std::vector<const EvidenceWindow*> WindowStore::with_grades(
    const std::set<EvidenceGrade>& grades) const {
    std::vector<const EvidenceWindow*> out;
    for (const auto& w : windows_) {
        if (grades.count(w.grade)) out.push_back(&w);
    }
    return out;
}

namespace {

constexpr const char* kFormat = "tierrank-windows";
constexpr int kVersion = 1;

json window_to_json(const EvidenceWindow& w) {
    return json{{"id", w.id},
                {"doc_id", w.doc_id},
                {"text", w.text},
                {"grade", std::string(grade_label(w.grade))},
                {"condition_code", w.condition_code},
                {"section_path", w.section_path},
                {"token_count", w.token_count}};
}

EvidenceWindow window_from_json(const json& j) {
    EvidenceWindow w;
    try {
        w.id = j.at("id").get<std::string>();
        w.doc_id = j.at("doc_id").get<std::string>();
        w.text = j.at("text").get<std::string>();
        w.grade = parse_grade(j.at("grade").get<std::string>());
        w.condition_code = j.at("condition_code").get<std::string>();
        w.section_path = j.at("section_path").get<std::vector<std::string>>();
        w.token_count = j.at("token_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid window record: ") + e.what());
    }
    return w;
}

}  // namespace

void save_store(const WindowStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write window store: " + path);
    out << json{{"format", kFormat}, {"version", kVersion}}.dump() << "\n";
    for (const auto& w : store.windows()) {
        out << window_to_json(w).dump() << "\n";
    }
}

WindowStore load_store(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open window store: " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("window store is empty (missing header): " + path);
    }
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError("window store header parse error: " +
                          std::string(e.what()));
    }
    if (header.value("format", "") != kFormat) {
        throw FormatError("not a window store file: " + path);
    }
    if (header.value("version", -1) != kVersion) {
        throw FormatError("unsupported window store version in " + path);
    }
    WindowStore store;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("window store line " + std::to_string(line_no) +
                              ": " + e.what());
        }
        store.add(window_from_json(j));
    }
    return store;
}

}  // namespace tierrank
