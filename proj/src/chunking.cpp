#include "tierrank/chunking.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tierrank/errors.hpp"
#include "tierrank/prompts.hpp"
#include "tierrank/text.hpp"

namespace tierrank {

using json = nlohmann::json;

namespace {

// Returns heading level (1..6) and title, or level 0 for a normal line.
int parse_heading(const std::string& line, std::string* title) {
    std::size_t hashes = 0;
    while (hashes < line.size() && line[hashes] == '#') ++hashes;
    if (hashes == 0 || hashes > 6) return 0;
    if (hashes < line.size() && line[hashes] != ' ' && line[hashes] != '\t') {
        return 0;
    }
    std::string t = line.substr(hashes);
    // Trim surrounding whitespace and optional closing hashes.
    const auto first = t.find_first_not_of(" \t");
    if (first == std::string::npos) {
        *title = "";
        return static_cast<int>(hashes);
    }
    auto last = t.find_last_not_of(" \t");
    t = t.substr(first, last - first + 1);
    while (!t.empty() && t.back() == '#') t.pop_back();
    while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.pop_back();
    *title = t;
    return static_cast<int>(hashes);
}

}  // namespace

std::vector<Section> split_by_headings(const std::string& markdown_doc) {
    std::vector<Section> sections;
    std::vector<std::pair<int, std::string>> stack;  // (level, title)

    Section current;  // preamble, empty path
    bool saw_heading = false;

    std::size_t pos = 0;
    while (pos <= markdown_doc.size()) {
        if (pos == markdown_doc.size()) break;
        std::size_t eol = markdown_doc.find('\n', pos);
        const bool has_newline = eol != std::string::npos;
        if (!has_newline) eol = markdown_doc.size();
        const std::string line = markdown_doc.substr(pos, eol - pos);
        pos = has_newline ? eol + 1 : markdown_doc.size();

        std::string title;
        const int level = parse_heading(line, &title);
        if (level > 0) {
            sections.push_back(std::move(current));
            while (!stack.empty() && stack.back().first >= level) {
                stack.pop_back();
            }
            stack.emplace_back(level, title);
            current = Section{};
            for (const auto& [lvl, t] : stack) current.path.push_back(t);
            saw_heading = true;
        } else {
            current.text += line;
            if (has_newline) current.text += '\n';
        }
    }
    sections.push_back(std::move(current));

    // Drop an empty preamble when real headings exist.
    if (saw_heading && sections.front().path.empty() &&
        sections.front().text.empty()) {
        sections.erase(sections.begin());
    }
    return sections;
}

std::vector<Block> number_atomic_blocks(const std::string& section_text) {
    std::vector<Block> blocks;
    std::vector<std::string> current_lines;

    auto flush = [&] {
        if (current_lines.empty()) return;
        std::string text;
        for (std::size_t i = 0; i < current_lines.size(); ++i) {
            if (i > 0) text += '\n';
            text += current_lines[i];
        }
        blocks.push_back({static_cast<int>(blocks.size()) + 1, std::move(text)});
        current_lines.clear();
    };

    std::istringstream in(section_text);
    std::string line;
    while (std::getline(in, line)) {
        const bool blank =
            line.find_first_not_of(" \t\r") == std::string::npos;
        if (blank) {
            flush();
        } else {
            current_lines.push_back(line);
        }
    }
    flush();
    return blocks;
}

namespace {

bool is_valid_grouping(const std::vector<std::vector<int>>& groups,
                       int block_count) {
    std::vector<bool> seen(static_cast<std::size_t>(block_count) + 1, false);
    int covered = 0;
    for (const auto& group : groups) {
        if (group.empty()) return false;
        for (std::size_t i = 0; i < group.size(); ++i) {
            const int idx = group[i];
            if (idx < 1 || idx > block_count) return false;
            if (seen[static_cast<std::size_t>(idx)]) return false;
            seen[static_cast<std::size_t>(idx)] = true;
            ++covered;
            // Groups must be contiguous runs to preserve paragraph order.
            if (i > 0 && idx != group[i - 1] + 1) return false;
        }
    }
    return covered == block_count;
}

std::vector<std::vector<int>> per_block_groups(int block_count) {
    std::vector<std::vector<int>> groups;
    groups.reserve(static_cast<std::size_t>(block_count));
    for (int i = 1; i <= block_count; ++i) groups.push_back({i});
    return groups;
}

}  // namespace

std::vector<std::vector<int>> semantic_group_blocks(
    const std::vector<Block>& blocks, ModelGateway& gateway) {
    if (blocks.empty()) return {};
    if (blocks.size() == 1) return {{1}};

    std::string rendered;
    for (const auto& b : blocks) {
        rendered += "[" + std::to_string(b.index) + "] " + b.text + "\n";
    }
    const std::string prompt =
        prompts::fill(prompts::kGroupBlocksTemplate, "blocks", rendered);

    const int n = static_cast<int>(blocks.size());
    try {
        const std::string reply = gateway.complete(prompt, 0.0);
        const json j = json::parse(reply);
        auto groups = j.get<std::vector<std::vector<int>>>();
        if (!is_valid_grouping(groups, n)) {
            spdlog::warn(
                "semantic grouping reply is not a contiguous partition of 1..{}; "
                "falling back to one group per block",
                n);
            return per_block_groups(n);
        }
        return groups;
    } catch (const std::exception& e) {
        spdlog::warn("semantic grouping failed ({}); one group per block",
                     e.what());
        return per_block_groups(n);
    }
}

std::vector<EvidenceWindow> build_windows(
    const std::string& doc_id, EvidenceGrade grade,
    const std::string& condition_code,
    const std::vector<GroupedSection>& grouped_sections) {
    std::vector<EvidenceWindow> windows;
    int counter = 0;
    for (const auto& section : grouped_sections) {
        for (const auto& group : section.groups) {
            std::string text;
            for (const auto& block : group) {
                if (block.empty()) continue;
                if (!text.empty()) text += "\n\n";
                text += block;
            }
            if (text.empty()) {
                spdlog::warn("skipping empty group in doc '{}'", doc_id);
                continue;
            }
            ++counter;
            char suffix[16];
            std::snprintf(suffix, sizeof(suffix), "#w%04d", counter);
            EvidenceWindow w;
            w.id = doc_id + suffix;
            w.doc_id = doc_id;
            w.text = std::move(text);
            w.grade = grade;
            w.condition_code = condition_code;
            w.section_path = section.section_path;
            w.token_count = whitespace_token_count(w.text);
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

std::vector<EvidenceWindow> ingest_document(
    const std::string& doc_id, EvidenceGrade grade,
    const std::string& condition_code, const std::string& markdown,
    const IngestOptions& options, ModelGateway& gateway) {
    std::string cleaned = markdown;
    for (const auto& pattern : options.strip_patterns) {
        try {
            std::regex re(pattern);
            std::string next;
            std::istringstream in(cleaned);
            std::string line;
            while (std::getline(in, line)) {
                if (!std::regex_search(line, re)) {
                    next += line;
                    next += '\n';
                }
            }
            cleaned = std::move(next);
        } catch (const std::regex_error& e) {
            throw ConfigError("bad strip pattern '" + pattern + "': " + e.what());
        }
    }

    std::vector<GroupedSection> grouped;
    for (const auto& section : split_by_headings(cleaned)) {
        const auto blocks = number_atomic_blocks(section.text);
        if (blocks.empty()) continue;
        std::vector<std::vector<int>> groups;
        if (options.semantic_grouping) {
            groups = semantic_group_blocks(blocks, gateway);
        } else {
            groups.reserve(blocks.size());
            for (const auto& b : blocks) groups.push_back({b.index});
        }
        GroupedSection gs;
        gs.section_path = section.path;
        for (const auto& group : groups) {
            std::vector<std::string> texts;
            texts.reserve(group.size());
            for (int idx : group) {
                texts.push_back(blocks[static_cast<std::size_t>(idx) - 1].text);
            }
            gs.groups.push_back(std::move(texts));
        }
        grouped.push_back(std::move(gs));
    }
    return build_windows(doc_id, grade, condition_code, grouped);
}

}  // namespace tierrank
