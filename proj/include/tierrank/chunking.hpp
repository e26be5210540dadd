#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tierrank/gateway.hpp"
#include "tierrank/grades.hpp"
#include "tierrank/window.hpp"

namespace tierrank {

struct Section {
    std::vector<std::string> path;  // heading nesting, outermost first
    std::string text;               // body lines verbatim, headings removed
};

// Splits Markdown into sections by ATX heading level. Concatenating the
// section texts in order reproduces the input minus the heading lines.
// A headingless document yields a single section with an empty path.
std::vector<Section> split_by_headings(const std::string& markdown_doc);

struct Block {
    int index = 0;  // 1-based, consecutive
    std::string text;
};

// Paragraph split on blank lines.
std::vector<Block> number_atomic_blocks(const std::string& section_text);

// Asks the gateway to group atomic blocks into semantically coherent,
// contiguous runs. The reply must be a JSON array of arrays of 1-based
// block indices forming a partition. Anything else falls back to one
// group per block (warning logged); ingestion never aborts on a bad reply.
std::vector<std::vector<int>> semantic_group_blocks(
    const std::vector<Block>& blocks, ModelGateway& gateway);

struct GroupedSection {
    std::vector<std::string> section_path;
    std::vector<std::vector<std::string>> groups;  // block texts per group
};

// One window per group; group blocks joined by a blank line; token counts
// by whitespace tokenization. Empty group text is skipped with a warning.
std::vector<EvidenceWindow> build_windows(
    const std::string& doc_id, EvidenceGrade grade,
    const std::string& condition_code,
    const std::vector<GroupedSection>& grouped_sections);

struct IngestOptions {
    std::vector<std::string> strip_patterns;  // regex, applied per line
    bool semantic_grouping = true;            // false -> one group per block
};

// Full pipeline for one document: strip noise, split by headings, number
// atomic blocks, group, and build windows.
std::vector<EvidenceWindow> ingest_document(
    const std::string& doc_id, EvidenceGrade grade,
    const std::string& condition_code, const std::string& markdown,
    const IngestOptions& options, ModelGateway& gateway);

}  // namespace tierrank
