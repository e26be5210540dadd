#pragma once

#include <string>

#include "tierrank/retrieval.hpp"

namespace tierrank::prompts {

// Default templates for every gateway-facing prompt. `{placeholders}` are
// substituted with fill(); all templates are overridable through the
// config (`prompts.<name>_file = path`).

std::string fill(std::string tmpl, const std::string& key,
                 const std::string& value);

// -- retrieval ---------------------------------------------------------------
extern const std::string kHydeTemplate;          // {question} {anchors}
extern const std::string kPicotExtractTemplate;  // {question}
extern const std::string kDecomposeTemplate;     // {question} {schema}
extern const std::string kSufficiencyTemplate;   // {question} {evidence}

// -- corpus ------------------------------------------------------------------
extern const std::string kGroupBlocksTemplate;   // {blocks}

// -- graph -------------------------------------------------------------------
extern const std::string kExtractTriplesTemplate;   // {schema} {window}
extern const std::string kSchemaExtensionTemplate;  // {schema} {window}
extern const std::string kCommunityKeywordsTemplate;  // {entities} {count}

// -- eval --------------------------------------------------------------------
extern const std::string kNuggetJudgeTemplate;  // {question} {answer} {nugget}
extern const std::string kPicotMatchTemplate;   // {question} {gold_picot} {answer}
extern const std::string kNuggetDecomposeTemplate;  // {answer}

// -- answer generation -------------------------------------------------------
extern const std::string kStructuredAnswerTemplate;  // {question} {evidence}

std::string render_anchor_lines(const PicotAnchors& anchors);

}  // namespace tierrank::prompts
