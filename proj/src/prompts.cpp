#include "tierrank/prompts.hpp"

namespace tierrank::prompts {

std::string fill(std::string tmpl, const std::string& key,
                 const std::string& value) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = tmpl.find(token, pos)) != std::string::npos) {
        tmpl.replace(pos, token.size(), value);
        pos += value.size();
    }
    return tmpl;
}

std::string render_anchor_lines(const PicotAnchors& anchors) {
    std::string out;
    for (const auto& [field, value] : anchors.present()) {
        out += "- ";
        out += field;
        out += ": ";
        out += value;
        out += "\n";
    }
    if (out.empty()) out = "(no anchors extracted; none may be invented)\n";
    return out;
}

const std::string kHydeTemplate = R"(You are a sports rehabilitation clinician.
Write a concise, evidence-style passage that answers the question, explicitly following PICOT:
- P: population characteristics and key constraints
- I: intervention details (dose/frequency/intensity/progression)
- C: comparator if applicable
- O: outcomes and relevant measures
- T: time horizon / follow-up

Constraints:
- Do NOT cite sources.
- Use neutral clinical language.
- 5-8 sentences, concise, declarative, paper-like.
- Reuse the anchor phrases below verbatim. Do not invent values for anchors that are not listed.

Anchors:
{anchors}
Question:
{question}

Output ONLY the hypothetical evidence window.)";

const std::string kPicotExtractTemplate =
    R"(You are a medical information extraction assistant.
Extract the P/I/C/O/T elements that are explicitly stated in the question below.

Rules:
- Copy surface forms from the question verbatim.
- Do not invent missing fields. If a field is not stated, output null.
- Output RFC8259-compliant JSON only.

Return JSON:
{"P": "...|null", "I": "...|null", "C": "...|null", "O": "...|null", "T": "...|null"}

Question: {question})";

const std::string kDecomposeTemplate =
    R"(You are a retrieval planner for a clinical knowledge graph.
Decompose the question into subproblems targeting the graph index levels:
"node" (entity lookup), "triple" (relation matching), "community" (topic verification).

Schema: {schema}

Return a JSON array like:
[{"text": "...", "level": "node|triple|community"}]

Question: {question})";

const std::string kSufficiencyTemplate =
    R"(You are a retrieval controller. Given the question and the evidence
windows gathered so far, decide whether the evidence suffices to answer.

Return RFC8259-compliant JSON only:
{"sufficient": true/false, "subquery": "follow-up query when insufficient, else empty"}

Question: {question}
Evidence so far:
{evidence})";

const std::string kGroupBlocksTemplate =
    R"(You are preparing a medical document for retrieval. Below are numbered
atomic blocks from one section. Group consecutive blocks that belong to the
same self-contained clinical statement.

Rules:
- Every block index must appear in exactly one group.
- Each group must be a contiguous ascending run of indices.
- Output a JSON array of arrays of block indices, nothing else.

Blocks:
{blocks})";

const std::string kExtractTriplesTemplate =
    R"(You are a clinical information extraction agent. Extract typed triples
from the passage, constrained to the schema below. Skip anything that does
not fit a listed type.

Schema: {schema}

Return RFC8259-compliant JSON only:
{"triples": [
  {"kind": "entity_relation", "head": {"name": "...", "type": "..."},
   "relation": "...", "tail": {"name": "...", "type": "..."}},
  {"kind": "entity_attribute", "head": {"name": "...", "type": "..."},
   "relation": "...", "tail": {"name": "<value>", "type": "<attribute type>"}}
]}

Passage: <<<{window}>>>)";

const std::string kSchemaExtensionTemplate =
    R"(You are maintaining the extraction schema for a clinical knowledge
graph. Propose new entity, relation, or attribute types that this passage
needs and the current schema lacks. Give each proposal a confidence in [0,1].

Current schema: {schema}

Return RFC8259-compliant JSON only:
{"entity_types": [{"name": "...", "confidence": 0.0}],
 "relation_types": [{"name": "...", "confidence": 0.0}],
 "attribute_types": [{"name": "...", "confidence": 0.0}]}

Passage: <<<{window}>>>)";

const std::string kCommunityKeywordsTemplate =
    R"(The entities below form one community of a clinical knowledge graph.
Label the community with up to {count} short keywords.

Entities: {entities}

Return a JSON array of keyword strings, nothing else.)";

const std::string kNuggetJudgeTemplate = R"(You are a clinical QA evaluator.
Given the question, a system answer, and ONE ground-truth nugget,
judge whether the nugget is explicitly covered by the system answer.

Rules:
- Only judge coverage by the system answer text itself.
- Treat synonymous expressions as covered.
- If the nugget is contradicted or missing, mark it as not covered.
- Output RFC8259-compliant JSON only.

Return JSON:
{
  "covered": true/false,
  "reason": "brief justification"
}

Question: {question}
System answer: {answer}
GT nugget: {nugget})";

const std::string kPicotMatchTemplate =
    R"(You are a medical information extraction and matching assistant.
Given gold PICOT fields and the system answer, extract PICOT from the system answer and compare field-by-field.

Rules:
- Do not invent missing fields. If a field is not stated, output null.
- Consider medically equivalent synonyms as a match.
- Exclude GT fields that are explicitly marked as null/missing from scoring.
- Output RFC8259-compliant JSON only.

Return JSON:
{
  "system_picot": {"P": "...|null", "I": "...|null", "C": "...|null", "O": "...|null", "T": "...|null"},
  "match": {"P": 0/1, "I": 0/1, "C": 0/1, "O": 0/1, "T": 0/1},
  "reason": {"P": "...", "I": "...", "C": "...", "O": "...", "T": "..."}
}

Question: {question}
Gold PICOT: {gold_picot}
System answer: {answer})";

const std::string kNuggetDecomposeTemplate =
    R"(Decompose the reference answer below into atomic factual nuggets.
Each nugget is one short declarative statement carrying a single fact.

Return a JSON array of nugget strings, nothing else.

Reference answer: {answer})";

const std::string kStructuredAnswerTemplate =
    R"(You are a sports rehabilitation clinician answering from the evidence
windows below. Write exactly three paragraphs:
1. A concise summary of the core answer.
2. Guideline and supporting evidence details, by evidence grade.
3. A comparison of the question and the evidence, noting limitations.

Question: {question}

Evidence windows:
{evidence})";

}  // namespace tierrank::prompts
