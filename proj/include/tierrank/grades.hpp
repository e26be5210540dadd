#pragma once

#include <array>
#include <string>
#include <string_view>

namespace tierrank {

// Evidence hierarchy, ordered from most to least trusted:
//   A = guidelines / expert consensus
//   B = systematic reviews / meta-analyses
//   C = randomized controlled trials
//   D = cohort studies
//   E = other studies
enum class EvidenceGrade : int { A = 0, B = 1, C = 2, D = 3, E = 4 };

inline constexpr std::array<EvidenceGrade, 5> kAllGrades = {
    EvidenceGrade::A, EvidenceGrade::B, EvidenceGrade::C, EvidenceGrade::D,
    EvidenceGrade::E};

// 0 for A .. 4 for E; lower rank means stronger evidence.
constexpr int grade_rank(EvidenceGrade g) { return static_cast<int>(g); }

constexpr bool outranks(EvidenceGrade a, EvidenceGrade b) {
    return grade_rank(a) < grade_rank(b);
}

std::string_view grade_label(EvidenceGrade g);

// Accepts "A".."E" (case-insensitive); throws FormatError otherwise.
EvidenceGrade parse_grade(std::string_view text);

}  // namespace tierrank
