#include "tierrank/grades.hpp"

#include <cctype>

#include "tierrank/errors.hpp"

namespace tierrank {

std::string_view grade_label(EvidenceGrade g) {
    switch (g) {
        case EvidenceGrade::A: return "A";
        case EvidenceGrade::B: return "B";
        case EvidenceGrade::C: return "C";
        case EvidenceGrade::D: return "D";
        case EvidenceGrade::E: return "E";
    }
    return "?";
}

EvidenceGrade parse_grade(std::string_view text) {
    if (text.size() == 1) {
        switch (std::toupper(static_cast<unsigned char>(text[0]))) {
            case 'A': return EvidenceGrade::A;
            case 'B': return EvidenceGrade::B;
            case 'C': return EvidenceGrade::C;
            case 'D': return EvidenceGrade::D;
            case 'E': return EvidenceGrade::E;
            default: break;
        }
    }
    throw FormatError("invalid evidence grade: '" + std::string(text) +
                      "' (expected A..E)");
}

}  // namespace tierrank
