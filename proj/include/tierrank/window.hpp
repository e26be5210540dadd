#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tierrank/grades.hpp"

namespace tierrank {

// A retrievable text unit with its evidence grade and provenance.
struct EvidenceWindow {
    std::string id;
    std::string doc_id;
    std::string text;  // non-empty
    EvidenceGrade grade = EvidenceGrade::E;
    std::string condition_code;
    std::vector<std::string> section_path;
    std::size_t token_count = 0;

    bool operator==(const EvidenceWindow&) const = default;
};

// Immutable-after-build collection of windows, partitioned by grade.
class WindowStore {
public:
    // Throws FormatError on duplicate id or empty text.
    void add(EvidenceWindow window);

    std::size_t size() const { return windows_.size(); }
    bool empty() const { return windows_.empty(); }
    const std::vector<EvidenceWindow>& windows() const { return windows_; }

    const EvidenceWindow* find(const std::string& id) const;
    std::optional<EvidenceGrade> grade_of(const std::string& id) const;

    // Every id appears in exactly one bucket.
    std::map<EvidenceGrade, std::vector<std::string>> grade_partition() const;

    // Windows whose grade is in `grades`, in insertion order.
    std::vector<const EvidenceWindow*> with_grades(
        const std::set<EvidenceGrade>& grades) const;

    bool operator==(const WindowStore& other) const {
        return windows_ == other.windows_;
    }

private:
    std::vector<EvidenceWindow> windows_;
    std::map<std::string, std::size_t> by_id_;
};

// JSON lines with a leading header record:
//   {"format":"tierrank-windows","version":1}
// then one window object per line.
void save_store(const WindowStore& store, const std::string& path);
WindowStore load_store(const std::string& path);

}  // namespace tierrank
