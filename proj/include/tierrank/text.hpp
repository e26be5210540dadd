#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tierrank {

// Whitespace tokenization. Used for window token counts and for the
// deterministic hashing embedder.
std::vector<std::string> split_whitespace(std::string_view text);

std::size_t whitespace_token_count(std::string_view text);

// Lowercased, whitespace collapsed to single spaces, trimmed.
std::string normalize_text(std::string_view text);

// Lowercased alphanumeric runs ("HIIT vs MICT?" -> {"hiit","vs","mict"}).
std::vector<std::string> content_tokens(std::string_view text);

bool contains_normalized(std::string_view haystack, std::string_view needle);

}  // namespace tierrank
