#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kecmrn {

// Ideographs, kana, hangul and related blocks; each such codepoint is one token.
bool is_cjk(char32_t cp);

// NFKC fold then lowercase. Invalid UTF-8 sequences become U+FFFD.
std::string fold_text(std::string_view s);

// fold_text, drop punctuation, then split: whitespace separates non-CJK runs
// and every CJK codepoint stands alone. "" -> {}.
std::vector<std::string> normalize_answer(std::string_view s);

// Tokens joined by single spaces; the canonical key for dictionary lookups
// and answer vocabulary entries.
std::string canonical_answer(std::string_view s);

}  // namespace kecmrn
