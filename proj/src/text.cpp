#include "kecmrn/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "kecmrn/errors.hpp"

namespace kecmrn {

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
         (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
         (cp >= 0x20000 && cp <= 0x323AF) ||  // extensions B..H
         (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
         (cp >= 0x3040 && cp <= 0x30FF) ||    // hiragana, katakana
         (cp >= 0x31F0 && cp <= 0x31FF) ||    // katakana phonetic extensions
         (cp >= 0xAC00 && cp <= 0xD7AF) ||    // hangul syllables
         (cp >= 0x3100 && cp <= 0x312F);      // bopomofo
}

std::string fold_text(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC normalizer unavailable");
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString folded = nfkc->normalize(text, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC normalization failed");
  folded.toLower(icu::Locale::getRoot());
  std::string out;
  folded.toUTF8String(out);
  return out;
}

std::vector<std::string> normalize_answer(std::string_view s) {
  const std::string folded = fold_text(s);
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  const auto* bytes = reinterpret_cast<const uint8_t*>(folded.data());
  const int32_t length = static_cast<int32_t>(folded.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 cp;
    U8_NEXT(bytes, i, length, cp);
    if (cp < 0) cp = 0xFFFD;
    if (u_ispunct(cp)) continue;
    if (u_isUWhiteSpace(cp) || cp == 0x200B) {
      flush();
    } else if (is_cjk(static_cast<char32_t>(cp))) {
      flush();
      tokens.emplace_back(folded, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
    } else {
      current.append(folded, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
    }
  }
  flush();
  return tokens;
}

std::string canonical_answer(std::string_view s) {
  std::string joined;
  for (const auto& t : normalize_answer(s)) {
    if (!joined.empty()) joined += ' ';
    joined += t;
  }
  return joined;
}

}  // namespace kecmrn
