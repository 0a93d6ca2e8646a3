#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace clmx::utf8 {

// Splits a UTF-8 string into codepoints, each returned as its own UTF-8
// string. Throws EncodingError on malformed input.
std::vector<std::string> codepoints(std::string_view s);

// Number of codepoints; throws EncodingError on malformed input.
std::size_t length(std::string_view s);

// Case-folds a single codepoint: ASCII A-Z plus the Latin-1 supplement
// uppercase range (covers Ä, Ö, Å and friends). Everything else is
// returned unchanged.
std::string fold_case(std::string_view codepoint);

// True if the codepoint is an ASCII or Latin-1 letter.
bool is_letter(std::string_view codepoint);

}  // namespace clmx::utf8
