#include "clmx/utf8.hpp"

#include <cstdint>

#include "clmx/errors.hpp"

namespace clmx::utf8 {

namespace {

int sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 0;
}

// Decodes the codepoint starting at s[i]; advances i. Returns the scalar
// value, throws EncodingError on malformed sequences.
std::uint32_t decode_at(std::string_view s, std::size_t& i) {
    unsigned char lead = static_cast<unsigned char>(s[i]);
    int len = sequence_length(lead);
    if (len == 0 || i + len > s.size()) {
        throw EncodingError("malformed UTF-8 sequence");
    }
    std::uint32_t cp = 0;
    switch (len) {
        case 1: cp = lead; break;
        case 2: cp = lead & 0x1F; break;
        case 3: cp = lead & 0x0F; break;
        case 4: cp = lead & 0x07; break;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char c = static_cast<unsigned char>(s[i + k]);
        if ((c & 0xC0) != 0x80) throw EncodingError("malformed UTF-8 continuation byte");
        cp = (cp << 6) | (c & 0x3F);
    }
    // reject overlong encodings and surrogates
    static constexpr std::uint32_t min_for_len[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[len] || (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
        throw EncodingError("invalid UTF-8 codepoint");
    }
    i += len;
    return cp;
}

std::string encode(std::uint32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::uint32_t decode_one(std::string_view cp_str) {
    std::size_t i = 0;
    std::uint32_t cp = decode_at(cp_str, i);
    if (i != cp_str.size()) throw EncodingError("expected a single codepoint");
    return cp;
}

}  // namespace

std::vector<std::string> codepoints(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t start = i;
        decode_at(s, i);
        out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::size_t length(std::string_view s) {
    std::size_t n = 0, i = 0;
    while (i < s.size()) {
        decode_at(s, i);
        ++n;
    }
    return n;
}

std::string fold_case(std::string_view codepoint) {
    std::uint32_t cp = decode_one(codepoint);
    if (cp >= 'A' && cp <= 'Z') return encode(cp + 32);
    // Latin-1 supplement uppercase, excluding the multiplication sign
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return encode(cp + 32);
    return std::string(codepoint);
}

bool is_letter(std::string_view codepoint) {
    std::uint32_t cp = decode_one(codepoint);
    if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return true;
    if (cp >= 0xC0 && cp <= 0xFF && cp != 0xD7 && cp != 0xF7) return true;
    return false;
}

}  // namespace clmx::utf8
