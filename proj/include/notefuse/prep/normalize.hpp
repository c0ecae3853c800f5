#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "notefuse/core/errors.hpp"

namespace notefuse::prep {

// Note-text normalization: case folding, accent stripping, Danish
// transliteration and word-boundary abbreviation expansion. Idempotent:
// expansion values are plain lowercase ASCII that contain no table keys.

struct AbbreviationTable {
    // kept sorted by descending key length so the scanner is longest-match
    std::vector<std::pair<std::string, std::string>> entries;

    void add(std::string key, std::string value) {
        entries.emplace_back(std::move(key), std::move(value));
        std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return a.first.size() > b.first.size();
        });
    }
};

// Seeded with the clinical shorthand the corpus generator emits. Shipped as
// an editable resource (resources/abbreviations.txt); this is the built-in copy.
inline const AbbreviationTable& default_abbreviations() {
    static const AbbreviationTable table = [] {
        AbbreviationTable t;
        const std::pair<const char*, const char*> defaults[] = {
            {"hr", "hours"},       {"hrs", "hours"},      {"hr(s)", "hours"},
            {"min", "minutes"},    {"mins", "minutes"},   {"min(s)", "minutes"},
            {"yr", "years"},       {"yrs", "years"},      {"yr(s)", "years"},
            {"wk", "weeks"},       {"wks", "weeks"},      {"mo", "months"},
            {"mos", "months"},     {"bp", "blood pressure"}, {"hx", "history"},
            {"sx", "symptoms"},    {"fx", "fracture"},    {"c/o", "complains of"},
            {"w/", "with "},       {"w/o", "without"},    {"sob", "shortness of breath"},
            {"afib", "atrial fibrillation"},
        };
        for (const auto& [k, v] : defaults) t.add(k, v);
        return t;
    }();
    return table;
}

// Lines of "key=value"; '#' starts a comment.
inline AbbreviationTable load_abbreviations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read abbreviation table: " + path);
    AbbreviationTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw io_error("malformed abbreviation line: " + line);
        t.add(line.substr(0, eq), line.substr(eq + 1));
    }
    return t;
}

namespace detail {

// Decodes one UTF-8 codepoint; returns false on an invalid sequence, in which
// case the caller drops a single byte (dropping keeps normalization idempotent).
inline bool decode_utf8(const std::string& s, size_t& i, uint32_t& cp) {
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        cp = b0;
        i += 1;
        return true;
    }
    auto cont = [&](size_t k) { return k < s.size() && (byte(k) & 0xc0) == 0x80; };
    if ((b0 & 0xe0) == 0xc0 && cont(i + 1)) {
        cp = (uint32_t(b0 & 0x1f) << 6) | (byte(i + 1) & 0x3f);
        i += 2;
        return cp >= 0x80;
    }
    if ((b0 & 0xf0) == 0xe0 && cont(i + 1) && cont(i + 2)) {
        cp = (uint32_t(b0 & 0x0f) << 12) | (uint32_t(byte(i + 1) & 0x3f) << 6) | (byte(i + 2) & 0x3f);
        i += 3;
        return cp >= 0x800;
    }
    if ((b0 & 0xf8) == 0xf0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        cp = (uint32_t(b0 & 0x07) << 18) | (uint32_t(byte(i + 1) & 0x3f) << 12) |
             (uint32_t(byte(i + 2) & 0x3f) << 6) | (byte(i + 3) & 0x3f);
        i += 4;
        return cp >= 0x10000 && cp <= 0x10ffff;
    }
    return false;
}

inline void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xc0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xe0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        out += static_cast<char>(0xf0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    }
}

// Appends the lowercased, accent-stripped replacement for one codepoint.
// Returns false when the codepoint passes through untouched.
inline bool fold_codepoint(uint32_t cp, std::string& out) {
    if (cp >= 'A' && cp <= 'Z') {
        out += static_cast<char>(cp - 'A' + 'a');
        return true;
    }
    switch (cp) {
        case 0xC6: case 0xE6: out += "ae"; return true;   // AE ligature
        case 0xD8: case 0xF8: out += "oe"; return true;   // O with stroke
        case 0xC5: case 0xE5: out += "aa"; return true;   // A with ring
        case 0x152: case 0x153: out += "oe"; return true; // OE ligature
        case 0x132: case 0x133: out += "ij"; return true;
        case 0xDF: out += "ss"; return true;
        case 0xDE: case 0xFE: out += "th"; return true;   // thorn
        case 0xD0: case 0xF0: out += 'd'; return true;    // eth
        case 0xC7: case 0xE7: out += 'c'; return true;
        case 0xD1: case 0xF1: out += 'n'; return true;
        case 0xDD: case 0xFD: case 0xFF: case 0x178: out += 'y'; return true;
        case 0x17F: out += 's'; return true;              // long s
        default: break;
    }
    struct Range {
        uint32_t lo, hi;
        char base;
    };
    static constexpr Range kRanges[] = {
        {0xC0, 0xC4, 'a'}, {0xE0, 0xE4, 'a'}, {0xC8, 0xCB, 'e'}, {0xE8, 0xEB, 'e'},
        {0xCC, 0xCF, 'i'}, {0xEC, 0xEF, 'i'}, {0xD2, 0xD6, 'o'}, {0xF2, 0xF6, 'o'},
        {0xD9, 0xDC, 'u'}, {0xF9, 0xFC, 'u'},
        // Latin Extended-A, letter-with-diacritic blocks
        {0x100, 0x105, 'a'}, {0x106, 0x10D, 'c'}, {0x10E, 0x111, 'd'}, {0x112, 0x11B, 'e'},
        {0x11C, 0x123, 'g'}, {0x124, 0x127, 'h'}, {0x128, 0x131, 'i'}, {0x134, 0x135, 'j'},
        {0x136, 0x138, 'k'}, {0x139, 0x142, 'l'}, {0x143, 0x14B, 'n'}, {0x14C, 0x151, 'o'},
        {0x154, 0x159, 'r'}, {0x15A, 0x161, 's'}, {0x162, 0x167, 't'}, {0x168, 0x173, 'u'},
        {0x174, 0x175, 'w'}, {0x176, 0x177, 'y'}, {0x179, 0x17E, 'z'},
    };
    for (const auto& r : kRanges) {
        if (cp >= r.lo && cp <= r.hi) {
            out += r.base;
            return true;
        }
    }
    return false;
}

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

}  // namespace detail

// Case folding + accent stripping + Danish transliteration, then abbreviation
// expansion on word boundaries.
inline std::string normalize_note_text(const std::string& text,
                                       const AbbreviationTable& abbrev = default_abbreviations()) {
    std::string folded;
    folded.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        uint32_t cp = 0;
        const size_t before = i;
        if (!detail::decode_utf8(text, i, cp)) {
            i = before + 1;  // drop invalid byte
            continue;
        }
        if (!detail::fold_codepoint(cp, folded)) detail::encode_utf8(cp, folded);
    }

    std::string out;
    out.reserve(folded.size());
    size_t at = 0;
    while (at < folded.size()) {
        bool matched = false;
        const bool left_ok = at == 0 || !detail::is_word_char(folded[at - 1]);
        if (left_ok) {
            for (const auto& [key, value] : abbrev.entries) {
                if (folded.compare(at, key.size(), key) != 0) continue;
                const size_t end = at + key.size();
                // A right word-boundary is required only when the key itself
                // ends in a word character ("hr" must not fire inside "hrx",
                // while "hr(s)" and "w/" bind regardless of what follows).
                if (detail::is_word_char(key.back()) && end < folded.size() &&
                    detail::is_word_char(folded[end]))
                    continue;
                out += value;
                at = end;
                matched = true;
                break;
            }
        }
        if (!matched) {
            out += folded[at];
            ++at;
        }
    }
    return out;
}

}  // namespace notefuse::prep
