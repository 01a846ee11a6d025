#include "mailgraph/unicode.hpp"

namespace mailgraph::unicode {

char32_t next_code_point(std::string_view text, std::size_t& pos) noexcept
{
    const auto lead = static_cast<unsigned char>(text[pos]);
    if (lead < 0x80) {
        ++pos;
        return lead;
    }
    int extra = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
        min = 0x80;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
        min = 0x800;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
        min = 0x10000;
    } else {
        ++pos;
        return replacement_char;
    }
    if (pos + extra >= text.size()) {
        ++pos;
        return replacement_char;
    }
    for (int i = 1; i <= extra; ++i) {
        const auto c = static_cast<unsigned char>(text[pos + i]);
        if ((c & 0xC0) != 0x80) {
            ++pos;
            return replacement_char;
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return replacement_char;
    }
    pos += extra + 1;
    return cp;
}

void append_utf8(std::string& out, char32_t cp)
{
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
}

namespace {

constexpr bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

}  // namespace

bool is_letter(char32_t cp) noexcept
{
    if (cp < 0x80)
        return in(cp, 'a', 'z') || in(cp, 'A', 'Z');
    if (in(cp, 0xC0, 0x24F))
        return cp != 0xD7 && cp != 0xF7;
    if (cp == 0xAA || cp == 0xB5 || cp == 0xBA)
        return true;
    return in(cp, 0x370, 0x3FF)      // Greek
           || in(cp, 0x400, 0x52F)   // Cyrillic
           || in(cp, 0x531, 0x587)   // Armenian
           || in(cp, 0x5D0, 0x5EA)   // Hebrew
           || in(cp, 0x620, 0x64A)   // Arabic
           || in(cp, 0x1E00, 0x1EFF) // Latin extended additional
           || in(cp, 0x3040, 0x30FF) // kana
           || in(cp, 0x3400, 0x4DBF) || in(cp, 0x4E00, 0x9FFF) || in(cp, 0xAC00, 0xD7A3);
}

bool is_digit(char32_t cp) noexcept { return in(cp, '0', '9'); }

char32_t to_lower(char32_t cp) noexcept
{
    if (in(cp, 'A', 'Z'))
        return cp + 0x20;
    if (cp < 0xC0)
        return cp;
    if (in(cp, 0xC0, 0xDE))
        return cp == 0xD7 ? cp : cp + 0x20;
    if (cp == 0x130)
        return 'i';
    if (in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177))
        return (cp % 2 == 0) ? cp + 1 : cp;
    if (in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E))
        return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp == 0x178)
        return 0xFF;
    // Romanian comma-below letters and their neighbours.
    if (in(cp, 0x200, 0x233))
        return (cp % 2 == 0) ? cp + 1 : cp;
    if (in(cp, 0x391, 0x3A9) && cp != 0x3A2)
        return cp + 0x20;
    if (in(cp, 0x410, 0x42F))
        return cp + 0x20;
    if (in(cp, 0x400, 0x40F))
        return cp + 0x50;
    if (in(cp, 0x460, 0x481) || in(cp, 0x48A, 0x4BF) || in(cp, 0x4D0, 0x52F))
        return (cp % 2 == 0) ? cp + 1 : cp;
    if (in(cp, 0x1E00, 0x1E95) || in(cp, 0x1EA0, 0x1EFF))
        return (cp % 2 == 0) ? cp + 1 : cp;
    return cp;
}

bool sanitize_utf8(std::string_view in, std::string& out)
{
    bool valid = true;
    std::size_t pos = 0;
    out.reserve(out.size() + in.size());
    while (pos < in.size()) {
        const std::size_t start = pos;
        const char32_t cp = next_code_point(in, pos);
        if (cp == replacement_char && !(pos - start == 3 && in.substr(start, 3) == "\xEF\xBF\xBD")) {
            valid = false;
            append_utf8(out, replacement_char);
        } else {
            out.append(in.substr(start, pos - start));
        }
    }
    return valid;
}

std::string latin1_to_utf8(std::string_view in)
{
    std::string out;
    out.reserve(in.size() * 2);
    for (unsigned char c : in)
        append_utf8(out, c);
    return out;
}

}  // namespace mailgraph::unicode
