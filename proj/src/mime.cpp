#include "mailgraph/mime.hpp"

#include "mailgraph/unicode.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <iconv.h>
#include <map>

namespace mailgraph {

std::string_view to_string(SourceKind kind) noexcept
{
    switch (kind) {
    case SourceKind::imap: return "imap";
    case SourceKind::pop3: return "pop3";
    case SourceKind::mbox: return "mbox";
    }
    return "imap";
}

std::optional<SourceKind> source_kind_from_string(std::string_view name) noexcept
{
    if (name == "imap")
        return SourceKind::imap;
    if (name == "pop3")
        return SourceKind::pop3;
    if (name == "mbox")
        return SourceKind::mbox;
    return std::nullopt;
}

}  // namespace mailgraph

namespace mailgraph::mime {

namespace {

constexpr int max_nesting = 32;

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s)
{
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    return -1;
}

struct Line {
    std::size_t begin;  // first byte
    std::size_t end;    // one past the last content byte (before CR/LF)
    std::size_t next;   // start of the following line
};

// Splits on LF, treating a preceding CR as part of the terminator.
std::vector<Line> split_lines(std::string_view s)
{
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto nl = s.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back({pos, s.size(), s.size()});
            break;
        }
        std::size_t end = nl;
        if (end > pos && s[end - 1] == '\r')
            --end;
        lines.push_back({pos, end, nl + 1});
        pos = nl + 1;
    }
    return lines;
}

struct HeaderSplit {
    HeaderList headers;
    std::string_view body;
};

HeaderSplit split_header(std::string_view entity, std::vector<std::string>& warnings)
{
    HeaderSplit out;
    bool separated = false;
    std::size_t body_start = entity.size();
    const auto lines = split_lines(entity);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& ln = lines[i];
        const auto text = entity.substr(ln.begin, ln.end - ln.begin);
        if (text.empty()) {
            separated = true;
            body_start = ln.next;
            break;
        }
        if (text.front() == ' ' || text.front() == '\t') {
            if (out.headers.empty()) {
                warnings.push_back("continuation line without header at line " + std::to_string(i + 1));
                continue;
            }
            out.headers.back().second.append(text);
            continue;
        }
        const auto colon = text.find(':');
        if (colon == std::string_view::npos || colon == 0 ||
            trim(text.substr(0, colon)).find_first_of(" \t") != std::string_view::npos) {
            warnings.push_back("malformed header line " + std::to_string(i + 1));
            continue;
        }
        out.headers.emplace_back(lower(trim(text.substr(0, colon))),
                                 std::string(trim(text.substr(colon + 1))));
    }
    if (!separated)
        warnings.emplace_back("missing body separator");
    out.body = entity.substr(std::min(body_start, entity.size()));
    return out;
}

const std::string* find_header(const HeaderList& headers, std::string_view name)
{
    for (const auto& [k, v] : headers)
        if (k == name)
            return &v;
    return nullptr;
}

std::string unquote(std::string_view v)
{
    v = trim(v);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size())
                ++i;
            out.push_back(v[i]);
        }
        return out;
    }
    return std::string(v);
}

std::string percent_decode(std::string_view v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == '%' && i + 2 < v.size() &&
            hex_value(v[i + 1]) >= 0 && hex_value(v[i + 2]) >= 0) {
            out.push_back(static_cast<char>(hex_value(v[i + 1]) * 16 + hex_value(v[i + 2])));
            i += 2;
        } else {
            out.push_back(v[i]);
        }
    }
    return out;
}

struct FieldValue {
    std::string value;
    std::map<std::string, std::string> params;
};

// "type/subtype; a=b; c=\"d\"" and the same shape for Content-Disposition.
FieldValue parse_field(std::string_view raw)
{
    std::vector<std::string_view> pieces;
    bool quoted = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '"' && (i == 0 || raw[i - 1] != '\\'))
            quoted = !quoted;
        else if (raw[i] == ';' && !quoted) {
            pieces.push_back(raw.substr(start, i - start));
            start = i + 1;
        }
    }
    pieces.push_back(raw.substr(start));

    FieldValue out;
    out.value = lower(trim(pieces.front()));
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        const auto eq = pieces[i].find('=');
        if (eq == std::string_view::npos)
            continue;
        auto name = lower(trim(pieces[i].substr(0, eq)));
        auto value = unquote(pieces[i].substr(eq + 1));
        if (name.ends_with('*')) {
            // RFC 2231 single-segment form: charset'lang'pct-encoded
            name.pop_back();
            const auto q1 = value.find('\'');
            const auto q2 = q1 == std::string::npos ? q1 : value.find('\'', q1 + 1);
            if (q2 != std::string::npos)
                value = to_utf8(percent_decode(std::string_view(value).substr(q2 + 1)),
                                value.substr(0, q1));
        }
        out.params.emplace(std::move(name), std::move(value));
    }
    return out;
}

std::string normalize_newlines(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n')
            continue;
        out.push_back(s[i]);
    }
    return out;
}

void split_multipart(std::string_view body, const std::string& boundary, Part& part,
                     std::vector<std::string>& warnings, int depth);

Part parse_entity_at(std::string_view entity, std::vector<std::string>& warnings, int depth)
{
    Part part;
    auto split = split_header(entity, warnings);
    part.headers = std::move(split.headers);

    FieldValue ct{"text/plain", {}};
    if (const auto* v = find_header(part.headers, "content-type")) {
        ct = parse_field(*v);
        if (ct.value.find('/') == std::string::npos) {
            warnings.push_back("malformed content-type '" + ct.value + "'");
            ct.value = "text/plain";
        }
    }
    part.media_type = ct.value;
    if (auto it = ct.params.find("charset"); it != ct.params.end())
        part.charset = lower(it->second);
    if (const auto* v = find_header(part.headers, "content-transfer-encoding"))
        part.encoding = parse_transfer_encoding(*v);
    if (const auto* v = find_header(part.headers, "content-disposition")) {
        auto cd = parse_field(*v);
        part.disposition = cd.value;
        if (auto it = cd.params.find("filename"); it != cd.params.end())
            part.filename = decode_encoded_words(it->second);
    }
    if (part.filename.empty())
        if (auto it = ct.params.find("name"); it != ct.params.end())
            part.filename = decode_encoded_words(it->second);

    if (part.is_multipart()) {
        auto it = ct.params.find("boundary");
        if (it == ct.params.end() || it->second.empty()) {
            warnings.emplace_back("multipart without boundary");
            part.media_type = "text/plain";
        } else if (depth >= max_nesting) {
            warnings.emplace_back("multipart nesting too deep");
            return part;
        } else {
            split_multipart(split.body, it->second, part, warnings, depth);
            return part;
        }
    }

    const auto decoded = decode_body_transfer(split.body, part.encoding, "binary");
    part.decoded_size = decoded.size();
    if (!part.is_attachment() && (part.media_type == "text/plain" || part.media_type == "text/html"))
        part.text = normalize_newlines(to_utf8(decoded, part.charset, &warnings));
    return part;
}

void split_multipart(std::string_view body, const std::string& boundary, Part& part,
                     std::vector<std::string>& warnings, int depth)
{
    const std::string delimiter = "--" + boundary;
    std::optional<std::size_t> part_start;
    bool closed = false;
    for (const auto& ln : split_lines(body)) {
        const auto text = body.substr(ln.begin, ln.end - ln.begin);
        if (!text.starts_with(delimiter))
            continue;
        auto rest = text.substr(delimiter.size());
        const bool closing = rest.starts_with("--");
        if (closing)
            rest.remove_prefix(2);
        if (!trim(rest).empty())
            continue;
        if (part_start) {
            auto content = body.substr(*part_start, ln.begin - *part_start);
            if (content.ends_with("\r\n"))
                content.remove_suffix(2);
            else if (content.ends_with('\n'))
                content.remove_suffix(1);
            part.children.push_back(parse_entity_at(content, warnings, depth + 1));
        }
        if (closing) {
            closed = true;
            break;
        }
        part_start = ln.next;
    }
    if (!closed) {
        if (part_start) {
            warnings.emplace_back("unterminated multipart");
            part.children.push_back(parse_entity_at(body.substr(*part_start), warnings, depth + 1));
        } else {
            warnings.emplace_back("multipart has no parts");
        }
    }
}

void collect_attachments(const Part& part, std::vector<Attachment>& out)
{
    if (part.is_multipart()) {
        for (const auto& child : part.children)
            collect_attachments(child, out);
        return;
    }
    if (part.is_attachment())
        out.push_back({part.filename, part.media_type, part.decoded_size});
}

std::string header_text(const HeaderList& headers, std::string_view name)
{
    const auto* v = find_header(headers, name);
    return v ? std::string(trim(decode_encoded_words(*v))) : std::string();
}

std::string decode_q(std::string_view in)
{
    std::string out;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == '_')
            out.push_back(' ');
        else if (in[i] == '=' && i + 2 < in.size() &&
                 hex_value(in[i + 1]) >= 0 && hex_value(in[i + 2]) >= 0) {
            out.push_back(static_cast<char>(hex_value(in[i + 1]) * 16 + hex_value(in[i + 2])));
            i += 2;
        } else {
            out.push_back(in[i]);
        }
    }
    return out;
}

// Parses "=?charset?X?text?=" at `pos`; on success returns the decoded text
// and sets `end` one past the closing "?=".
std::optional<std::string> try_encoded_word(std::string_view s, std::size_t pos, std::size_t& end)
{
    const auto q1 = s.find('?', pos + 2);
    if (q1 == std::string_view::npos || q1 == pos + 2 || q1 + 3 > s.size())
        return std::nullopt;
    auto charset = s.substr(pos + 2, q1 - pos - 2);
    if (charset.find_first_of(" \t\r\n=") != std::string_view::npos)
        return std::nullopt;
    const char enc = static_cast<char>(std::toupper(static_cast<unsigned char>(s[q1 + 1])));
    if ((enc != 'B' && enc != 'Q') || s[q1 + 2] != '?')
        return std::nullopt;
    const auto close = s.find("?=", q1 + 3);
    if (close == std::string_view::npos)
        return std::nullopt;
    const auto payload = s.substr(q1 + 3, close - q1 - 3);
    if (payload.find_first_of(" \t\r\n?") != std::string_view::npos)
        return std::nullopt;
    if (const auto star = charset.find('*'); star != std::string_view::npos)
        charset = charset.substr(0, star);
    end = close + 2;
    const auto bytes = enc == 'B' ? decode_base64(payload) : decode_q(payload);
    return to_utf8(bytes, charset);
}

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

std::optional<int> month_index(std::string_view name)
{
    static constexpr std::array<std::string_view, 12> months = {
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
    for (int i = 0; i < 12; ++i)
        if (iequals(name.substr(0, 3), months[i]))
            return i + 1;
    return std::nullopt;
}

std::optional<int> parse_int(std::string_view s)
{
    if (s.empty() || s.size() > 9)
        return std::nullopt;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9')
            return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

}  // namespace

TransferEncoding parse_transfer_encoding(std::string_view value) noexcept
{
    const auto v = lower(trim(value));
    if (v == "quoted-printable")
        return TransferEncoding::quoted_printable;
    if (v == "base64")
        return TransferEncoding::base64;
    if (v == "8bit")
        return TransferEncoding::eight_bit;
    if (v == "binary")
        return TransferEncoding::binary;
    return TransferEncoding::seven_bit;
}

bool Part::is_attachment() const noexcept
{
    if (is_multipart())
        return false;
    if (disposition == "attachment")
        return true;
    return media_type != "text/plain" && media_type != "text/html";
}

std::string decode_base64(std::string_view in)
{
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z')
            return c - 'A';
        if (c >= 'a' && c <= 'z')
            return c - 'a' + 26;
        if (c >= '0' && c <= '9')
            return c - '0' + 52;
        if (c == '+')
            return 62;
        if (c == '/')
            return 63;
        return -1;
    };
    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : in) {
        if (is_space(c))
            continue;
        const int v = value(c);
        if (v < 0)
            break;  // padding or garbage ends the valid prefix
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

std::string decode_quoted_printable(std::string_view in)
{
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != '=') {
            out.push_back(in[i]);
            continue;
        }
        if (i + 1 < in.size() && in[i + 1] == '\n') {
            i += 1;
        } else if (i + 2 < in.size() && in[i + 1] == '\r' && in[i + 2] == '\n') {
            i += 2;
        } else if (i + 2 < in.size() && hex_value(in[i + 1]) >= 0 && hex_value(in[i + 2]) >= 0) {
            out.push_back(static_cast<char>(hex_value(in[i + 1]) * 16 + hex_value(in[i + 2])));
            i += 2;
        } else {
            out.push_back('=');
        }
    }
    return out;
}

std::string to_utf8(std::string_view bytes, std::string_view charset, std::vector<std::string>* warnings)
{
    auto cs = lower(trim(charset));
    if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii" ||
        cs == "binary") {
        std::string out;
        if (!unicode::sanitize_utf8(bytes, out) && warnings)
            warnings->emplace_back("invalid UTF-8 replaced with U+FFFD");
        return out;
    }
    if (cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1")
        return unicode::latin1_to_utf8(bytes);

    iconv_t cd = iconv_open("UTF-8", cs.c_str());
    if (cd == reinterpret_cast<iconv_t>(-1)) {
        if (warnings)
            warnings->push_back("unknown charset '" + cs + "', decoded as Latin-1");
        return unicode::latin1_to_utf8(bytes);
    }
    std::string in(bytes);
    std::string out(in.size() * 4 + 16, '\0');
    char* src = in.data();
    std::size_t src_left = in.size();
    char* dst = out.data();
    std::size_t dst_left = out.size();
    const auto rc = iconv(cd, &src, &src_left, &dst, &dst_left);
    iconv_close(cd);
    if (rc == static_cast<std::size_t>(-1)) {
        if (warnings)
            warnings->push_back("invalid '" + cs + "' data, decoded as Latin-1");
        return unicode::latin1_to_utf8(bytes);
    }
    out.resize(out.size() - dst_left);
    std::string clean;
    unicode::sanitize_utf8(out, clean);
    return clean;
}

std::string decode_body_transfer(std::string_view bytes, TransferEncoding encoding,
                                 std::string_view charset, std::vector<std::string>* warnings)
{
    std::string decoded;
    switch (encoding) {
    case TransferEncoding::base64: decoded = decode_base64(bytes); break;
    case TransferEncoding::quoted_printable: decoded = decode_quoted_printable(bytes); break;
    default: decoded.assign(bytes); break;
    }
    if (charset == "binary")
        return decoded;
    return to_utf8(decoded, charset, warnings);
}

std::string decode_encoded_words(std::string_view value)
{
    std::string out;
    std::string pending_space;
    bool last_encoded = false;
    std::size_t i = 0;
    while (i < value.size()) {
        if (value.compare(i, 2, "=?") == 0) {
            std::size_t end = 0;
            if (auto decoded = try_encoded_word(value, i, end)) {
                if (!last_encoded)
                    out += pending_space;
                pending_space.clear();
                out += *decoded;
                last_encoded = true;
                i = end;
                continue;
            }
        }
        if (is_space(value[i])) {
            pending_space.push_back(value[i] == '\t' ? '\t' : ' ');
            ++i;
            continue;
        }
        out += pending_space;
        pending_space.clear();
        out.push_back(value[i]);
        last_encoded = false;
        ++i;
    }
    out += pending_space;
    std::string clean;
    unicode::sanitize_utf8(out, clean);
    return clean;
}

std::string strip_html(std::string_view html)
{
    static constexpr std::array<std::string_view, 16> block_tags = {
        "p", "br", "div", "li", "tr", "td", "th", "h1", "h2", "h3", "h4", "h5", "h6", "table", "ul", "ol"};

    std::string text;
    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            text.push_back(html[i++]);
            continue;
        }
        if (html.compare(i, 4, "<!--") == 0) {
            const auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        const auto close = html.find('>', i);
        if (close == std::string_view::npos)
            break;
        auto tag = html.substr(i + 1, close - i - 1);
        const bool end_tag = !tag.empty() && tag.front() == '/';
        if (end_tag)
            tag.remove_prefix(1);
        const auto name_len = tag.find_first_of(" \t\r\n/");
        const auto name = lower(tag.substr(0, name_len));
        i = close + 1;
        if (!end_tag && (name == "script" || name == "style")) {
            const auto end = lower(html.substr(i)).find("</" + name);
            if (end == std::string::npos) {
                i = html.size();
            } else {
                const auto gt = html.find('>', i + end);
                i = gt == std::string_view::npos ? html.size() : gt + 1;
            }
            continue;
        }
        if (std::find(block_tags.begin(), block_tags.end(), name) != block_tags.end())
            text.push_back(' ');
    }

    std::string decoded;
    for (std::size_t j = 0; j < text.size(); ++j) {
        if (text[j] != '&') {
            decoded.push_back(text[j]);
            continue;
        }
        const auto semi = text.find(';', j);
        if (semi == std::string::npos || semi - j > 10) {
            decoded.push_back('&');
            continue;
        }
        const auto entity = std::string_view(text).substr(j + 1, semi - j - 1);
        std::optional<char32_t> cp;
        if (entity == "amp")
            cp = '&';
        else if (entity == "lt")
            cp = '<';
        else if (entity == "gt")
            cp = '>';
        else if (entity == "quot")
            cp = '"';
        else if (entity == "apos")
            cp = '\'';
        else if (entity.size() > 1 && entity[0] == '#') {
            const bool hex = entity[1] == 'x' || entity[1] == 'X';
            const auto digits = entity.substr(hex ? 2 : 1);
            std::uint32_t v = 0;
            bool ok = !digits.empty();
            for (char c : digits) {
                const int d = hex ? hex_value(c) : (c >= '0' && c <= '9' ? c - '0' : -1);
                if (d < 0 || v > 0x10FFFF) {
                    ok = false;
                    break;
                }
                v = v * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
            }
            if (ok)
                cp = (v == 0 || v > 0x10FFFF || (v >= 0xD800 && v <= 0xDFFF)) ? unicode::replacement_char
                                                                               : static_cast<char32_t>(v);
        }
        if (!cp) {
            decoded.push_back('&');
            continue;
        }
        unicode::append_utf8(decoded, *cp);
        j = semi;
    }

    std::string out;
    bool in_space = false;
    for (char c : decoded) {
        if (is_space(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty())
            out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

std::string extract_text(const Part& part)
{
    if (part.media_type == "multipart/alternative") {
        for (const auto& child : part.children)
            if (child.media_type == "text/plain" && !child.is_attachment())
                return std::string(trim(child.text));
        for (const auto& child : part.children)
            if (child.media_type == "text/html" && !child.is_attachment())
                return strip_html(child.text);
        for (const auto& child : part.children)
            if (auto text = extract_text(child); !text.empty())
                return text;
        return {};
    }
    if (part.is_multipart()) {
        std::string out;
        for (const auto& child : part.children) {
            if (child.is_attachment())
                continue;
            auto text = extract_text(child);
            if (text.empty())
                continue;
            if (!out.empty())
                out += "\n\n";
            out += text;
        }
        return out;
    }
    if (part.is_attachment())
        return {};
    if (part.media_type == "text/html")
        return strip_html(part.text);
    return std::string(trim(part.text));
}

Part parse_entity(std::string_view entity, std::vector<std::string>& warnings)
{
    return parse_entity_at(entity, warnings, 0);
}

std::optional<std::int64_t> parse_date(std::string_view value)
{
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    value = trim(value);
    while (pos < value.size()) {
        while (pos < value.size() && (is_space(value[pos]) || value[pos] == ','))
            ++pos;
        const auto start = pos;
        while (pos < value.size() && !is_space(value[pos]) && value[pos] != ',')
            ++pos;
        if (pos > start)
            tokens.push_back(value.substr(start, pos - start));
    }
    std::size_t t = 0;
    if (t < tokens.size() && !tokens[t].empty() && std::isalpha(static_cast<unsigned char>(tokens[t][0])))
        ++t;  // day of week
    if (tokens.size() < t + 4)
        return std::nullopt;
    const auto day = parse_int(tokens[t]);
    const auto month = month_index(tokens[t + 1]);
    auto year = parse_int(tokens[t + 2]);
    if (!day || !month || !year)
        return std::nullopt;
    if (tokens[t + 2].size() == 2)
        *year += *year < 50 ? 2000 : 1900;
    else if (tokens[t + 2].size() == 3)
        *year += 1900;

    const auto time = tokens[t + 3];
    const auto c1 = time.find(':');
    if (c1 == std::string_view::npos)
        return std::nullopt;
    const auto c2 = time.find(':', c1 + 1);
    const auto hh = parse_int(time.substr(0, c1));
    const auto mm = parse_int(time.substr(c1 + 1, c2 == std::string_view::npos ? std::string_view::npos : c2 - c1 - 1));
    const auto ss = c2 == std::string_view::npos ? std::optional<int>(0) : parse_int(time.substr(c2 + 1));
    if (!hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 60)
        return std::nullopt;

    int offset_minutes = 0;
    if (tokens.size() > t + 4) {
        const auto zone = tokens[t + 4];
        if ((zone[0] == '+' || zone[0] == '-') && zone.size() == 5) {
            const auto hhmm = parse_int(zone.substr(1));
            if (!hhmm)
                return std::nullopt;
            offset_minutes = (*hhmm / 100) * 60 + *hhmm % 100;
            if (zone[0] == '-')
                offset_minutes = -offset_minutes;
        } else {
            static const std::map<std::string, int, std::less<>> zones = {
                {"ut", 0}, {"gmt", 0}, {"utc", 0}, {"z", 0}, {"est", -300}, {"edt", -240},
                {"cst", -360}, {"cdt", -300}, {"mst", -420}, {"mdt", -360}, {"pst", -480}, {"pdt", -420}};
            if (auto it = zones.find(lower(zone)); it != zones.end())
                offset_minutes = it->second;
        }
    }

    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{*year}, std::chrono::month{static_cast<unsigned>(*month)},
                             std::chrono::day{static_cast<unsigned>(*day)}};
    if (!ymd.ok())
        return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + *hh * 3600 + *mm * 60 + *ss -
           static_cast<std::int64_t>(offset_minutes) * 60;
}

std::string synthetic_id(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out = "synth-";
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::vector<std::string> split_addresses(std::string_view value)
{
    std::vector<std::string> out;
    bool quoted = false;
    int angle = 0;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        const auto decoded = decode_encoded_words(value.substr(start, end - start));
        const auto piece = trim(decoded);
        if (!piece.empty())
            out.emplace_back(piece);
    };
    for (std::size_t i = 0; i < value.size(); ++i) {
        const char c = value[i];
        if (c == '"')
            quoted = !quoted;
        else if (!quoted && c == '<')
            ++angle;
        else if (!quoted && c == '>' && angle > 0)
            --angle;
        else if (!quoted && angle == 0 && c == ',') {
            flush(i);
            start = i + 1;
        }
    }
    flush(value.size());
    return out;
}

ParsedMessage parse_message(std::string_view bytes)
{
    ParsedMessage msg;
    msg.content_id = synthetic_id(bytes);
    if (bytes.empty()) {
        msg.parse_warnings.emplace_back("empty message");
        msg.message_id = msg.content_id;
        return msg;
    }

    const Part root = parse_entity(bytes, msg.parse_warnings);
    if (root.headers.empty())
        msg.parse_warnings.emplace_back("empty header section");

    auto id = header_text(root.headers, "message-id");
    std::string_view idv = trim(id);
    if (idv.starts_with('<'))
        idv.remove_prefix(1);
    if (idv.ends_with('>'))
        idv.remove_suffix(1);
    msg.message_id = trim(idv).empty() ? msg.content_id : std::string(trim(idv));

    msg.from = header_text(root.headers, "from");
    msg.subject = header_text(root.headers, "subject");
    for (const auto& [name, value] : root.headers) {
        if (name == "to")
            for (auto& a : split_addresses(value))
                msg.to.push_back(std::move(a));
        else if (name == "cc")
            for (auto& a : split_addresses(value))
                msg.cc.push_back(std::move(a));
    }
    if (const auto date = header_text(root.headers, "date"); !date.empty()) {
        msg.date = parse_date(date);
        if (!msg.date)
            msg.parse_warnings.emplace_back("unparseable Date header");
    }

    msg.body_text = extract_text(root);
    collect_attachments(root, msg.attachments);
    return msg;
}

ParsedMessage parse_message(const RawMessage& raw) { return parse_message(raw.bytes); }

}  // namespace mailgraph::mime
