#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mailgraph {

enum class SourceKind { imap, pop3, mbox };

std::string_view to_string(SourceKind kind) noexcept;
std::optional<SourceKind> source_kind_from_string(std::string_view name) noexcept;

/// Where a message lives on its server. For POP3 the uid is a hash of the
/// UIDL string; for mbox it is the 0-based ordinal in the file.
struct MessageLocation {
    std::string account_id;
    std::string mailbox;
    std::uint64_t uid = 0;
    std::uint64_t uidvalidity = 0;
    SourceKind source_kind = SourceKind::imap;

    friend auto operator<=>(const MessageLocation&, const MessageLocation&) = default;
};

/// Exact octets as fetched, plus their origin.
struct RawMessage {
    std::string bytes;
    MessageLocation location;
};

}  // namespace mailgraph

namespace mailgraph::mime {

enum class TransferEncoding { seven_bit, eight_bit, binary, quoted_printable, base64 };

/// Unknown values map to 7bit (identity), the RFC 2045 default.
TransferEncoding parse_transfer_encoding(std::string_view value) noexcept;

struct Attachment {
    std::string filename;
    std::string media_type;
    std::uint64_t size_bytes = 0;

    friend bool operator==(const Attachment&, const Attachment&) = default;
};

struct ParsedMessage {
    std::string message_id;
    /// "synth-" + SHA-256 of the raw bytes; used when Message-ID is absent or collides.
    std::string content_id;
    std::string from;
    std::vector<std::string> to;
    std::vector<std::string> cc;
    std::string subject;
    std::optional<std::int64_t> date;  // seconds since the Unix epoch, UTC
    std::string body_text;
    std::vector<Attachment> attachments;
    std::vector<std::string> parse_warnings;

    friend bool operator==(const ParsedMessage&, const ParsedMessage&) = default;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// One node of the MIME entity tree. Leaf text parts keep their decoded text;
/// other leaves keep only their decoded size.
struct Part {
    HeaderList headers;  // names lowercased, values unfolded
    std::string media_type = "text/plain";
    std::string charset;
    std::string disposition;
    std::string filename;
    TransferEncoding encoding = TransferEncoding::seven_bit;
    std::string text;
    std::uint64_t decoded_size = 0;
    std::vector<Part> children;

    bool is_multipart() const noexcept { return media_type.starts_with("multipart/"); }
    bool is_attachment() const noexcept;
};

ParsedMessage parse_message(const RawMessage& raw);
ParsedMessage parse_message(std::string_view bytes);

/// Parses one entity (headers + body) into a part tree.
Part parse_entity(std::string_view entity, std::vector<std::string>& warnings);

/// RFC 2047 encoded-word decoding. Malformed encoded-words stay verbatim;
/// unknown charsets fall back to Latin-1.
std::string decode_encoded_words(std::string_view header_value);

/// Undoes the transfer encoding and converts `charset` to UTF-8. Unknown
/// charsets decode as Latin-1 and append a warning.
std::string decode_body_transfer(std::string_view bytes, TransferEncoding encoding,
                                 std::string_view charset,
                                 std::vector<std::string>* warnings = nullptr);

std::string decode_base64(std::string_view in);
std::string decode_quoted_printable(std::string_view in);
std::string to_utf8(std::string_view bytes, std::string_view charset,
                    std::vector<std::string>* warnings = nullptr);

/// Plain text of a part tree: text/plain preferred inside alternatives,
/// multipart/mixed concatenated with blank lines.
std::string extract_text(const Part& part);

/// Tag removal, entity decoding and whitespace collapsing.
std::string strip_html(std::string_view html);

std::optional<std::int64_t> parse_date(std::string_view value);

std::string synthetic_id(std::string_view bytes);

/// Splits an address-list header on top-level commas.
std::vector<std::string> split_addresses(std::string_view value);

}  // namespace mailgraph::mime
