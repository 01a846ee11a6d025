#include "mailgraph/mime.hpp"

#include <doctest.h>

#include <cstdio>
#include <random>

using namespace mailgraph;
using namespace mailgraph::mime;

namespace {

// Test-only quoted-printable encoder: soft line breaks every 70 columns,
// '=' and trailing whitespace escaped.
std::string qp_encode(std::string_view s)
{
    std::string out;
    std::size_t column = 0;
    auto emit = [&](const std::string& chunk) {
        if (column + chunk.size() > 73) {
            out += "=\r\n";
            column = 0;
        }
        out += chunk;
        column += chunk.size();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        const bool last = i + 1 == s.size();
        if (c == '=' || c < 32 || c > 126 || ((c == ' ' || c == '\t') && last)) {
            char buf[4];
            std::snprintf(buf, sizeof buf, "=%02X", c);
            emit(buf);
        } else {
            emit(std::string(1, static_cast<char>(c)));
        }
    }
    return out;
}

std::string pdf_attachment_message()
{
    return "From: a@b\r\n"
           "Subject: report\r\n"
           "MIME-Version: 1.0\r\n"
           "Content-Type: multipart/mixed; boundary=\"XYZ\"\r\n"
           "\r\n"
           "preamble\r\n"
           "--XYZ\r\n"
           "Content-Type: text/plain; charset=utf-8\r\n"
           "\r\n"
           "See attached.\r\n"
           "--XYZ\r\n"
           "Content-Type: application/pdf\r\n"
           "Content-Disposition: attachment; filename=\"a.pdf\"\r\n"
           "Content-Transfer-Encoding: base64\r\n"
           "\r\n"
           "JVBERi0xLjQgdGVzdA==\r\n"
           "--XYZ--\r\n";
}

}  // namespace

TEST_CASE("simple message parses headers and body without warnings")
{
    const auto m = parse_message(std::string_view("From: a@b\r\nSubject: Hi\r\n\r\nBody"));
    CHECK(m.from == "a@b");
    CHECK(m.subject == "Hi");
    CHECK(m.body_text == "Body");
    CHECK(m.parse_warnings.empty());
}

TEST_CASE("missing body separator")
{
    const auto m = parse_message(std::string_view("From: a@b\r\nSubject: Hi\r\n"));
    CHECK(m.from == "a@b");
    CHECK(m.subject == "Hi");
    CHECK(m.body_text == "");
    REQUIRE(m.parse_warnings.size() == 1);
    CHECK(m.parse_warnings[0] == "missing body separator");
}

TEST_CASE("empty header section yields empty fields and a warning")
{
    const auto m = parse_message(std::string_view("\r\njust a body"));
    CHECK(m.from.empty());
    CHECK(m.subject.empty());
    CHECK(m.body_text == "just a body");
    CHECK_FALSE(m.parse_warnings.empty());
}

TEST_CASE("multipart/mixed with a pdf attachment")
{
    const auto m = parse_message(pdf_attachment_message());
    CHECK(m.body_text == "See attached.");
    REQUIRE(m.attachments.size() == 1);
    CHECK(m.attachments[0] == Attachment{"a.pdf", "application/pdf", 13});  // "%PDF-1.4 test"
    CHECK(m.parse_warnings.empty());
}

TEST_CASE("encoded words")
{
    CHECK(decode_encoded_words("=?UTF-8?B?U2FsdXQ=?=") == "Salut");
    CHECK(decode_encoded_words("plain subject") == "plain subject");
    CHECK(decode_encoded_words("=?UTF-8?Q?=C8=99edin=C8=9B=C4=83?=") == "ședință");
    // Whitespace between adjacent encoded words is dropped, elsewhere kept.
    CHECK(decode_encoded_words("=?UTF-8?Q?a?= =?UTF-8?Q?b?=") == "ab");
    CHECK(decode_encoded_words("x =?UTF-8?Q?a_b?= y") == "x a b y");
    CHECK(decode_encoded_words("=?ISO-8859-1?Q?caf=E9?=") == "café");
    // Malformed words stay verbatim.
    CHECK(decode_encoded_words("=?UTF-8?X?abc?=") == "=?UTF-8?X?abc?=");
}

TEST_CASE("decoded subject reaches the parsed message")
{
    const auto m = parse_message(std::string_view("Subject: =?UTF-8?B?U2FsdXQ=?= lume\r\n\r\nx"));
    CHECK(m.subject == "Salut lume");
}

TEST_CASE("body transfer decoding")
{
    CHECK(decode_body_transfer("=C8=99", TransferEncoding::quoted_printable, "utf-8") == "ș");
    CHECK(decode_body_transfer("abc", TransferEncoding::seven_bit, "us-ascii") == "abc");
    CHECK(decode_body_transfer("U2FsdXQ=", TransferEncoding::base64, "utf-8") == "Salut");
    // Malformed base64 decodes the valid prefix.
    CHECK(decode_body_transfer("U2Fs!!!!", TransferEncoding::base64, "utf-8") == "Sal");
    // QP soft line breaks.
    CHECK(decode_body_transfer("ab=\r\ncd", TransferEncoding::quoted_printable, "utf-8") == "abcd");
}

TEST_CASE("unknown charset falls back to Latin-1 with a warning")
{
    std::vector<std::string> warnings;
    CHECK(decode_body_transfer("caf\xe9", TransferEncoding::eight_bit, "x-made-up", &warnings) == "café");
    CHECK(warnings.size() == 1);
    warnings.clear();
    CHECK(decode_body_transfer("caf\xe9", TransferEncoding::eight_bit, "iso-8859-1", &warnings) == "café");
    CHECK(warnings.empty());
}

TEST_CASE("extract_text rules")
{
    std::vector<std::string> w;
    const auto alt = parse_entity("Content-Type: multipart/alternative; boundary=b\r\n\r\n"
                                  "--b\r\nContent-Type: text/plain\r\n\r\nP\r\n"
                                  "--b\r\nContent-Type: text/html\r\n\r\n<b>H</b>\r\n--b--\r\n",
                                  w);
    CHECK(extract_text(alt) == "P");

    const auto html = parse_entity("Content-Type: text/html\r\n\r\n<p>Hello&amp;bye</p>", w);
    CHECK(extract_text(html) == "Hello&bye");

    const auto mixed = parse_entity("Content-Type: multipart/mixed; boundary=b\r\n\r\n"
                                    "--b\r\nContent-Type: text/plain\r\n\r\nA\r\n"
                                    "--b\r\nContent-Type: text/plain\r\n\r\nB\r\n--b--\r\n",
                                    w);
    CHECK(extract_text(mixed) == "A\n\nB");

    const auto html_only_alt = parse_entity("Content-Type: multipart/alternative; boundary=b\r\n\r\n"
                                            "--b\r\nContent-Type: text/html\r\n\r\n<i>only</i> html\r\n--b--\r\n",
                                            w);
    CHECK(extract_text(html_only_alt) == "only html");

    const auto none = parse_entity("Content-Type: image/png\r\n\r\nxxxx", w);
    CHECK(extract_text(none) == "");
}

TEST_CASE("strip_html entities and whitespace")
{
    CHECK(strip_html("<p>a &lt; b &gt; c &quot;d&quot; &apos;e&apos;</p>") == "a < b > c \"d\" 'e'");
    CHECK(strip_html("x&#259;&#x219;y") == "xășy");
    CHECK(strip_html("one<br>two\n\n   three") == "one two three");
}

TEST_CASE("missing Message-ID is synthesized from the raw bytes")
{
    const std::string raw = "Subject: x\r\n\r\nbody";
    const auto a = parse_message(raw);
    const auto b = parse_message(raw);
    CHECK(a.message_id.starts_with("synth-"));
    CHECK(a.message_id.size() == 6 + 64);
    CHECK(a.message_id == b.message_id);
    CHECK(a.message_id != parse_message(std::string_view("Subject: y\r\n\r\nbody")).message_id);

    const auto with_id = parse_message(std::string_view("Message-ID: <abc@host>\r\n\r\nbody"));
    CHECK(with_id.message_id == "abc@host");
    CHECK(with_id.content_id.starts_with("synth-"));
}

TEST_CASE("dates are converted to UTC epoch seconds")
{
    // 2024-01-01T00:00:00Z = 19723 days * 86400.
    const std::int64_t midnight = 19723LL * 86400;
    CHECK(parse_date("Mon, 01 Jan 2024 10:00:00 +0000") == midnight + 36000);
    CHECK(parse_date("Mon, 1 Jan 2024 12:00:00 +0200") == midnight + 36000);
    CHECK(parse_date("1 Jan 2024 10:00 GMT") == midnight + 36000);
    CHECK_FALSE(parse_date("yesterday").has_value());
    const auto m = parse_message(std::string_view("Date: not a date\r\n\r\nx"));
    CHECK_FALSE(m.date.has_value());
    CHECK(m.parse_warnings.size() == 1);
}

TEST_CASE("address lists")
{
    const auto m = parse_message(
        std::string_view("To: \"Doe, Jane\" <jane@x>, bob@y\r\nCc: c@z\r\n\r\nx"));
    REQUIRE(m.to.size() == 2);
    CHECK(m.to[0] == "\"Doe, Jane\" <jane@x>");
    CHECK(m.to[1] == "bob@y");
    CHECK(m.cc == std::vector<std::string>{"c@z"});
}

TEST_CASE("bare LF and CRLF parse identically")
{
    const auto crlf = parse_message(std::string_view("From: a@b\r\nSubject: s\r\n\r\nline1\r\nline2"));
    const auto lf = parse_message(std::string_view("From: a@b\nSubject: s\n\nline1\nline2"));
    CHECK(crlf.from == lf.from);
    CHECK(crlf.subject == lf.subject);
    CHECK(crlf.body_text == lf.body_text);
}

TEST_CASE("folded headers are unfolded")
{
    // Unfolding removes only the CRLF; the folding whitespace stays.
    const auto m = parse_message(std::string_view("Subject: a long\r\n subject line\r\n\r\nx"));
    CHECK(m.subject == "a long subject line");
}

TEST_CASE("property: quoted-printable round trip on printable ASCII")
{
    std::mt19937_64 rng(2045);
    for (int i = 0; i < 2000; ++i) {
        std::string s(rng() % 200, ' ');
        for (auto& c : s)
            c = static_cast<char>(32 + rng() % 95);
        CHECK(decode_body_transfer(qp_encode(s), TransferEncoding::quoted_printable, "utf-8") == s);
    }
}

TEST_CASE("property: parse_message is total and deterministic on random bytes")
{
    std::mt19937_64 rng(5322);
    const std::string seeds[] = {pdf_attachment_message(), "From: a@b\r\nSubject: Hi\r\n\r\nBody",
                                 "Content-Type: multipart/alternative; boundary=q\r\n\r\n--q\r\n\r\nx\r\n--q--"};
    for (int i = 0; i < 1000; ++i) {
        std::string bytes;
        if (i % 2 == 0) {
            bytes.resize(rng() % 300);
            for (auto& c : bytes)
                c = static_cast<char>(rng() % 256);
        } else {
            // Mutations of well-formed messages reach deeper parser states.
            bytes = seeds[rng() % 3];
            for (int k = 0; k < 5; ++k)
                if (!bytes.empty())
                    bytes[rng() % bytes.size()] = static_cast<char>(rng() % 256);
        }
        const auto a = parse_message(bytes);
        const auto b = parse_message(bytes);
        CHECK(a == b);
    }
}

TEST_CASE("no leaked MIME machinery on the fixtures")
{
    const std::string fixtures[] = {
        pdf_attachment_message(),
        "Subject: =?UTF-8?B?U2FsdXQ=?=\r\nContent-Type: text/plain; charset=utf-8\r\n"
        "Content-Transfer-Encoding: quoted-printable\r\n\r\n=C8=99edin=C8=9B=C4=83 m=C3=A2ine",
        "Content-Type: multipart/alternative; boundary=b\r\n\r\n--b\r\nContent-Type: text/html\r\n\r\n"
        "<p>Hi &amp; bye</p>\r\n--b--\r\n",
    };
    for (const auto& f : fixtures) {
        const auto m = parse_message(f);
        CHECK(m.body_text.find("Content-Type:") == std::string::npos);
        CHECK(m.body_text.find("=?") == std::string::npos);
        CHECK(m.subject.find("=?") == std::string::npos);
    }
    CHECK(parse_message(fixtures[1]).body_text == "ședință mâine");
}
