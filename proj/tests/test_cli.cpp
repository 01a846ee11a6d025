#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <array>
#include <csignal>
#include <cstdio>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace {

struct Run {
    int code;
    std::string out;
};

std::string quote(const std::string& s)
{
    std::string q = "'";
    for (char c : s)
        q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run run(const std::filesystem::path& home, const std::string& args)
{
    const std::string cmd = "MAILGRAPH_HOME=" + quote(home.string()) + " MAILGRAPH_CONFIG= " +
                            quote(MAILGRAPH_CLI) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::string out;
    std::array<char, 4096> buf{};
    while (auto n = std::fread(buf.data(), 1, buf.size(), pipe))
        out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

const std::string mbox = quote((std::filesystem::path(MAILGRAPH_TEST_DATA) / "three.mbox").string());

}  // namespace

TEST_CASE("init, import, list, show")
{
    testsupport::TempDir home;
    auto r = run(home.path(), "init");
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(home.path() / "store.json"));

    r = run(home.path(), "import-mbox " + mbox + " --account local");
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["ingested"] == 3);
    CHECK(nlohmann::json::parse(run(home.path(), "import-mbox " + mbox + " --account local").out)["ingested"] == 0);

    r = run(home.path(), "list");
    CHECK(r.code == 0);
    CHECK(r.out.find("unsorted") != std::string::npos);
    CHECK(r.out.find("spam") != std::string::npos);

    r = run(home.path(), "show m1@mbox.test");
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["headers"]["subject"] == "first");

    r = run(home.path(), "show missing@x");
    CHECK(r.code == 1);
    CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("assign, correct, spam, subcluster")
{
    testsupport::TempDir home;
    REQUIRE(run(home.path(), "import-mbox " + mbox + " --account local").code == 0);

    auto r = run(home.path(), "assign m1@mbox.test unsorted");
    CHECK(r.code == 0);
    auto memberships = nlohmann::json::parse(r.out);
    CHECK(std::any_of(memberships.begin(), memberships.end(),
                      [](auto& m) { return m["category_id"] == "unsorted" && m["provenance"] == "user"; }));

    r = run(home.path(), "correct m1@mbox.test --from unsorted --to spam");
    CHECK(r.code == 0);

    r = run(home.path(), "spam m2@mbox.test");
    CHECK(r.code == 0);
    memberships = nlohmann::json::parse(r.out);
    REQUIRE(memberships.size() == 1);
    CHECK(memberships[0]["category_id"] == "spam");

    r = run(home.path(), "spam m2@mbox.test --not");
    CHECK(r.code == 0);
    for (const auto& m : nlohmann::json::parse(r.out))
        CHECK(m["category_id"] != "spam");

    r = run(home.path(), "list unsorted");
    CHECK(r.code == 0);

    r = run(home.path(), "subcluster unsorted");
    CHECK(r.code == 1);
    CHECK(r.out.find("too few members") != std::string::npos);

    CHECK(run(home.path(), "correct m1@mbox.test --to cat-missing").code == 1);
}

TEST_CASE("usage errors exit 1")
{
    testsupport::TempDir home;
    CHECK(run(home.path(), "frobnicate").code == 1);
    CHECK(run(home.path(), "show").code == 1);
    CHECK(run(home.path(), "correct x").code == 1);
    CHECK(run(home.path(), "--help").code == 0);
    CHECK(run(home.path(), "--config " + quote((home.path() / "absent.json").string()) + " list").code == 1);
    testsupport::write_file(home.path() / "bad.json", "{ nope");
    CHECK(run(home.path(), "--config " + quote((home.path() / "bad.json").string()) + " list").code == 1);
}

TEST_CASE("sync through a config file")
{
    testsupport::TempDir home;
    const auto config = home.path() / "config.json";

    SUBCASE("mbox account")
    {
        testsupport::write_file(config, nlohmann::json{{"data_dir", "data"},
                                                       {"accounts", {{{"account_id", "local"},
                                                                      {"source_kind", "mbox"},
                                                                      {"mbox_path", std::string(MAILGRAPH_TEST_DATA) +
                                                                                        "/three.mbox"}}}}}
                                            .dump());
        const auto r = run(home.path(), "--config " + quote(config.string()) + " sync");
        CHECK(r.code == 0);
        CHECK(r.out.find("\"fetched\": 3") != std::string::npos);
        CHECK(std::filesystem::exists(home.path() / "data" / "store.json"));
        CHECK(run(home.path(), "--config " + quote(config.string()) + " sync --account local").code == 0);
        CHECK(run(home.path(), "--config " + quote(config.string()) + " sync --account ghost").code == 1);
    }
    SUBCASE("unreachable server is an internal error")
    {
        ::setenv("MAILGRAPH_TEST_PASSWORD", "secret", 1);
        testsupport::write_file(config, nlohmann::json{{"data_dir", "data"},
                                                       {"accounts", {{{"account_id", "down"},
                                                                      {"host", "127.0.0.1"},
                                                                      {"port", 1},
                                                                      {"use_tls", false},
                                                                      {"username", "alice"},
                                                                      {"credential_env", "MAILGRAPH_TEST_PASSWORD"},
                                                                      {"timeout_ms", 500}}}}}
                                            .dump());
        const auto r = run(home.path(), "--config " + quote(config.string()) + " sync");
        CHECK(r.code == 2);
        CHECK(r.out.find("down") != std::string::npos);
    }
}

TEST_CASE("serve starts and stops on SIGTERM")
{
    testsupport::TempDir home;
    int fds[2];
    REQUIRE(::pipe(fds) == 0);
    const pid_t pid = ::fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        ::dup2(fds[1], STDOUT_FILENO);
        ::close(fds[0]);
        ::setenv("MAILGRAPH_HOME", home.path().c_str(), 1);
        ::unsetenv("MAILGRAPH_CONFIG");
        ::execl(MAILGRAPH_CLI, MAILGRAPH_CLI, "serve", "--port", "0", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(fds[1]);
    std::string line;
    char c;
    while (::read(fds[0], &c, 1) == 1 && c != '\n')
        line += c;
    ::close(fds[0]);
    CHECK(line.starts_with("listening on http://127.0.0.1:"));
    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}
