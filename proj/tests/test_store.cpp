#include "mailgraph/store.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace mailgraph;
using namespace mailgraph::store;
using testsupport::make_record;

namespace {

std::string error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

GraphStore with_message(const std::string& id = "m1")
{
    GraphStore s;
    s.add_message(make_record(id, {{"grid", 1}}));
    return s;
}

}  // namespace

TEST_CASE("fresh store has the pinned builtin categories")
{
    GraphStore s;
    REQUIRE(s.has_category(unsorted_id));
    REQUIRE(s.has_category(spam_id));
    CHECK(s.category(unsorted_id).pinned);
    CHECK(s.category(unsorted_id).provenance == Provenance::user);
    CHECK(s.category(spam_id).pinned);
    CHECK(s.edge_count() == 0);
}

TEST_CASE("add_message")
{
    GraphStore s;
    CHECK(s.add_message(make_record("m1", {{"a", 1}})) == "m1");
    CHECK(s.edge_count() == 0);
    const auto before = s;
    CHECK(s.add_message(make_record("m1", {{"a", 1}})) == "m1");
    CHECK(s == before);

    // Same Message-ID from another account is kept under its content id.
    auto other = make_record("m1", {{"b", 1}}, "other");
    other.digest.content_id = "synth-abc";
    CHECK(s.add_message(other) == "synth-abc");
    CHECK(s.message("synth-abc").location.account_id == "other");
    CHECK(s.messages().size() == 2);
    CHECK(s.existing_id("m1", "synth-abc", "other") == "synth-abc");
    CHECK(s.existing_id("m1", "synth-zzz", "acct") == "m1");
}

TEST_CASE("create_category")
{
    GraphStore s(3);
    const auto work = s.create_category("Work", std::nullopt, Provenance::user, true);
    CHECK(s.depth(work) == 1);
    const auto meetings = s.create_category("Meetings", work, Provenance::automatic, false);
    CHECK(s.depth(meetings) == 2);
    CHECK(s.category(meetings).parent == work);
    CHECK(s.category(meetings).centroid.empty());
    const auto deep = s.create_category("Deep", meetings, Provenance::automatic, false);
    CHECK(s.depth(deep) == 3);
    CHECK(error_of([&] { s.create_category("Deeper", deep, Provenance::automatic, false); }) == "depth exceeded");

    const auto dup = s.create_category("Meetings", work, Provenance::automatic, false);
    CHECK(s.category(dup).name == "Meetings-2");
    CHECK(s.category(s.create_category("Meetings", work, Provenance::automatic, false)).name == "Meetings-3");
    // Same name under a different parent is fine.
    CHECK(s.category(s.create_category("Meetings", std::nullopt, Provenance::automatic, false)).name == "Meetings");
    CHECK_THROWS_AS(s.create_category("x", std::string("nope"), Provenance::user, false), Error);
}

TEST_CASE("assign overwrite and no-downgrade rules")
{
    auto s = with_message();
    const auto c1 = s.create_category("c1", std::nullopt, Provenance::automatic, false);
    s.assign("m1", c1, 0.9, Provenance::automatic);
    CHECK(s.neighbors("m1") == std::vector<Neighbor>{{c1, 0.9, Provenance::automatic}});
    s.assign("m1", c1, 1.0, Provenance::user);
    CHECK(s.neighbors("m1") == std::vector<Neighbor>{{c1, 1.0, Provenance::user}});
    s.assign("m1", c1, 0.5, Provenance::automatic);
    CHECK(s.neighbors("m1") == std::vector<Neighbor>{{c1, 1.0, Provenance::user}});
    CHECK(s.edge_count() == 1);

    CHECK(error_of([&] { s.assign("nope", c1, 0.5, Provenance::user); }).find("unknown message") !=
          std::string::npos);
    CHECK(error_of([&] { s.assign("m1", "nope", 0.5, Provenance::user); }).find("unknown category") !=
          std::string::npos);
    CHECK_THROWS_AS(s.assign("m1", c1, 1.5, Provenance::user), Error);
}

TEST_CASE("unassign")
{
    auto s = with_message();
    s.assign("m1", spam_id, 0.7, Provenance::automatic);
    s.unassign("m1", spam_id);
    CHECK(s.edge_count() == 0);
    CHECK(error_of([&] { s.unassign("m1", spam_id); }) == "no such edge");

    s.commit_batch();
    CHECK(s.neighbors("m1") == std::vector<Neighbor>{{unsorted_id, 0.0, Provenance::automatic}});
}

TEST_CASE("commit_batch repairs")
{
    SUBCASE("edgeless message goes to unsorted")
    {
        auto s = with_message();
        const auto repairs = s.commit_batch();
        REQUIRE(repairs.size() == 1);
        CHECK(repairs[0] == RepairAction{RepairAction::Kind::assigned_default, "m1"});
        CHECK(s.edge("m1", unsorted_id)->score == 0.0);
    }
    SUBCASE("empty auto category is deleted")
    {
        GraphStore s;
        const auto c = s.create_category("c", std::nullopt, Provenance::automatic, false);
        const auto repairs = s.commit_batch();
        REQUIRE(repairs.size() == 1);
        CHECK(repairs[0] == RepairAction{RepairAction::Kind::deleted_category, c});
        CHECK_FALSE(s.has_category(c));
    }
    SUBCASE("valid store: no repairs, revision still increases")
    {
        GraphStore s;
        const auto r0 = s.revision();
        CHECK(s.commit_batch().empty());
        CHECK(s.revision() == r0 + 1);
    }
    SUBCASE("children of a deleted category move to its parent")
    {
        auto s = with_message();
        const auto root = s.create_category("root", std::nullopt, Provenance::automatic, false);
        const auto mid = s.create_category("mid", root, Provenance::automatic, false);
        const auto leaf = s.create_category("leaf", mid, Provenance::automatic, false);
        s.assign("m1", root, 1.0, Provenance::automatic);
        s.assign("m1", leaf, 1.0, Provenance::automatic);
        s.commit_batch();
        CHECK_FALSE(s.has_category(mid));
        CHECK(s.category(leaf).parent == root);
        CHECK(testsupport::totality_violation(s).empty());
    }
    SUBCASE("pinned categories survive empty")
    {
        GraphStore s;
        const auto c = s.create_category("mine", std::nullopt, Provenance::user, true);
        s.commit_batch();
        CHECK(s.has_category(c));
    }
}

TEST_CASE("neighbors ordering and errors")
{
    GraphStore s;
    for (const auto* id : {"m1", "m2", "m3"})
        s.add_message(make_record(id, {{"x", 1}}));
    const auto c = s.create_category("c", std::nullopt, Provenance::automatic, false);
    s.assign("m2", c, 0.5, Provenance::automatic);
    s.assign("m1", c, 0.5, Provenance::automatic);
    s.assign("m3", c, 0.9, Provenance::user);
    CHECK(s.neighbors(c) == std::vector<Neighbor>{{"m3", 0.9, Provenance::user},
                                                  {"m1", 0.5, Provenance::automatic},
                                                  {"m2", 0.5, Provenance::automatic}});
    CHECK(s.neighbors("m1") == std::vector<Neighbor>{{c, 0.5, Provenance::automatic}});
    CHECK(error_of([&] { s.neighbors("zzz"); }).find("unknown id") != std::string::npos);
}

TEST_CASE("persist and load")
{
    testsupport::TempDir dir;
    const auto path = dir.path() / "store.json";

    SUBCASE("empty store round trips to a valid document")
    {
        GraphStore s;
        persist(s, path);
        const auto doc = nlohmann::json::parse(testsupport::read_file(path));
        CHECK(doc.at("version") == 1);
        CHECK(doc.at("messages").empty());
        CHECK(doc.at("edges").empty());
        CHECK(load(path) == s);
    }
    SUBCASE("interrupted before rename leaves the old file intact")
    {
        auto s = with_message();
        s.commit_batch();
        persist(s, path);
        const auto old_bytes = testsupport::read_file(path);
        auto next = s;
        next.add_message(make_record("m2", {{"y", 1}}));
        next.commit_batch();
        PersistHooks hooks{[](const std::filesystem::path&) { throw std::runtime_error("crash"); }};
        CHECK_THROWS(persist(next, path, hooks));
        CHECK(testsupport::read_file(path) == old_bytes);
        CHECK(load(path) == s);
    }
    SUBCASE("unknown top-level keys survive a rewrite")
    {
        auto doc = GraphStore().to_json();
        doc["x-extension"] = {{"k", 1}};
        testsupport::write_file(path, doc.dump());
        auto s = load(path);
        persist(s, path);
        CHECK(nlohmann::json::parse(testsupport::read_file(path)).at("x-extension") == doc["x-extension"]);
    }
    SUBCASE("I/O failure surfaces as an error")
    {
        CHECK_THROWS_AS(persist(GraphStore(), dir.path() / "missing-dir" / "s.json"), Error);
    }
}

TEST_CASE("load validation")
{
    auto s = with_message();
    const auto c = s.create_category("c", std::nullopt, Provenance::automatic, false);
    s.assign("m1", c, 0.5, Provenance::automatic);
    s.commit_batch();
    const auto good = s.to_json();

    auto expect = [](nlohmann::json doc, const std::string& message) {
        CHECK(error_of([&] { GraphStore::from_json(doc); }) == message);
    };
    {
        auto doc = good;
        doc["edges"][0]["category_id"] = "gone";
        expect(doc, "corrupt store: dangling edge");
    }
    {
        auto doc = good;
        doc["version"] = 99;
        expect(doc, "unsupported version");
    }
    {
        auto doc = good;
        doc["edges"].push_back(doc["edges"][0]);
        expect(doc, "corrupt store: duplicate edge");
    }
    {
        auto doc = good;
        for (auto& cat : doc["categories"])
            if (cat["category_id"] == c)
                cat["parent"] = c;
        CHECK(error_of([&] { GraphStore::from_json(doc); }).starts_with("corrupt store: "));
    }
    {
        auto doc = good;
        doc["edges"][0]["score"] = 2.0;
        expect(doc, "corrupt store: edge score out of range");
    }
}

TEST_CASE("property: random op sequences end in a total store")
{
    std::mt19937_64 rng(1000);
    for (int i = 0; i < 300; ++i) {
        GraphStore s(1 + static_cast<int>(rng() % 3));
        testsupport::random_store_ops(rng, s, 5 + rng() % 60);
        const auto r = s.revision();
        s.commit_batch();
        CHECK(s.revision() > r);
        const auto violation = testsupport::totality_violation(s);
        CHECK_MESSAGE(violation.empty(), violation);
    }
}

TEST_CASE("property: persist/load round trips random stores")
{
    testsupport::TempDir dir;
    std::mt19937_64 rng(100);
    for (int i = 0; i < 40; ++i) {
        GraphStore s;
        testsupport::random_store_ops(rng, s, 40);
        s.commit_batch();
        s.classifier_section() = {{"opaque", i}};
        persist(s, dir.path() / "s.json");
        CHECK(load(dir.path() / "s.json") == s);
    }
}
