#include "mailgraph/views.hpp"

#include "mailgraph/error.hpp"

#include <algorithm>
#include <functional>

namespace mailgraph::views {

using nlohmann::json;

bool category_order(const std::string& a, const std::string& b)
{
    auto rank = [](const std::string& id) {
        if (id == store::unsorted_id)
            return 0;
        if (id == store::spam_id)
            return 1;
        return 2;
    };
    return std::make_tuple(rank(a), a.size(), std::cref(a)) < std::make_tuple(rank(b), b.size(), std::cref(b));
}

json category(const store::GraphStore& store, const std::string& category_id)
{
    const auto& c = store.category(category_id);
    return {{"category_id", c.category_id},
            {"name", c.name},
            {"parent", c.parent ? json(*c.parent) : json(nullptr)},
            {"pinned", c.pinned},
            {"provenance", store::to_string(c.provenance)},
            {"member_count", store.degree(category_id)},
            {"created_at", c.created_at}};
}

json category_tree(const store::GraphStore& store)
{
    std::map<std::string, std::vector<std::string>> children;
    std::vector<std::string> roots;
    for (const auto& [id, c] : store.categories())
        (c.parent ? children[*c.parent] : roots).push_back(id);

    std::function<json(const std::string&)> build = [&](const std::string& id) {
        auto node = category(store, id);
        auto kids = children[id];
        std::sort(kids.begin(), kids.end(), category_order);
        node["children"] = json::array();
        for (const auto& k : kids)
            node["children"].push_back(build(k));
        return node;
    };
    std::sort(roots.begin(), roots.end(), category_order);
    json out = json::array();
    for (const auto& r : roots)
        out.push_back(build(r));
    return out;
}

json category_messages(const store::GraphStore& store, const std::string& category_id)
{
    if (!store.has_category(category_id))
        throw Error(ErrorKind::not_found, "unknown category " + category_id);
    json out = json::array();
    for (const auto& n : store.neighbors(category_id)) {
        const auto& m = store.message(n.id);
        out.push_back({{"message_id", n.id},
                       {"subject", m.headers.subject},
                       {"from", m.headers.from},
                       {"date", m.headers.date ? json(*m.headers.date) : json(nullptr)},
                       {"score", n.score},
                       {"provenance", store::to_string(n.provenance)},
                       {"keywords", m.digest.keywords}});
    }
    return out;
}

json memberships(const store::GraphStore& store, const std::string& message_id)
{
    if (!store.has_message(message_id))
        throw Error(ErrorKind::not_found, "unknown message " + message_id);
    json out = json::array();
    for (const auto& n : store.neighbors(message_id))
        out.push_back({{"category_id", n.id},
                       {"name", store.category(n.id).name},
                       {"score", n.score},
                       {"provenance", store::to_string(n.provenance)}});
    return out;
}

json message(const store::GraphStore& store, const std::string& message_id)
{
    const auto& m = store.message(message_id);
    return {{"message_id", message_id},
            {"digest", store::to_json(m.digest)},
            {"headers", store::to_json(m.headers)},
            {"memberships", memberships(store, message_id)},
            {"spam_score", m.spam_score},
            {"location", store::to_json(m.location)}};
}

}  // namespace mailgraph::views
