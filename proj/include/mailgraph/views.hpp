#pragma once

#include "mailgraph/store.hpp"

#include <json.hpp>

#include <string>
#include <vector>

// JSON shapes shared by the HTTP API and the CLI.
namespace mailgraph::views {

/// {category_id, name, parent, pinned, provenance, member_count, created_at}
nlohmann::json category(const store::GraphStore& store, const std::string& category_id);

/// Forest of category objects, each with a "children" array.
nlohmann::json category_tree(const store::GraphStore& store);

/// [{message_id, subject, from, date, score, provenance, keywords}]
nlohmann::json category_messages(const store::GraphStore& store, const std::string& category_id);

/// Digest, headers, memberships, spam score and location of one message.
nlohmann::json message(const store::GraphStore& store, const std::string& message_id);

/// [{category_id, name, score, provenance}]
nlohmann::json memberships(const store::GraphStore& store, const std::string& message_id);

/// Builtins first, then creation order ("c2" before "c10").
bool category_order(const std::string& a, const std::string& b);

}  // namespace mailgraph::views
