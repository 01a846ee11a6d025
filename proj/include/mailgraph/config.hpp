#pragma once

#include "mailgraph/classifier.hpp"
#include "mailgraph/transport.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mailgraph {

struct AppConfig {
    std::filesystem::path data_dir;
    std::vector<transport::AccountConfig> accounts;
    classifier::ClassifierConfig classifier;
    /// Extra stopword files merged with the built-in English and Romanian lists.
    std::vector<std::filesystem::path> stopword_paths;
    int http_port = 8025;
    int max_depth = 3;
    std::string bind_address = "127.0.0.1";
    /// Static files served at "/"; empty disables static serving.
    std::filesystem::path webui_dir;

    std::filesystem::path store_path() const { return data_dir / "store.json"; }
    const transport::AccountConfig* account(const std::string& id) const;

    /// Throws Error(invalid_argument): duplicate account ids, bad port, ...
    void validate() const;
    /// Creates data_dir if needed; Error(io) on failure.
    void ensure_data_dir() const;
};

nlohmann::json to_json(const AppConfig& c);
/// Relative paths are resolved against `base_dir`.
AppConfig app_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// $MAILGRAPH_HOME, else ~/.mailgraph.
std::filesystem::path default_data_dir();

/// The explicit path if given, else $MAILGRAPH_CONFIG, else nothing.
std::optional<std::filesystem::path> config_path(const std::optional<std::filesystem::path>& explicit_path);

/// Loads the config file, or returns defaults when there is none.
AppConfig load_config(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace mailgraph
