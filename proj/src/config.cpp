#include "mailgraph/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace mailgraph {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base)
{
    if (p.empty() || p.is_absolute() || base.empty())
        return p;
    return base / p;
}

}  // namespace

const transport::AccountConfig* AppConfig::account(const std::string& id) const
{
    for (const auto& a : accounts)
        if (a.account_id == id)
            return &a;
    return nullptr;
}

void AppConfig::validate() const
{
    if (data_dir.empty())
        throw Error(ErrorKind::invalid_argument, "data_dir is empty");
    std::set<std::string> ids;
    for (const auto& a : accounts) {
        a.validate();
        if (!ids.insert(a.account_id).second)
            throw Error(ErrorKind::invalid_argument, "duplicate account_id " + a.account_id);
    }
    classifier.validate();
    if (http_port < 0 || http_port > 65535)
        throw Error(ErrorKind::invalid_argument, "http_port out of range");
    if (max_depth < 1)
        throw Error(ErrorKind::invalid_argument, "max_depth must be at least 1");
}

void AppConfig::ensure_data_dir() const
{
    std::error_code ec;
    std::filesystem::create_directories(data_dir, ec);
    if (ec || !std::filesystem::is_directory(data_dir))
        throw Error(ErrorKind::io, "cannot create data_dir " + data_dir.string());
}

json to_json(const AppConfig& c)
{
    json accounts = json::array();
    for (const auto& a : c.accounts)
        accounts.push_back(transport::to_json(a));
    json stopwords = json::array();
    for (const auto& p : c.stopword_paths)
        stopwords.push_back(p.string());
    return {{"data_dir", c.data_dir.string()},
            {"accounts", accounts},
            {"classifier", classifier::to_json(c.classifier)},
            {"stopword_paths", stopwords},
            {"http_port", c.http_port},
            {"max_depth", c.max_depth},
            {"bind_address", c.bind_address},
            {"webui_dir", c.webui_dir.string()}};
}

AppConfig app_config_from_json(const json& j, const std::filesystem::path& base_dir)
{
    AppConfig c;
    try {
        c.data_dir = j.contains("data_dir") ? resolve(j.at("data_dir").get<std::string>(), base_dir)
                                            : default_data_dir();
        for (const auto& a : j.value("accounts", json::array())) {
            auto account = transport::account_from_json(a);
            account.mbox_path = resolve(account.mbox_path, base_dir);
            c.accounts.push_back(std::move(account));
        }
        if (j.contains("classifier"))
            c.classifier = classifier::config_from_json(j.at("classifier"));
        for (const auto& p : j.value("stopword_paths", std::vector<std::string>{}))
            c.stopword_paths.push_back(resolve(p, base_dir));
        c.http_port = j.value("http_port", 8025);
        c.max_depth = j.value("max_depth", 3);
        c.bind_address = j.value("bind_address", std::string("127.0.0.1"));
        c.webui_dir = resolve(j.value("webui_dir", std::string()), base_dir);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_argument, std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

std::filesystem::path default_data_dir()
{
    if (const char* home = std::getenv("MAILGRAPH_HOME"); home && *home)
        return home;
    const char* user_home = std::getenv("HOME");
    return std::filesystem::path(user_home && *user_home ? user_home : ".") / ".mailgraph";
}

std::optional<std::filesystem::path> config_path(const std::optional<std::filesystem::path>& explicit_path)
{
    if (explicit_path && !explicit_path->empty())
        return explicit_path;
    if (const char* env = std::getenv("MAILGRAPH_CONFIG"); env && *env)
        return std::filesystem::path(env);
    return std::nullopt;
}

AppConfig load_config(const std::optional<std::filesystem::path>& explicit_path)
{
    const auto path = config_path(explicit_path);
    if (!path) {
        AppConfig c;
        c.data_dir = default_data_dir();
        return c;
    }
    std::ifstream in(*path);
    if (!in)
        throw Error(ErrorKind::invalid_argument, "cannot read config " + path->string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::invalid_argument, "config " + path->string() + ": " + e.what());
    }
    return app_config_from_json(j, path->parent_path());
}

}  // namespace mailgraph
