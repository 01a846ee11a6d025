#include "mailgraph/http_api.hpp"

#include "mailgraph/views.hpp"

#include <httplib.h>

#include <thread>

namespace mailgraph::http {

using nlohmann::json;

namespace {

constexpr const char* json_type = "application/json";

constexpr const char* placeholder_page = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>mailgraph</title></head>
<body><p>mailgraph is running. The JSON API lives under <code>/api/</code>.</p></body></html>
)";

void reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), json_type);
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object())
            throw Error(ErrorKind::invalid_argument, "request body must be a JSON object");
        return j;
    } catch (const json::parse_error&) {
        throw Error(ErrorKind::invalid_argument, "malformed JSON body");
    }
}

std::optional<std::string> optional_string(const json& body, const char* key)
{
    if (!body.contains(key) || body.at(key).is_null())
        return std::nullopt;
    if (!body.at(key).is_string())
        throw Error(ErrorKind::invalid_argument, std::string(key) + " must be a string");
    return body.at(key).get<std::string>();
}

std::string required_string(const json& body, const char* key)
{
    auto v = optional_string(body, key);
    if (!v)
        throw Error(ErrorKind::invalid_argument, std::string(key) + " is required");
    return *v;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps library errors onto {error} responses.
Handler guarded(Handler inner)
{
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
        try {
            inner(req, res);
        } catch (const Error& e) {
            reply(res, e.http_status(), {{"error", e.what()}});
        } catch (const json::exception& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", e.what()}});
        }
    };
}

}  // namespace

struct ApiServer::Impl {
    service::Service& service;
    httplib::Server server;
    std::thread thread;

    Impl(service::Service& svc, const std::filesystem::path& static_dir) : service(svc)
    {
        routes();
        if (!static_dir.empty()) {
            if (!server.set_mount_point("/", static_dir.string()))
                throw Error(ErrorKind::invalid_argument, "static directory not found: " + static_dir.string());
        } else {
            server.Get("/", [](const httplib::Request&, httplib::Response& res) {
                res.set_content(placeholder_page, "text/html; charset=utf-8");
            });
        }
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty() && req.path.starts_with("/api/"))
                reply(res, res.status, {{"error", res.status == 404 ? "not found" : "request failed"}});
        });
    }

    void routes()
    {
        auto& svc = service;
        server.Get("/api/categories", guarded([&svc](const httplib::Request&, httplib::Response& res) {
                       reply(res, 200, views::category_tree(*svc.snapshot()));
                   }));
        server.Get(R"(/api/categories/([^/]+)/messages)",
                   guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                       reply(res, 200, views::category_messages(*svc.snapshot(), req.matches[1]));
                   }));
        server.Post("/api/categories", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        const auto id = svc.create_category(required_string(body, "name"),
                                                            optional_string(body, "parent"));
                        reply(res, 201, views::category(*svc.snapshot(), id));
                    }));
        server.Post(R"(/api/categories/([^/]+)/subcluster)",
                    guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                        const auto created = svc.subcluster(req.matches[1]);
                        const auto snap = svc.snapshot();
                        json children = json::array();
                        for (const auto& id : created)
                            children.push_back(views::category(*snap, id));
                        reply(res, 200, {{"children", children}});
                    }));
        server.Get(R"(/api/messages/(.+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                       reply(res, 200, views::message(*svc.snapshot(), req.matches[1]));
                   }));
        server.Post("/api/corrections", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        const auto message_id = required_string(body, "message_id");
                        svc.correct(message_id, optional_string(body, "from_category"),
                                    required_string(body, "to_category"));
                        reply(res, 200,
                              {{"message_id", message_id},
                               {"memberships", views::memberships(*svc.snapshot(), message_id)}});
                    }));
        server.Post(R"(/api/messages/(.+)/spam)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        if (!body.contains("is_spam") || !body.at("is_spam").is_boolean())
                            throw Error(ErrorKind::invalid_argument, "is_spam must be a boolean");
                        const std::string message_id = req.matches[1];
                        svc.mark_spam(message_id, body.at("is_spam").get<bool>());
                        const auto snap = svc.snapshot();
                        reply(res, 200,
                              {{"message_id", message_id},
                               {"spam_score", snap->message(message_id).spam_score},
                               {"memberships", views::memberships(*snap, message_id)}});
                    }));
        server.Post("/api/sync", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                        const auto body = parse_body(req);
                        std::vector<std::string> accounts;
                        if (body.contains("accounts"))
                            accounts = body.at("accounts").get<std::vector<std::string>>();
                        reply(res, 202, {{"job_id", svc.start_sync(accounts)}});
                    }));
        server.Get(R"(/api/sync/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                       const auto job = svc.job(req.matches[1]);
                       if (!job)
                           throw Error(ErrorKind::not_found, "unknown job " + std::string(req.matches[1]));
                       reply(res, 200, job->to_json());
                   }));
    }
};

ApiServer::ApiServer(service::Service& service, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(service, static_dir))
{
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port)
{
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                                : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound <= 0)
        throw Error(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::start()
{
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ApiServer::stop()
{
    if (!impl_)
        return;
    impl_->server.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

}  // namespace mailgraph::http
