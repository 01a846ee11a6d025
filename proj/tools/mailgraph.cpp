// mailgraph command line front end.

#include "mailgraph/config.hpp"
#include "mailgraph/http_api.hpp"
#include "mailgraph/service.hpp"
#include "mailgraph/views.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>

using namespace mailgraph;
using nlohmann::json;

namespace {

void print_tree(const json& nodes, int depth)
{
    for (const auto& n : nodes) {
        std::cout << std::string(static_cast<std::size_t>(depth) * 2, ' ') << n["category_id"].get<std::string>()
                  << '\t' << n["name"].get<std::string>() << '\t' << n["member_count"] << '\n';
        print_tree(n["children"], depth + 1);
    }
}

void print_memberships(const store::GraphStore& store, const std::string& message_id)
{
    std::cout << views::memberships(store, message_id).dump(2) << '\n';
}

int serve(const AppConfig& config, int port)
{
    // Route SIGINT/SIGTERM to a waiter thread instead of async handlers.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::Service svc(config);
    http::ApiServer api(svc, config.webui_dir);
    const int bound = api.bind(config.bind_address, port);
    std::cout << "listening on http://" << config.bind_address << ':' << bound << '/' << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        api.stop();
    });
    api.listen();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-account mail classification engine"};
    app.require_subcommand(1);
    std::string config_file;
    app.add_option("--config", config_file, "Config file (default: $MAILGRAPH_CONFIG)");

    auto* init = app.add_subcommand("init", "Create the data directory and an empty store");

    std::vector<std::string> sync_accounts;
    auto* sync = app.add_subcommand("sync", "Fetch new mail from configured accounts and classify it");
    sync->add_option("--account", sync_accounts, "Account id (repeatable; default: all)");

    int port = -1;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--port", port, "Port (default: http_port from config)");

    std::string category_id;
    auto* list = app.add_subcommand("list", "Show the category tree, or the messages of one category");
    list->add_option("CATEGORY_ID", category_id);

    std::string message_id;
    auto* show = app.add_subcommand("show", "Show one message");
    show->add_option("MESSAGE_ID", message_id)->required();

    std::string assign_category;
    auto* assign = app.add_subcommand("assign", "Add a message to a category");
    assign->add_option("MESSAGE_ID", message_id)->required();
    assign->add_option("CATEGORY_ID", assign_category)->required();

    std::string from_category, to_category;
    auto* correct = app.add_subcommand("correct", "Move a message between categories");
    correct->add_option("MESSAGE_ID", message_id)->required();
    correct->add_option("--from", from_category)->required();
    correct->add_option("--to", to_category)->required();

    auto* subcluster = app.add_subcommand("subcluster", "Split a category into sub-categories");
    subcluster->add_option("CATEGORY_ID", category_id)->required();

    std::string mbox_path, mbox_account;
    auto* import = app.add_subcommand("import-mbox", "Import an mbox file");
    import->add_option("PATH", mbox_path)->required();
    import->add_option("--account", mbox_account)->required();

    bool not_spam = false;
    auto* spam = app.add_subcommand("spam", "Mark a message as spam");
    spam->add_option("MESSAGE_ID", message_id)->required();
    spam->add_flag("--not", not_spam, "Mark as not spam instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto config = load_config(config_file.empty() ? std::nullopt
                                                            : std::optional<std::filesystem::path>(config_file));
        if (serve_cmd->parsed())
            return serve(config, port >= 0 ? port : config.http_port);

        if (sync->parsed()) {
            service::Service svc(config);
            const auto job = svc.wait(svc.start_sync(sync_accounts));
            std::cout << job.to_json().dump(2) << '\n';
            for (const auto& e : job.errors)
                std::cerr << "error: " << e << '\n';
            return job.state == service::SyncJob::State::done && job.errors.empty() ? 0 : 2;
        }

        service::Engine engine(config);
        if (init->parsed()) {
            engine.persist();
            std::cout << config.store_path().string() << '\n';
        } else if (list->parsed()) {
            if (category_id.empty()) {
                print_tree(views::category_tree(engine.store()), 0);
            } else {
                for (const auto& m : views::category_messages(engine.store(), category_id))
                    std::cout << m["message_id"].get<std::string>() << '\t' << m["score"] << '\t'
                              << m["subject"].get<std::string>() << '\n';
            }
        } else if (show->parsed()) {
            std::cout << views::message(engine.store(), message_id).dump(2) << '\n';
        } else if (assign->parsed()) {
            engine.handle_correction(message_id, std::nullopt, assign_category);
            print_memberships(engine.store(), message_id);
        } else if (correct->parsed()) {
            engine.handle_correction(message_id, from_category, to_category);
            print_memberships(engine.store(), message_id);
        } else if (subcluster->parsed()) {
            const auto created = engine.subcluster(category_id);
            if (created.empty())
                std::cout << "no split: members do not separate\n";
            for (const auto& id : created)
                std::cout << id << '\t' << engine.store().category(id).name << '\t' << engine.store().degree(id)
                          << '\n';
        } else if (import->parsed()) {
            auto fetched = transport::import_mbox(mbox_path, mbox_account, engine.sync_state());
            const auto report = engine.run_pipeline(std::move(fetched.messages), &fetched.new_state);
            std::cout << report.to_json().dump(2) << '\n';
        } else if (spam->parsed()) {
            engine.mark_spam(message_id, !not_spam);
            print_memberships(engine.store(), message_id);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_user_error() ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
