#pragma once

#include "mailgraph/classifier.hpp"
#include "mailgraph/config.hpp"
#include "mailgraph/store.hpp"
#include "mailgraph/transport.hpp"

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace mailgraph::service {

/// Seconds since the Unix epoch. Injected so runs can be reproduced exactly.
using Clock = std::function<std::int64_t()>;

std::int64_t system_now();

struct PipelineReport {
    std::size_t ingested = 0;
    std::size_t duplicates = 0;
    std::size_t spam = 0;
    std::size_t assignments = 0;
    std::vector<std::string> created_categories;
    std::vector<std::string> message_ids;  // newly stored, in pipeline order
    std::map<std::string, std::size_t> ingested_by_account;
    std::vector<std::string> repairs;
    std::vector<std::string> errors;

    nlohmann::json to_json() const;
};

/// Store + models + the operations that mutate them. Not thread-safe; the
/// Service funnels every call through one writer thread.
class Engine {
public:
    explicit Engine(AppConfig config, Clock clock = system_now);

    const AppConfig& config() const noexcept { return config_; }
    const store::GraphStore& store() const noexcept { return store_; }
    const classifier::Classifier& classifier() const noexcept { return classifier_; }
    const transport::SyncState& sync_state() const noexcept { return sync_state_; }
    const text::StopwordSet& stopwords() const noexcept { return stopwords_; }

    /// Parse, digest, spam gate, classify, commit, persist. Messages are
    /// processed in (account, mailbox, uid) order; per-message failures are
    /// reported, never thrown. `fetched_state` is merged into the sync
    /// state and persisted together with the store.
    PipelineReport run_pipeline(std::vector<RawMessage> raws, const transport::SyncState* fetched_state = nullptr);

    /// Returns the message's memberships afterwards.
    std::vector<store::Neighbor> handle_correction(const std::string& message_id,
                                                   const std::optional<std::string>& from_category,
                                                   const std::string& to_category);
    std::vector<store::Neighbor> mark_spam(const std::string& message_id, bool is_spam);

    /// Ids of the created children; empty when the members do not separate.
    std::vector<std::string> subcluster(const std::string& category_id);

    /// User-created categories are pinned so they survive while empty.
    std::string create_category(const std::string& name, const std::optional<std::string>& parent);

    void persist();
    void set_persist_hooks(store::PersistHooks hooks) { hooks_ = std::move(hooks); }

private:
    void finish_batch();

    AppConfig config_;
    Clock clock_;
    store::GraphStore store_;
    classifier::Classifier classifier_;
    transport::SyncState sync_state_;
    text::StopwordSet stopwords_;
    store::PersistHooks hooks_;
};

struct AccountProgress {
    std::size_t fetched = 0;
    std::size_t classified = 0;
};

struct SyncJob {
    enum class State { queued, running, done, failed };

    std::string job_id;
    State state = State::queued;
    std::map<std::string, AccountProgress> accounts;
    std::optional<std::int64_t> started_at;
    std::optional<std::int64_t> finished_at;
    std::vector<std::string> errors;

    bool finished() const noexcept { return state == State::done || state == State::failed; }
    nlohmann::json to_json() const;
};

std::string_view to_string(SyncJob::State s) noexcept;

/// Concurrent front end: one writer thread owns the Engine, readers get
/// immutable snapshots of the last committed store.
class Service {
public:
    explicit Service(AppConfig config, Clock clock = system_now);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    const AppConfig& config() const noexcept { return config_; }
    std::shared_ptr<const store::GraphStore> snapshot() const;

    /// Runs `fn` on the writer thread. The new snapshot is published before
    /// the future becomes ready.
    template <class Fn>
    auto submit(Fn fn) -> std::future<decltype(fn(std::declval<Engine&>()))>
    {
        using R = decltype(fn(std::declval<Engine&>()));
        auto promise = std::make_shared<std::promise<R>>();
        auto future = promise->get_future();
        enqueue([this, promise, fn = std::move(fn)](Engine& e) mutable {
            try {
                if constexpr (std::is_void_v<R>) {
                    fn(e);
                    publish(e);
                    promise->set_value();
                } else {
                    auto result = fn(e);
                    publish(e);
                    promise->set_value(std::move(result));
                }
            } catch (...) {
                // The store may have been touched before the failure.
                publish(e);
                promise->set_exception(std::current_exception());
            }
        });
        return future;
    }

    /// Blocking helpers that go through the writer queue.
    PipelineReport import_mbox(const std::filesystem::path& path, const std::string& account_id);
    std::vector<store::Neighbor> correct(const std::string& message_id, const std::optional<std::string>& from,
                                         const std::string& to);
    std::vector<store::Neighbor> mark_spam(const std::string& message_id, bool is_spam);
    std::vector<std::string> subcluster(const std::string& category_id);
    std::string create_category(const std::string& name, const std::optional<std::string>& parent);

    /// Starts fetching the given accounts (all configured ones when empty).
    /// Throws Error(conflict, "job overlap") if one of them is already syncing.
    std::string start_sync(const std::vector<std::string>& account_ids = {});
    std::optional<SyncJob> job(const std::string& job_id) const;
    /// Blocks until the job is done or failed.
    SyncJob wait(const std::string& job_id);

private:
    void enqueue(std::function<void(Engine&)> task);
    void publish(const Engine& engine);
    void writer_loop();
    void run_sync(const std::string& job_id, std::vector<transport::AccountConfig> accounts);
    void update_job(const std::string& job_id, const std::function<void(SyncJob&)>& fn);

    AppConfig config_;
    Clock clock_;
    std::unique_ptr<Engine> engine_;

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const store::GraphStore> snapshot_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::function<void(Engine&)>> queue_;
    bool stopping_ = false;
    std::thread writer_;

    mutable std::mutex jobs_mutex_;
    std::condition_variable jobs_cv_;
    std::map<std::string, SyncJob> jobs_;
    std::set<std::string> busy_accounts_;
    std::uint64_t next_job_ = 1;
    std::vector<std::thread> job_threads_;
};

}  // namespace mailgraph::service
