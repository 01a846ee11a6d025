#include "mailgraph/service.hpp"

#include "mailgraph/mime.hpp"

#include <algorithm>
#include <chrono>

namespace mailgraph::service {

using nlohmann::json;

std::int64_t system_now()
{
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

json PipelineReport::to_json() const
{
    return {{"ingested", ingested},
            {"duplicates", duplicates},
            {"spam", spam},
            {"assignments", assignments},
            {"created_categories", created_categories},
            {"message_ids", message_ids},
            {"ingested_by_account", ingested_by_account},
            {"repairs", repairs},
            {"errors", errors}};
}

namespace {

std::string describe(const MessageLocation& loc)
{
    return loc.account_id + "/" + loc.mailbox + "/" + std::to_string(loc.uid);
}

}  // namespace

Engine::Engine(AppConfig config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)), store_(config_.max_depth, 0),
      classifier_(config_.classifier), stopwords_(text::builtin_stopwords())
{
    config_.validate();
    for (const auto& path : config_.stopword_paths)
        stopwords_.merge(text::load_stopwords(path));

    const auto path = config_.store_path();
    if (std::filesystem::exists(path)) {
        store_ = store::load(path, config_.max_depth);
        if (!store_.classifier_section().empty())
            classifier_ = classifier::Classifier::from_json(store_.classifier_section());
        classifier_.set_config(config_.classifier);
        sync_state_ = transport::SyncState::from_json(store_.sync_section());
    } else {
        store_ = store::GraphStore(config_.max_depth, clock_());
    }
}

void Engine::persist()
{
    config_.ensure_data_dir();
    store_.classifier_section() = classifier_.to_json();
    store_.sync_section() = sync_state_.to_json();
    store::persist(store_, config_.store_path(), hooks_);
}

void Engine::finish_batch()
{
    store_.commit_batch();
    classifier_.forget_missing_categories(store_);
    persist();
}

PipelineReport Engine::run_pipeline(std::vector<RawMessage> raws, const transport::SyncState* fetched_state)
{
    std::stable_sort(raws.begin(), raws.end(), [](const RawMessage& a, const RawMessage& b) {
        return std::tie(a.location.account_id, a.location.mailbox, a.location.uid) <
               std::tie(b.location.account_id, b.location.mailbox, b.location.uid);
    });

    PipelineReport report;
    std::set<std::string> before;
    for (const auto& [id, c] : store_.categories())
        before.insert(id);

    const text::DigestOptions options{config_.classifier.keyword_count, 3};
    for (const auto& raw : raws) {
        try {
            const auto parsed = mime::parse_message(raw);
            if (auto existing = store_.existing_id(parsed.message_id, parsed.content_id, raw.location.account_id)) {
                store_.update_location(*existing, raw.location);
                ++report.duplicates;
                continue;
            }
            store::MessageRecord record;
            record.digest = text::make_digest(parsed, store_.corpus_stats(), stopwords_, options);
            record.location = raw.location;
            record.headers = {parsed.from, parsed.to, parsed.cc, parsed.subject, parsed.date};
            const auto id = store_.add_message(std::move(record));
            if (classifier_.ingest(store_, id, clock_()))
                ++report.spam;
            ++report.ingested;
            ++report.ingested_by_account[raw.location.account_id];
            report.message_ids.push_back(id);
        } catch (const std::exception& e) {
            report.errors.push_back(describe(raw.location) + ": " + e.what());
        }
    }

    for (const auto& action : store_.commit_batch())
        report.repairs.push_back(action.describe());
    classifier_.forget_missing_categories(store_);
    for (const auto& [id, c] : store_.categories())
        if (!before.contains(id))
            report.created_categories.push_back(id);
    for (const auto& id : report.message_ids)
        report.assignments += store_.degree(id);

    if (fetched_state)
        sync_state_.merge(*fetched_state);
    persist();
    return report;
}

std::vector<store::Neighbor> Engine::handle_correction(const std::string& message_id,
                                                       const std::optional<std::string>& from_category,
                                                       const std::string& to_category)
{
    classifier_.apply_correction(store_, message_id, from_category, to_category, clock_());
    finish_batch();
    return store_.neighbors(message_id);
}

std::vector<store::Neighbor> Engine::mark_spam(const std::string& message_id, bool is_spam)
{
    classifier_.mark_spam(store_, message_id, is_spam, clock_());
    finish_batch();
    return store_.neighbors(message_id);
}

std::vector<std::string> Engine::subcluster(const std::string& category_id)
{
    const auto& category = store_.category(category_id);
    if (category_id == store::spam_id)
        throw Error(ErrorKind::invalid_argument, "the spam category cannot be subclustered");

    std::vector<classifier::MemberVector> members;
    for (const auto& n : store_.neighbors(category_id))
        members.push_back({n.id, store_.message(n.id).digest.weighted});
    const auto clusters = classifier::subcluster(members, category.centroid, category.name,
                                                 store_.depth(category_id), store_.max_depth(), classifier_.config());

    std::vector<std::string> created;
    const auto now = clock_();
    for (const auto& cluster : clusters) {
        const auto id = store_.create_category(cluster.name, category_id, store::Provenance::automatic, false, now);
        store_.set_centroid(id, cluster.centroid);
        for (const auto& m : cluster.member_ids)
            store_.assign(m, id, text::cosine_similarity(store_.message(m).digest.weighted, cluster.centroid),
                          store::Provenance::automatic);
        created.push_back(id);
    }
    if (!created.empty())
        finish_batch();
    return created;
}

std::string Engine::create_category(const std::string& name, const std::optional<std::string>& parent)
{
    if (name.empty())
        throw Error(ErrorKind::invalid_argument, "category name must not be empty");
    const auto id = store_.create_category(name, parent, store::Provenance::user, true, clock_());
    finish_batch();
    return id;
}

// --- jobs -----------------------------------------------------------------

std::string_view to_string(SyncJob::State s) noexcept
{
    switch (s) {
    case SyncJob::State::queued: return "queued";
    case SyncJob::State::running: return "running";
    case SyncJob::State::done: return "done";
    case SyncJob::State::failed: return "failed";
    }
    return "failed";
}

json SyncJob::to_json() const
{
    json acc = json::object();
    std::size_t fetched = 0, classified = 0;
    for (const auto& [id, p] : accounts) {
        acc[id] = {{"fetched", p.fetched}, {"classified", p.classified}};
        fetched += p.fetched;
        classified += p.classified;
    }
    return {{"job_id", job_id},
            {"state", to_string(state)},
            {"accounts", acc},
            {"fetched", fetched},
            {"classified", classified},
            {"started_at", started_at ? json(*started_at) : json(nullptr)},
            {"finished_at", finished_at ? json(*finished_at) : json(nullptr)},
            {"errors", errors}};
}

// --- service --------------------------------------------------------------

Service::Service(AppConfig config, Clock clock)
    : config_(config), clock_(clock), engine_(std::make_unique<Engine>(std::move(config), std::move(clock)))
{
    snapshot_ = std::make_shared<const store::GraphStore>(engine_->store());
    writer_ = std::thread([this] { writer_loop(); });
}

Service::~Service()
{
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(jobs_mutex_);
        threads.swap(job_threads_);
    }
    for (auto& t : threads)
        t.join();
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    writer_.join();
}

std::shared_ptr<const store::GraphStore> Service::snapshot() const
{
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

void Service::enqueue(std::function<void(Engine&)> task)
{
    {
        std::lock_guard lock(queue_mutex_);
        if (stopping_)
            throw Error(ErrorKind::internal, "service is shutting down");
        queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
}

void Service::writer_loop()
{
    for (;;) {
        std::function<void(Engine&)> task;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty())
                return;
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task(*engine_);
    }
}

void Service::publish(const Engine& engine)
{
    auto snap = std::make_shared<const store::GraphStore>(engine.store());
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
}

PipelineReport Service::import_mbox(const std::filesystem::path& path, const std::string& account_id)
{
    return submit([path, account_id](Engine& e) {
               auto fetched = transport::import_mbox(path, account_id, e.sync_state());
               return e.run_pipeline(std::move(fetched.messages), &fetched.new_state);
           })
        .get();
}

std::vector<store::Neighbor> Service::correct(const std::string& message_id, const std::optional<std::string>& from,
                                              const std::string& to)
{
    return submit([=](Engine& e) { return e.handle_correction(message_id, from, to); }).get();
}

std::vector<store::Neighbor> Service::mark_spam(const std::string& message_id, bool is_spam)
{
    return submit([=](Engine& e) { return e.mark_spam(message_id, is_spam); }).get();
}

std::vector<std::string> Service::subcluster(const std::string& category_id)
{
    return submit([=](Engine& e) { return e.subcluster(category_id); }).get();
}

std::string Service::create_category(const std::string& name, const std::optional<std::string>& parent)
{
    return submit([=](Engine& e) { return e.create_category(name, parent); }).get();
}

std::string Service::start_sync(const std::vector<std::string>& account_ids)
{
    std::vector<transport::AccountConfig> accounts;
    if (account_ids.empty()) {
        accounts = config_.accounts;
    } else {
        for (const auto& id : account_ids) {
            const auto* a = config_.account(id);
            if (!a)
                throw Error(ErrorKind::not_found, "unknown account " + id);
            accounts.push_back(*a);
        }
    }

    std::lock_guard lock(jobs_mutex_);
    for (const auto& a : accounts)
        if (busy_accounts_.contains(a.account_id))
            throw Error(ErrorKind::conflict, "job overlap");
    SyncJob job;
    job.job_id = "job-" + std::to_string(next_job_++);
    for (const auto& a : accounts) {
        busy_accounts_.insert(a.account_id);
        job.accounts[a.account_id] = {};
    }
    const auto id = job.job_id;
    jobs_.emplace(id, std::move(job));
    job_threads_.emplace_back([this, id, accounts] { run_sync(id, accounts); });
    return id;
}

std::optional<SyncJob> Service::job(const std::string& job_id) const
{
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        return std::nullopt;
    return it->second;
}

SyncJob Service::wait(const std::string& job_id)
{
    std::unique_lock lock(jobs_mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        throw Error(ErrorKind::not_found, "unknown job " + job_id);
    jobs_cv_.wait(lock, [&] { return it->second.finished(); });
    return it->second;
}

void Service::update_job(const std::string& job_id, const std::function<void(SyncJob&)>& fn)
{
    {
        std::lock_guard lock(jobs_mutex_);
        fn(jobs_.at(job_id));
    }
    jobs_cv_.notify_all();
}

void Service::run_sync(const std::string& job_id, std::vector<transport::AccountConfig> accounts)
{
    update_job(job_id, [&](SyncJob& j) {
        j.state = SyncJob::State::running;
        j.started_at = clock_();
    });

    // The fetch position is read through the writer so it reflects every
    // committed batch.
    transport::SyncState state;
    bool failed = false;
    std::vector<std::string> errors;
    try {
        state = submit([](Engine& e) { return e.sync_state(); }).get();
    } catch (const std::exception& e) {
        failed = true;
        errors.push_back(e.what());
    }

    struct Fetched {
        std::vector<transport::FetchResult> results;
        std::string error;
    };
    std::vector<std::future<Fetched>> workers;
    if (!failed)
        for (const auto& account : accounts)
            workers.push_back(std::async(std::launch::async, [account, &state] {
                Fetched f;
                try {
                    f.results = transport::fetch_account(account, state);
                } catch (const std::exception& e) {
                    f.error = e.what();
                }
                return f;
            }));

    std::vector<RawMessage> batch;
    transport::SyncState fragment;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        auto fetched = workers[i].get();
        const auto& id = accounts[i].account_id;
        std::size_t count = 0;
        if (!fetched.error.empty())
            errors.push_back(id + ": " + fetched.error);
        for (auto& r : fetched.results) {
            if (!r.error.empty())
                errors.push_back(id + ": " + r.error);
            count += r.messages.size();
            fragment.merge(r.new_state);
            std::move(r.messages.begin(), r.messages.end(), std::back_inserter(batch));
        }
        update_job(job_id, [&](SyncJob& j) { j.accounts[id].fetched = count; });
    }

    PipelineReport report;
    if (!failed) {
        try {
            report = submit([&batch, &fragment](Engine& e) { return e.run_pipeline(std::move(batch), &fragment); })
                         .get();
        } catch (const std::exception& e) {
            failed = true;
            errors.push_back(std::string("pipeline: ") + e.what());
        }
    }

    update_job(job_id, [&](SyncJob& j) {
        for (const auto& [account, n] : report.ingested_by_account)
            if (j.accounts.contains(account))
                j.accounts[account].classified = n;
        j.errors = errors;
        j.errors.insert(j.errors.end(), report.errors.begin(), report.errors.end());
        j.finished_at = clock_();
        j.state = failed ? SyncJob::State::failed : SyncJob::State::done;
        for (const auto& a : accounts)
            busy_accounts_.erase(a.account_id);
    });
}

}  // namespace mailgraph::service
