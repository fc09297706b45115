#include <splitsolve/campaign.hpp>
#include <splitsolve/split.hpp>
#include <splitsolve/unit_file.hpp>
#include <splitsolve/wire.hpp>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <random>
#include <thread>

namespace splitsolve {

namespace fs = std::filesystem;
using namespace std::chrono;

auto FaultPlan::kill_each_worker_once(int worker_count, std::uint64_t seed, std::uint64_t max_after_nodes) -> FaultPlan
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> nodes(1, std::max<std::uint64_t>(1, max_after_nodes));
    FaultPlan plan;
    for (int slot = 0; slot < worker_count; ++slot) {
        FaultAction a;
        a.kind = FaultAction::Kind::kill;
        a.worker_slot = slot;
        a.unit_ordinal = 0;
        a.after_nodes = nodes(rng);
        plan.actions.push_back(a);
    }
    return plan;
}

auto CampaignConfig::effective_lease() const -> milliseconds
{
    return lease_duration.count() > 0 ? lease_duration : default_lease_duration(budget);
}

auto CampaignConfig::problems() const -> std::vector<std::string>
{
    std::vector<std::string> out;
    if (worker_count < (listen ? 0 : 1))
        out.push_back("worker_count must be at least 1");
    if (arity < 2)
        out.push_back("arity must be at least 2");
    if (budget.count() < 0)
        out.push_back("budget must not be negative");
    if (effective_lease() <= budget)
        out.push_back("lease_duration must exceed the budget");
    if (check_interval == 0)
        out.push_back("check_interval must be positive");
    if (campaign_id.empty())
        out.push_back("campaign id is empty");
    return out;
}

auto LocalQueueClient::lease(const std::string & worker_id) -> std::optional<LeasedUnit>
{
    auto unit = queue_.lease_next(worker_id);
    if (! unit)
        return std::nullopt;
    auto bytes = read_file(unit->model_path);
    return LeasedUnit{unit->unit_id, unit->attempt_count, parse_model(bytes), content_digest(bytes)};
}

auto LocalQueueClient::report(const std::string & worker_id, const UnitResult & result,
    const std::vector<Model> & children) -> ReportOutcome
{
    return queue_.report_result(worker_id, result, children);
}

auto LocalQueueClient::heartbeat(const std::string & worker_id, const std::string & unit_id) -> bool
{
    return queue_.heartbeat(worker_id, unit_id);
}

auto execute_unit(const LeasedUnit & unit, const std::string & worker_id, const ExecuteOptions & opts) -> ExecutedUnit
{
    const auto budget = opts.use_unit_options ? milliseconds{unit.model.options.budget_ms} : opts.budget;
    const int arity = opts.use_unit_options ? unit.model.options.arity : opts.arity;

    SearchLimits limits;
    if (budget.count() > 0)
        limits.budget = budget;
    limits.check_interval = opts.check_interval;
    limits.checkpoint = opts.checkpoint;
    limits.node_limit = opts.node_limit;

    auto outcome = solve(unit.model, limits);
    const auto & stats = stats_of(outcome);

    ExecutedUnit out;
    out.result.unit_id = unit.unit_id;
    out.result.solution_count = stats.solution_count;
    out.result.node_count = stats.node_count;
    out.result.wall_time_ms = stats.wall_time.count();
    out.result.worker_id = worker_id;
    out.result.attempt = unit.attempt;
    out.result.model_digest = unit.model_digest;

    if (auto * stopped = std::get_if<Stopped>(&outcome)) {
        out.result.status = ResultStatus::split;
        out.children = split_model(unit.model, stopped->resume, SplitConfig{arity, budget});
        for (auto & c : out.children)
            out.result.child_unit_ids.push_back(c.lineage->unit_id);
    }
    return out;
}

namespace {
    // Wraps the caller's checkpoint with a heartbeat every third of a lease.
    auto with_heartbeat(const ExecuteOptions & opts, QueueClient & client, const std::string & worker_id,
        const std::string & unit_id, milliseconds every) -> ExecuteOptions
    {
        ExecuteOptions o = opts;
        auto last = std::make_shared<steady_clock::time_point>(steady_clock::now());
        auto inner = opts.checkpoint;
        o.checkpoint = [inner, last, every, &client, worker_id, unit_id](std::uint64_t nodes) {
            if (inner)
                inner(nodes);
            if (every.count() > 0 && steady_clock::now() - *last >= every) {
                client.heartbeat(worker_id, unit_id);
                *last = steady_clock::now();
            }
        };
        return o;
    }
}

auto run_worker(QueueClient & client, const std::string & worker_id, const ExecuteOptions & opts,
    const std::function<bool()> & should_exit, milliseconds poll_interval) -> std::size_t
{
    std::size_t reported = 0;
    while (true) {
        auto unit = client.lease(worker_id);
        if (! unit) {
            if (should_exit && should_exit())
                return reported;
            std::this_thread::sleep_for(poll_interval);
            continue;
        }
        auto run_opts = with_heartbeat(opts, client, worker_id, unit->unit_id, seconds{1});
        auto done = execute_unit(*unit, worker_id, run_opts);
        client.report(worker_id, done.result, done.children);
        ++reported;
    }
}

auto unit_depth(const std::string & unit_id, const std::string & root_id) -> int
{
    if (unit_id.size() <= root_id.size())
        return 0;
    return static_cast<int>(std::count(unit_id.begin() + static_cast<std::ptrdiff_t>(root_id.size()), unit_id.end(), '.'));
}

namespace {
    struct Shared {
        std::atomic<bool> finished{false};
        std::atomic<bool> halt{false};
        std::atomic<std::size_t> accepted{0};
        std::atomic<std::size_t> kills{0};
        std::atomic<std::size_t> stalls{0};
        std::atomic<int> running{0};
        std::mutex mutex;
        std::vector<UnitExecution> executions;
    };

    class SlotWorker {
    public:
        SlotWorker(int slot, const CampaignConfig & cfg, Shared & shared, std::function<std::unique_ptr<QueueClient>()> connect) :
            slot_(slot),
            cfg_(cfg),
            shared_(shared),
            connect_(std::move(connect))
        {
            if (cfg.fault_plan)
                for (auto & a : cfg.fault_plan->actions)
                    if (a.worker_slot == slot)
                        faults_.push_back({a, false});
        }

        void run()
        {
            auto client = connect_();
            while (! shared_.finished && ! shared_.halt) {
                const std::string id = worker_id();
                std::optional<LeasedUnit> unit;
                try {
                    unit = client->lease(id);
                }
                catch (const std::exception &) {
                    if (shared_.finished || shared_.halt)
                        break;
                    throw;
                }
                if (! unit) {
                    std::this_thread::sleep_for(cfg_.poll_interval);
                    continue;
                }
                {
                    std::lock_guard lk(shared_.mutex);
                    shared_.executions.push_back({unit->unit_id, unit->attempt, id});
                }

                ExecuteOptions opts;
                opts.budget = cfg_.budget;
                opts.arity = cfg_.arity;
                opts.node_limit = cfg_.node_limit;
                opts.check_interval = cfg_.check_interval;
                opts.checkpoint = [this](std::uint64_t nodes) { checkpoint(nodes); };
                if (cfg_.budget.count() > 0)
                    opts = with_heartbeat(opts, *client, id, unit->unit_id, cfg_.effective_lease() / 3);

                try {
                    auto done = execute_unit(*unit, id, opts);
                    if (client->report(id, done.result, done.children) == ReportOutcome::accepted)
                        ++shared_.accepted;
                }
                catch (const SearchAborted &) {
                    if (aborted_by_halt_)
                        break;
                    // A killed worker is replaced by a fresh process with a new identity.
                    ++generation_;
                    client = connect_();
                }
                ++ordinal_;
            }
        }

    private:
        auto worker_id() const -> std::string
        {
            std::string id = "w" + std::to_string(slot_);
            if (generation_ > 0)
                id += "-" + std::to_string(generation_);
            return id;
        }

        void checkpoint(std::uint64_t nodes)
        {
            auto & plan = cfg_.fault_plan;
            if (plan && plan->halt_after_reports && shared_.accepted >= *plan->halt_after_reports)
                shared_.halt = true;
            if (shared_.halt) {
                aborted_by_halt_ = true;
                throw SearchAborted("halted");
            }
            for (auto & [action, fired] : faults_) {
                if (fired || ordinal_ < action.unit_ordinal || nodes < action.after_nodes)
                    continue;
                fired = true;
                if (action.kind == FaultAction::Kind::kill) {
                    ++shared_.kills;
                    throw SearchAborted("killed by fault plan");
                }
                ++shared_.stalls;
                std::this_thread::sleep_for(action.stall_for);
            }
        }

        int slot_;
        const CampaignConfig & cfg_;
        Shared & shared_;
        std::function<std::unique_ptr<QueueClient>()> connect_;
        std::vector<std::pair<FaultAction, bool>> faults_;
        int generation_ = 0;
        int ordinal_ = 0;
        bool aborted_by_halt_ = false;
    };
}

auto run_campaign(const CampaignConfig & cfg) -> CampaignSummary
{
    if (auto problems = cfg.problems(); ! problems.empty()) {
        std::string msg = "invalid campaign configuration:";
        for (auto & p : problems)
            msg += " " + p + ";";
        throw std::invalid_argument(msg);
    }

    const auto start = steady_clock::now();
    CampaignSummary summary;

    std::optional<WorkQueue> queue;
    if (WorkQueue::exists(cfg.spool, cfg.campaign_id)) {
        queue.emplace(WorkQueue::open(cfg.spool, cfg.campaign_id));
        summary.resumed = true;
        summary.requeued += queue->requeue_all_leased();
    }
    else {
        Model root = read_unit(cfg.root_model);
        root.options.budget_ms = cfg.budget.count();
        root.options.arity = cfg.arity;
        queue.emplace(WorkQueue::submit_root(cfg.spool, cfg.campaign_id, std::move(root), cfg.effective_lease()));
    }

    std::unique_ptr<WireServer> server;
    std::function<std::unique_ptr<QueueClient>()> connect;
    if (cfg.transport == Transport::wire || cfg.listen) {
        auto [host, port_wanted] = cfg.listen ? parse_endpoint(*cfg.listen) : std::pair<std::string, std::uint16_t>{"127.0.0.1", 0};
        server = std::make_unique<WireServer>(*queue, host, port_wanted);
        auto port = server->port();
        if (cfg.on_listen)
            cfg.on_listen(port);
        connect = [host, port] { return std::make_unique<WireClient>(host == "0.0.0.0" ? "127.0.0.1" : host, port); };
    }
    else {
        WorkQueue * q = &*queue;
        connect = [q] { return std::make_unique<LocalQueueClient>(*q); };
    }

    Shared shared;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.worker_count));
    shared.running = cfg.worker_count;
    for (int slot = 0; slot < cfg.worker_count; ++slot)
        threads.emplace_back([&, slot] {
            try {
                SlotWorker(slot, cfg, shared, connect).run();
            }
            catch (...) {
                errors[static_cast<std::size_t>(slot)] = std::current_exception();
            }
            --shared.running;
        });

    while (true) {
        if (queue->finished()) {
            shared.finished = true;
            break;
        }
        if (shared.running == 0 && (cfg.worker_count > 0 || shared.halt))
            break;
        summary.requeued += queue->requeue_expired();
        std::this_thread::sleep_for(cfg.poll_interval);
    }
    for (auto & t : threads)
        t.join();
    if (server)
        server->stop();
    for (auto & e : errors)
        if (e)
            std::rethrow_exception(e);

    summary.halted = shared.halt;
    if (summary.halted)
        for (auto & u : queue->units(UnitStatus::leased))
            summary.leased_at_halt.insert(u.unit_id);
    else if (! queue->finished())
        throw SpoolError("every worker stopped before campaign '" + cfg.campaign_id + "' finished");

    const auto & paths = queue->paths();
    for (auto & u : queue->units(UnitStatus::done)) {
        auto result = result_from_json(nlohmann::json::parse(read_file(paths.result_file(paths.done, u.unit_id))));
        summary.total_solutions += result.solution_count;
        ++summary.unit_count;
        if (result.status == ResultStatus::split)
            ++summary.split_units;
        summary.max_depth = std::max(summary.max_depth, unit_depth(u.unit_id, queue->root_unit_id()));
    }
    for (auto & e : fs::directory_iterator(paths.duplicates))
        if (e.path().extension() == ".result")
            ++summary.duplicates;

    summary.kills = shared.kills;
    summary.stalls = shared.stalls;
    summary.executions = std::move(shared.executions);
    summary.wall_time = duration_cast<milliseconds>(steady_clock::now() - start);
    return summary;
}

} // namespace splitsolve
