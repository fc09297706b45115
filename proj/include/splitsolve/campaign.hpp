#pragma once

#include <splitsolve/model.hpp>
#include <splitsolve/search.hpp>
#include <splitsolve/spool.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace splitsolve {

struct FaultAction {
    enum class Kind {
        /// The worker dies at a checkpoint; its lease is left to expire and
        /// the slot comes back under a fresh worker id.
        kill,
        /// The worker sleeps past its lease at a checkpoint, then finishes
        /// and reports late.
        stall,
    };
    Kind kind = Kind::kill;
    int worker_slot = 0;
    /// Fires in this unit of the slot (0-based) or the first later one that
    /// reaches after_nodes.
    int unit_ordinal = 0;
    std::uint64_t after_nodes = 1;
    std::chrono::milliseconds stall_for{0};
};

struct FaultPlan {
    std::vector<FaultAction> actions;
    /// Every worker stops at its next checkpoint once this many results have
    /// been accepted in the current run, and run_campaign returns early.
    std::optional<std::size_t> halt_after_reports;

    /// One kill per worker slot at a seeded node count in its first unit.
    static auto kill_each_worker_once(int worker_count, std::uint64_t seed, std::uint64_t max_after_nodes = 16)
        -> FaultPlan;
};

enum class Transport {
    /// Workers call the queue directly.
    local,
    /// Workers connect to a loopback server over the line protocol.
    wire,
};

struct CampaignConfig {
    std::filesystem::path spool;
    std::string campaign_id;
    std::filesystem::path root_model;
    std::chrono::milliseconds budget{0};
    int arity = 2;
    int worker_count = 1;
    /// Zero selects default_lease_duration(budget).
    std::chrono::milliseconds lease_duration{0};
    std::optional<FaultPlan> fault_plan;
    std::optional<std::uint64_t> node_limit;
    std::uint64_t check_interval = 512;
    std::chrono::milliseconds poll_interval{10};
    Transport transport = Transport::local;
    /// Also serve the line protocol on this host:port for workers in other
    /// processes. In-process workers then use it too, and worker_count may be 0.
    std::optional<std::string> listen;
    /// Called with the bound port once the server is up.
    std::function<void(std::uint16_t)> on_listen;

    auto effective_lease() const -> std::chrono::milliseconds;
    /// Empty when the configuration is usable.
    auto problems() const -> std::vector<std::string>;
};

struct UnitExecution {
    std::string unit_id;
    int attempt = 0;
    std::string worker_id;
};

struct CampaignSummary {
    std::uint64_t total_solutions = 0;
    std::size_t unit_count = 0;
    std::size_t split_units = 0;
    int max_depth = 0;
    std::chrono::milliseconds wall_time{0};
    std::size_t duplicates = 0;
    std::size_t requeued = 0;
    std::size_t kills = 0;
    std::size_t stalls = 0;
    bool resumed = false;
    bool halted = false;
    /// Units still leased when a halt stopped every worker.
    std::set<std::string> leased_at_halt;
    /// Every lease granted during this run, in grant order.
    std::vector<UnitExecution> executions;
};

struct LeasedUnit {
    std::string unit_id;
    int attempt = 0;
    Model model;
    std::string model_digest;
};

/// What a worker needs from the master. Every call is initiated by the worker.
class QueueClient {
public:
    virtual ~QueueClient() = default;
    virtual auto lease(const std::string & worker_id) -> std::optional<LeasedUnit> = 0;
    virtual auto report(const std::string & worker_id, const UnitResult & result, const std::vector<Model> & children)
        -> ReportOutcome = 0;
    virtual auto heartbeat(const std::string & worker_id, const std::string & unit_id) -> bool = 0;
};

class LocalQueueClient : public QueueClient {
public:
    explicit LocalQueueClient(WorkQueue & queue) : queue_(queue) {}
    auto lease(const std::string & worker_id) -> std::optional<LeasedUnit> override;
    auto report(const std::string & worker_id, const UnitResult & result, const std::vector<Model> & children)
        -> ReportOutcome override;
    auto heartbeat(const std::string & worker_id, const std::string & unit_id) -> bool override;

private:
    WorkQueue & queue_;
};

struct ExecuteOptions {
    std::chrono::milliseconds budget{0};
    int arity = 2;
    std::optional<std::uint64_t> node_limit;
    std::uint64_t check_interval = 512;
    std::function<void(std::uint64_t)> checkpoint;
    /// Take budget and arity from each unit's own options instead.
    bool use_unit_options = false;
};

struct ExecutedUnit {
    UnitResult result;
    std::vector<Model> children;
};

/// Runs one unit: solve within the budget, split on stop.
auto execute_unit(const LeasedUnit & unit, const std::string & worker_id, const ExecuteOptions & opts) -> ExecutedUnit;

/// Pulls units from client until should_exit returns true while idle.
/// Returns the number of units reported.
auto run_worker(QueueClient & client, const std::string & worker_id, const ExecuteOptions & opts,
    const std::function<bool()> & should_exit, std::chrono::milliseconds poll_interval) -> std::size_t;

/// Submits the root (or reopens an existing campaign, returning its leases
/// to pending) and drives worker threads until no unit is pending or leased.
auto run_campaign(const CampaignConfig & cfg) -> CampaignSummary;

/// Depth of a unit id below the root.
auto unit_depth(const std::string & unit_id, const std::string & root_id) -> int;

} // namespace splitsolve
