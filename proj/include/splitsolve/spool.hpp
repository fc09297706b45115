#pragma once

#include <splitsolve/model.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace splitsolve {

using Clock = std::chrono::system_clock;

enum class UnitStatus { pending, leased, done, failed };

auto to_string(UnitStatus s) -> const char *;

struct Lease {
    std::string worker_id;
    Clock::time_point deadline;
};

struct WorkUnit {
    std::string unit_id;
    std::optional<std::string> parent_id;
    std::filesystem::path model_path;
    UnitStatus status = UnitStatus::pending;
    std::optional<Lease> lease;
    int attempt_count = 0;
};

enum class ResultStatus { exhausted, split };

struct UnitResult {
    std::string unit_id;
    ResultStatus status = ResultStatus::exhausted;
    std::uint64_t solution_count = 0;
    std::uint64_t node_count = 0;
    std::int64_t wall_time_ms = 0;
    std::vector<std::string> child_unit_ids;
    std::string worker_id;
    int attempt = 0;
    /// Digest of the canonical bytes of the model that was executed.
    std::string model_digest;

    auto operator==(const UnitResult &) const -> bool = default;
};

auto result_to_json(const UnitResult & r) -> nlohmann::json;
auto result_from_json(const nlohmann::json & j) -> UnitResult;

enum class ReportOutcome { accepted, duplicate };

class SpoolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Directory layout of one campaign inside a spool.
struct CampaignPaths {
    explicit CampaignPaths(std::filesystem::path campaign_dir);

    std::filesystem::path root;
    std::filesystem::path pending;
    std::filesystem::path leased;
    std::filesystem::path done;
    std::filesystem::path duplicates;
    std::filesystem::path staging;
    std::filesystem::path manifest;
    std::filesystem::path journal;
    std::filesystem::path lock;

    auto model_file(const std::filesystem::path & dir, const std::string & unit) const -> std::filesystem::path;
    auto result_file(const std::filesystem::path & dir, const std::string & unit) const -> std::filesystem::path;
    auto state_file(const std::filesystem::path & dir, const std::string & unit) const -> std::filesystem::path;
};

/// The master's work queue, persisted in a spool directory:
///
///     <spool>/<campaign>/{pending,leased,done,duplicates}/<unit_id>.model
///                                                         <unit_id>.result
///
/// Every transition is a rename, made under both an in-process mutex and
/// an advisory lock on the campaign directory, so threads and processes
/// sharing the spool see one serial history. Workers always initiate;
/// nothing here contacts a worker.
class WorkQueue {
public:
    /// Initializes the campaign and enqueues the root unit. Throws SpoolError
    /// if the campaign already exists and InvalidModel if the root is invalid.
    static auto submit_root(const std::filesystem::path & spool, const std::string & campaign_id, Model root,
        std::chrono::milliseconds lease_duration) -> WorkQueue;

    /// Opens an existing campaign and finishes any report interrupted by a crash.
    static auto open(const std::filesystem::path & spool, const std::string & campaign_id) -> WorkQueue;

    static auto exists(const std::filesystem::path & spool, const std::string & campaign_id) -> bool;

    WorkQueue(WorkQueue &&) noexcept;
    ~WorkQueue();

    /// Leases the oldest pending unit, or returns nothing when none is pending.
    auto lease_next(const std::string & worker_id, Clock::time_point now = Clock::now()) -> std::optional<WorkUnit>;

    /// Records a result. The first result for a unit is accepted and its
    /// children are enqueued; any later one is kept under duplicates/ and its
    /// children are not enqueued. Throws SpoolError for an unknown unit.
    auto report_result(const std::string & worker_id, const UnitResult & result, const std::vector<Model> & children,
        Clock::time_point now = Clock::now()) -> ReportOutcome;

    /// Extends the lease if the unit is still leased to worker_id.
    auto heartbeat(const std::string & worker_id, const std::string & unit_id, Clock::time_point now = Clock::now())
        -> bool;

    /// Returns every lease past its deadline to pending.
    auto requeue_expired(Clock::time_point now = Clock::now()) -> std::size_t;
    /// Returns every lease to pending (after a full stop, no lease holder is alive).
    auto requeue_all_leased() -> std::size_t;

    auto units(UnitStatus status) const -> std::vector<WorkUnit>;
    auto count(UnitStatus status) const -> std::size_t;
    auto finished() const -> bool;
    auto find(const std::string & unit_id) const -> std::optional<WorkUnit>;

    auto root_unit_id() const -> const std::string & { return root_unit_; }
    auto campaign_id() const -> const std::string & { return campaign_id_; }
    auto lease_duration() const -> std::chrono::milliseconds { return lease_duration_; }
    auto paths() const -> const CampaignPaths & { return paths_; }

private:
    WorkQueue(CampaignPaths paths, std::string campaign_id);

    class Guard;
    auto lock() const -> Guard;

    void recover();
    void journal(const std::string & line) const;
    auto scan(UnitStatus status) const -> std::vector<WorkUnit>;
    auto locate(const std::string & unit_id) const -> std::optional<UnitStatus>;
    void enqueue_model(const Model & m, int attempt_count);

    CampaignPaths paths_;
    std::string campaign_id_;
    std::string root_unit_;
    std::chrono::milliseconds lease_duration_{0};
    std::unique_ptr<std::mutex> mutex_;
    int lock_fd_ = -1;
    std::uint64_t sequence_ = 0;
};

auto epoch_ms(Clock::time_point t) -> std::int64_t;
auto from_epoch_ms(std::int64_t ms) -> Clock::time_point;

/// Default lease: three budgets plus thirty seconds.
auto default_lease_duration(std::chrono::milliseconds budget) -> std::chrono::milliseconds;

} // namespace splitsolve
