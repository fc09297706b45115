#include <splitsolve/spool.hpp>
#include <splitsolve/unit_file.hpp>

#include <algorithm>
#include <fcntl.h>
#include <fstream>
#include <sys/file.h>
#include <unistd.h>

namespace splitsolve {

namespace fs = std::filesystem;
using nlohmann::json;

auto to_string(UnitStatus s) -> const char *
{
    switch (s) {
    case UnitStatus::pending: return "pending";
    case UnitStatus::leased: return "leased";
    case UnitStatus::done: return "done";
    case UnitStatus::failed: return "failed";
    }
    return "?";
}

auto epoch_ms(Clock::time_point t) -> std::int64_t
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

auto from_epoch_ms(std::int64_t ms) -> Clock::time_point
{
    return Clock::time_point{std::chrono::duration_cast<Clock::duration>(std::chrono::milliseconds{ms})};
}

auto default_lease_duration(std::chrono::milliseconds budget) -> std::chrono::milliseconds
{
    return 3 * budget + std::chrono::seconds{30};
}

auto result_to_json(const UnitResult & r) -> json
{
    return json{
        {"unit_id", r.unit_id},
        {"status", r.status == ResultStatus::split ? "split" : "exhausted"},
        {"solution_count", r.solution_count},
        {"node_count", r.node_count},
        {"wall_time_ms", r.wall_time_ms},
        {"child_unit_ids", r.child_unit_ids},
        {"worker_id", r.worker_id},
        {"attempt", r.attempt},
        {"model_digest", r.model_digest},
    };
}

auto result_from_json(const json & j) -> UnitResult
{
    try {
        UnitResult r;
        r.unit_id = j.at("unit_id").get<std::string>();
        auto status = j.at("status").get<std::string>();
        if (status == "split")
            r.status = ResultStatus::split;
        else if (status == "exhausted")
            r.status = ResultStatus::exhausted;
        else
            throw SpoolError("unknown result status '" + status + "'");
        r.solution_count = j.at("solution_count").get<std::uint64_t>();
        r.node_count = j.at("node_count").get<std::uint64_t>();
        r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
        r.child_unit_ids = j.at("child_unit_ids").get<std::vector<std::string>>();
        r.worker_id = j.at("worker_id").get<std::string>();
        r.attempt = j.at("attempt").get<int>();
        r.model_digest = j.value("model_digest", std::string{});
        if (r.status == ResultStatus::split && r.child_unit_ids.size() < 2)
            throw SpoolError("split result for " + r.unit_id + " has fewer than two children");
        if (r.status == ResultStatus::exhausted && ! r.child_unit_ids.empty())
            throw SpoolError("exhausted result for " + r.unit_id + " lists children");
        return r;
    }
    catch (const json::exception & e) {
        throw SpoolError(std::string("malformed result record: ") + e.what());
    }
}

CampaignPaths::CampaignPaths(fs::path campaign_dir) :
    root(std::move(campaign_dir)),
    pending(root / "pending"),
    leased(root / "leased"),
    done(root / "done"),
    duplicates(root / "duplicates"),
    staging(root / "staging"),
    manifest(root / "campaign.json"),
    journal(root / "journal.log"),
    lock(root / ".lock")
{
}

auto CampaignPaths::model_file(const fs::path & dir, const std::string & unit) const -> fs::path
{
    return dir / (unit + ".model");
}

auto CampaignPaths::result_file(const fs::path & dir, const std::string & unit) const -> fs::path
{
    return dir / (unit + ".result");
}

auto CampaignPaths::state_file(const fs::path & dir, const std::string & unit) const -> fs::path
{
    return dir / (unit + ".state");
}

class WorkQueue::Guard {
public:
    Guard(std::mutex & m, int fd) : lock_(m), fd_(fd)
    {
        if (fd_ >= 0)
            while (::flock(fd_, LOCK_EX) != 0 && errno == EINTR) {
            }
    }
    ~Guard()
    {
        if (fd_ >= 0)
            ::flock(fd_, LOCK_UN);
    }
    Guard(const Guard &) = delete;
    auto operator=(const Guard &) -> Guard & = delete;

private:
    std::unique_lock<std::mutex> lock_;
    int fd_;
};

namespace {
    struct UnitState {
        std::uint64_t seq = 0;
        int attempt_count = 0;
        std::string worker_id;
        std::int64_t deadline_ms = 0;
    };

    auto read_state(const fs::path & p) -> UnitState
    {
        UnitState s;
        if (! fs::exists(p))
            return s;
        auto j = json::parse(read_file(p));
        s.seq = j.value("seq", std::uint64_t{0});
        s.attempt_count = j.value("attempt_count", 0);
        s.worker_id = j.value("worker_id", std::string{});
        s.deadline_ms = j.value("deadline_ms", std::int64_t{0});
        return s;
    }

    void write_state(const fs::path & p, const UnitState & s)
    {
        json j{{"seq", s.seq}, {"attempt_count", s.attempt_count}};
        if (! s.worker_id.empty()) {
            j["worker_id"] = s.worker_id;
            j["deadline_ms"] = s.deadline_ms;
        }
        write_file_atomic(p, j.dump() + "\n");
    }

    auto units_in(const fs::path & dir) -> std::vector<std::string>
    {
        std::vector<std::string> out;
        if (! fs::exists(dir))
            return out;
        for (auto & e : fs::directory_iterator(dir)) {
            auto name = e.path().filename().string();
            if (e.path().extension() == ".model" && name.find(".tmp.") == std::string::npos)
                out.push_back(e.path().stem().string());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    void move_if_exists(const fs::path & from, const fs::path & to)
    {
        if (fs::exists(from))
            fs::rename(from, to);
    }
}

WorkQueue::WorkQueue(CampaignPaths paths, std::string campaign_id) :
    paths_(std::move(paths)),
    campaign_id_(std::move(campaign_id)),
    mutex_(std::make_unique<std::mutex>())
{
}

WorkQueue::WorkQueue(WorkQueue && o) noexcept :
    paths_(std::move(o.paths_)),
    campaign_id_(std::move(o.campaign_id_)),
    root_unit_(std::move(o.root_unit_)),
    lease_duration_(o.lease_duration_),
    mutex_(std::move(o.mutex_)),
    lock_fd_(std::exchange(o.lock_fd_, -1)),
    sequence_(o.sequence_)
{
}

WorkQueue::~WorkQueue()
{
    if (lock_fd_ >= 0)
        ::close(lock_fd_);
}

auto WorkQueue::lock() const -> Guard
{
    return Guard{*mutex_, lock_fd_};
}

auto WorkQueue::exists(const fs::path & spool, const std::string & campaign_id) -> bool
{
    return fs::exists(CampaignPaths{spool / campaign_id}.manifest);
}

auto WorkQueue::submit_root(const fs::path & spool, const std::string & campaign_id, Model root,
    std::chrono::milliseconds lease_duration) -> WorkQueue
{
    if (campaign_id.empty() || campaign_id.find('/') != std::string::npos)
        throw SpoolError("invalid campaign id '" + campaign_id + "'");
    if (exists(spool, campaign_id))
        throw SpoolError("campaign '" + campaign_id + "' already exists in " + spool.string());
    if (lease_duration.count() <= 0)
        throw SpoolError("lease duration must be positive");
    if (auto report = validate_model(root); ! report.ok())
        throw InvalidModel(report);

    CampaignPaths paths{spool / campaign_id};
    for (auto & d : {paths.pending, paths.leased, paths.done, paths.duplicates, paths.staging})
        fs::create_directories(d);

    root.lineage = LineageTag{campaign_id, std::nullopt, campaign_id};

    WorkQueue q{paths, campaign_id};
    q.root_unit_ = campaign_id;
    q.lease_duration_ = lease_duration;
    q.lock_fd_ = ::open(paths.lock.c_str(), O_RDWR | O_CREAT, 0644);
    {
        auto g = q.lock();
        json manifest{{"campaign_id", campaign_id}, {"root_unit", q.root_unit_},
            {"lease_ms", lease_duration.count()}, {"format_version", kUnitFormatVersion}};
        write_file_atomic(paths.manifest, manifest.dump(2) + "\n");
        q.enqueue_model(root, 0);
        q.journal("SUBMIT " + q.root_unit_);
    }
    return q;
}

auto WorkQueue::open(const fs::path & spool, const std::string & campaign_id) -> WorkQueue
{
    CampaignPaths paths{spool / campaign_id};
    if (! fs::exists(paths.manifest))
        throw SpoolError("no campaign '" + campaign_id + "' in " + spool.string());
    auto manifest = json::parse(read_file(paths.manifest));
    WorkQueue q{paths, campaign_id};
    q.root_unit_ = manifest.at("root_unit").get<std::string>();
    q.lease_duration_ = std::chrono::milliseconds{manifest.at("lease_ms").get<std::int64_t>()};
    for (auto & d : {paths.pending, paths.leased, paths.done, paths.duplicates, paths.staging})
        fs::create_directories(d);
    q.lock_fd_ = ::open(paths.lock.c_str(), O_RDWR | O_CREAT, 0644);
    {
        auto g = q.lock();
        q.recover();
    }
    return q;
}

void WorkQueue::journal(const std::string & line) const
{
    std::ofstream out(paths_.journal, std::ios::app);
    out << epoch_ms(Clock::now()) << " " << line << "\n";
}

void WorkQueue::enqueue_model(const Model & m, int attempt_count)
{
    const std::string & id = m.lineage->unit_id;
    // the sequence lives in the pending state so that FIFO order survives restarts
    std::uint64_t seq = 0;
    for (auto dir : {paths_.pending, paths_.leased, paths_.done})
        for (auto & u : units_in(dir))
            seq = std::max(seq, read_state(paths_.state_file(dir, u)).seq);
    seq = std::max(seq, sequence_) + 1;
    sequence_ = seq;
    UnitState s;
    s.seq = seq;
    s.attempt_count = attempt_count;
    write_state(paths_.state_file(paths_.pending, id), s);
    write_unit(m, paths_.model_file(paths_.pending, id));
}

auto WorkQueue::locate(const std::string & unit_id) const -> std::optional<UnitStatus>
{
    if (fs::exists(paths_.result_file(paths_.done, unit_id)) || fs::exists(paths_.model_file(paths_.done, unit_id)))
        return UnitStatus::done;
    if (fs::exists(paths_.model_file(paths_.leased, unit_id)))
        return UnitStatus::leased;
    if (fs::exists(paths_.model_file(paths_.pending, unit_id)))
        return UnitStatus::pending;
    return std::nullopt;
}

auto WorkQueue::scan(UnitStatus status) const -> std::vector<WorkUnit>
{
    const fs::path & dir = status == UnitStatus::pending ? paths_.pending
        : status == UnitStatus::leased                   ? paths_.leased
                                                         : paths_.done;
    std::vector<std::pair<std::uint64_t, WorkUnit>> found;
    if (status == UnitStatus::failed)
        return {};
    for (auto & id : units_in(dir)) {
        auto st = read_state(paths_.state_file(dir, id));
        WorkUnit u;
        u.unit_id = id;
        u.model_path = paths_.model_file(dir, id);
        u.status = status;
        u.attempt_count = st.attempt_count;
        if (auto dot = id.rfind('.'); dot != std::string::npos && id != root_unit_)
            u.parent_id = id.substr(0, dot);
        if (status == UnitStatus::leased && ! st.worker_id.empty())
            u.lease = Lease{st.worker_id, from_epoch_ms(st.deadline_ms)};
        found.emplace_back(st.seq, std::move(u));
    }
    std::stable_sort(found.begin(), found.end(), [](auto & a, auto & b) { return a.first < b.first; });
    std::vector<WorkUnit> out;
    for (auto & [seq, u] : found)
        out.push_back(std::move(u));
    return out;
}

auto WorkQueue::lease_next(const std::string & worker_id, Clock::time_point now) -> std::optional<WorkUnit>
{
    auto g = lock();
    auto pending = scan(UnitStatus::pending);
    if (pending.empty())
        return std::nullopt;

    WorkUnit u = std::move(pending.front());
    auto st = read_state(paths_.state_file(paths_.pending, u.unit_id));
    st.attempt_count += 1;
    st.worker_id = worker_id;
    st.deadline_ms = epoch_ms(now + lease_duration_);

    fs::rename(paths_.model_file(paths_.pending, u.unit_id), paths_.model_file(paths_.leased, u.unit_id));
    write_state(paths_.state_file(paths_.leased, u.unit_id), st);
    fs::remove(paths_.state_file(paths_.pending, u.unit_id));

    u.model_path = paths_.model_file(paths_.leased, u.unit_id);
    u.status = UnitStatus::leased;
    u.attempt_count = st.attempt_count;
    u.lease = Lease{worker_id, from_epoch_ms(st.deadline_ms)};
    journal("LEASE " + u.unit_id + " " + std::to_string(st.attempt_count) + " " + worker_id);
    return u;
}

auto WorkQueue::heartbeat(const std::string & worker_id, const std::string & unit_id, Clock::time_point now) -> bool
{
    auto g = lock();
    auto state_path = paths_.state_file(paths_.leased, unit_id);
    if (! fs::exists(paths_.model_file(paths_.leased, unit_id)))
        return false;
    auto st = read_state(state_path);
    if (st.worker_id != worker_id)
        return false;
    st.deadline_ms = epoch_ms(now + lease_duration_);
    write_state(state_path, st);
    return true;
}

auto WorkQueue::report_result(const std::string & worker_id, const UnitResult & result,
    const std::vector<Model> & children, Clock::time_point) -> ReportOutcome
{
    auto g = lock();
    const std::string & id = result.unit_id;
    auto where = locate(id);
    if (! where)
        throw SpoolError("report for unknown unit '" + id + "'");

    if (result.status == ResultStatus::split && children.size() != result.child_unit_ids.size())
        throw SpoolError("report for '" + id + "' lists " + std::to_string(result.child_unit_ids.size())
            + " children but carries " + std::to_string(children.size()) + " models");

    const std::string tag = id + "+" + std::to_string(result.attempt);

    if (*where == UnitStatus::done) {
        auto dup = paths_.result_file(paths_.duplicates, tag);
        for (int k = 1; fs::exists(dup); ++k)
            dup = paths_.result_file(paths_.duplicates, tag + "-" + std::to_string(k));
        write_file_atomic(dup, result_to_json(result).dump(2) + "\n");
        for (auto & c : children)
            write_unit(c, paths_.model_file(paths_.duplicates, c.lineage->unit_id + "+" + std::to_string(result.attempt)));
        journal("DUP " + id + " " + std::to_string(result.attempt) + " " + worker_id);
        return ReportOutcome::duplicate;
    }

    // Children are staged first; the result file in done/ is the commit point.
    auto stage = paths_.staging / tag;
    fs::create_directories(stage);
    for (auto & c : children)
        write_unit(c, paths_.model_file(stage, c.lineage->unit_id));

    write_file_atomic(paths_.result_file(paths_.done, id), result_to_json(result).dump(2) + "\n");
    recover();
    journal("DONE " + id + " " + std::to_string(result.attempt) + " " + worker_id);
    return ReportOutcome::accepted;
}

void WorkQueue::recover()
{
    // Finish committed reports.
    for (auto & id : [&] {
             std::vector<std::string> ids;
             for (auto & e : fs::directory_iterator(paths_.done))
                 if (e.path().extension() == ".result" && e.path().filename().string().find(".tmp.") == std::string::npos)
                     ids.push_back(e.path().stem().string());
             return ids;
         }()) {
        if (fs::exists(paths_.model_file(paths_.done, id)))
            continue;
        auto result = result_from_json(json::parse(read_file(paths_.result_file(paths_.done, id))));
        auto stage = paths_.staging / (id + "+" + std::to_string(result.attempt));
        for (auto & child : result.child_unit_ids) {
            auto staged = paths_.model_file(stage, child);
            if (! locate(child) && fs::exists(staged))
                enqueue_model(read_unit(staged), 0);
        }
        fs::path from_dir = fs::exists(paths_.model_file(paths_.leased, id)) ? paths_.leased : paths_.pending;
        auto st = read_state(paths_.state_file(from_dir, id));
        st.worker_id.clear();
        write_state(paths_.state_file(paths_.done, id), st);
        move_if_exists(paths_.model_file(from_dir, id), paths_.model_file(paths_.done, id));
        fs::remove(paths_.state_file(from_dir, id));
        fs::remove_all(stage);
    }

    // Anything left in staging belongs to a report that never committed.
    if (fs::exists(paths_.staging))
        for (auto & e : fs::directory_iterator(paths_.staging)) {
            auto name = e.path().filename().string();
            auto plus = name.rfind('+');
            auto id = name.substr(0, plus);
            if (! fs::exists(paths_.result_file(paths_.done, id)) || fs::exists(paths_.model_file(paths_.done, id)))
                fs::remove_all(e.path());
        }
}

auto WorkQueue::requeue_expired(Clock::time_point now) -> std::size_t
{
    auto g = lock();
    std::size_t n = 0;
    for (auto & u : scan(UnitStatus::leased)) {
        auto st = read_state(paths_.state_file(paths_.leased, u.unit_id));
        if (! st.worker_id.empty() && from_epoch_ms(st.deadline_ms) > now)
            continue;
        std::string holder = st.worker_id;
        st.worker_id.clear();
        write_state(paths_.state_file(paths_.pending, u.unit_id), st);
        fs::rename(paths_.model_file(paths_.leased, u.unit_id), paths_.model_file(paths_.pending, u.unit_id));
        fs::remove(paths_.state_file(paths_.leased, u.unit_id));
        journal("REQUEUE " + u.unit_id + " " + std::to_string(st.attempt_count) + " " + holder);
        ++n;
    }
    return n;
}

auto WorkQueue::requeue_all_leased() -> std::size_t
{
    return requeue_expired(Clock::time_point::max());
}

auto WorkQueue::units(UnitStatus status) const -> std::vector<WorkUnit>
{
    auto g = lock();
    return scan(status);
}

auto WorkQueue::count(UnitStatus status) const -> std::size_t
{
    auto g = lock();
    switch (status) {
    case UnitStatus::pending: return units_in(paths_.pending).size();
    case UnitStatus::leased: return units_in(paths_.leased).size();
    case UnitStatus::done: return units_in(paths_.done).size();
    case UnitStatus::failed: return 0;
    }
    return 0;
}

auto WorkQueue::finished() const -> bool
{
    auto g = lock();
    return units_in(paths_.pending).empty() && units_in(paths_.leased).empty();
}

auto WorkQueue::find(const std::string & unit_id) const -> std::optional<WorkUnit>
{
    auto g = lock();
    auto where = locate(unit_id);
    if (! where)
        return std::nullopt;
    for (auto & u : scan(*where))
        if (u.unit_id == unit_id)
            return u;
    return std::nullopt;
}

} // namespace splitsolve
