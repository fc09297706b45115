#include <splitsolve/propagation.hpp>
#include <splitsolve/search.hpp>

namespace splitsolve {

using std::chrono::duration_cast;
using std::chrono::milliseconds;
using std::chrono::steady_clock;

auto stats_of(const SearchOutcome & outcome) -> const SearchStats &
{
    return std::visit([](const auto & o) -> const SearchStats & { return o.stats; }, outcome);
}

auto select_decision(const DomainStore & store) -> std::pair<VarId, int>
{
    for (VarId v = 0; v < store.size(); ++v) {
        Domain d = store.domain(v);
        if (d.size() > 1)
            return {v, d.min()};
    }
    throw std::logic_error("select_decision: every variable is assigned");
}

auto limits_from_options(const SolverOptions & options) -> SearchLimits
{
    SearchLimits limits;
    if (options.budget_ms > 0)
        limits.budget = milliseconds{options.budget_ms};
    return limits;
}

namespace {
    class Search {
    public:
        Search(const Model & model, const SearchLimits & limits, const SolutionSink & sink) :
            engine_(model),
            store_(model),
            limits_(limits),
            sink_(sink),
            start_(steady_clock::now())
        {
            countdown_ = 1;
        }

        auto run() -> SearchOutcome
        {
            engine_.attach(store_);
            stats_.node_count = 1;
            if (engine_.propagate_all(store_) == PropagationResult::conflict)
                return finish_exhausted();
            tick();

            while (true) {
                if (store_.all_assigned()) {
                    record_solution();
                    if (! backtrack())
                        return finish_exhausted();
                    continue;
                }

                auto [var, value] = select_decision(store_);
                if (stop_requested_)
                    return finish_stopped(var);

                // left branch: var = value
                path_.push_back(Decision{var, value, Polarity::assign, false});
                store_.push_level();
                if (enter(Domain::single(value), var))
                    continue;
                if (! backtrack())
                    return finish_exhausted();
            }
        }

    private:
        // Applies the decision restriction at the new level and propagates.
        auto enter(Domain keep, VarId var) -> bool
        {
            ++stats_.node_count;
            bool ok = store_.restrict(var, keep) && engine_.propagate_changes(store_) == PropagationResult::fixpoint;
            tick();
            return ok;
        }

        // Unwinds to the next unexplored right branch and enters it.
        // Returns false when the tree is exhausted.
        auto backtrack() -> bool
        {
            while (! path_.empty()) {
                Decision & d = path_.back();
                store_.pop_level();
                if (d.polarity == Polarity::assign) {
                    d.polarity = Polarity::refute;
                    d.sibling_explored = true;
                    store_.push_level();
                    if (enter(store_.domain(d.var).without(Domain::single(d.value)), d.var))
                        return true;
                    continue;
                }
                path_.pop_back();
            }
            return false;
        }

        void record_solution()
        {
            ++stats_.solution_count;
            if (sink_) {
                auto a = store_.assignment();
                sink_(a);
            }
        }

        void tick()
        {
            if (limits_.node_limit && stats_.node_count >= *limits_.node_limit)
                stop_requested_ = true;
            if (--countdown_ > 0)
                return;
            countdown_ = limits_.check_interval;
            if (limits_.checkpoint)
                limits_.checkpoint(stats_.node_count);
            if (limits_.budget && steady_clock::now() - start_ >= *limits_.budget)
                stop_requested_ = true;
        }

        auto elapsed() const -> milliseconds { return duration_cast<milliseconds>(steady_clock::now() - start_); }

        auto finish_exhausted() -> SearchOutcome
        {
            stats_.wall_time = elapsed();
            return Exhausted{stats_};
        }

        auto finish_stopped(VarId var) -> SearchOutcome
        {
            stats_.wall_time = elapsed();
            return Stopped{ResumeState{path_, var, store_.domain(var)}, stats_};
        }

        PropagationEngine engine_;
        DomainStore store_;
        const SearchLimits & limits_;
        const SolutionSink & sink_;
        steady_clock::time_point start_;
        std::vector<Decision> path_;
        SearchStats stats_;
        std::uint64_t countdown_;
        bool stop_requested_ = false;
    };
}

auto solve(const Model & model, const SearchLimits & limits, const SolutionSink & sink) -> SearchOutcome
{
    if (limits.budget && limits.budget->count() <= 0)
        throw std::invalid_argument("solve: budget must be positive");
    if (limits.check_interval == 0)
        throw std::invalid_argument("solve: check interval must be positive");
    if (auto report = validate_model(model); ! report.ok())
        throw InvalidModel(report);
    Search search{model, limits, sink};
    return search.run();
}

auto solve(const Model & model, std::optional<milliseconds> budget, const SolutionSink & sink) -> SearchOutcome
{
    SearchLimits limits;
    limits.budget = budget;
    return solve(model, limits, sink);
}

} // namespace splitsolve
