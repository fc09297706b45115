#pragma once

#include <splitsolve/model.hpp>
#include <splitsolve/store.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace splitsolve {

enum class Polarity { assign, refute };

/// One edge on the path from the root: x = v (left) or x != v (right).
struct Decision {
    VarId var = 0;
    int value = 0;
    Polarity polarity = Polarity::assign;
    /// True once the complementary branch has been fully explored.
    bool sibling_explored = false;

    auto literal() const -> Literal
    {
        return Literal{var, polarity == Polarity::assign ? Op::eq : Op::ne, value};
    }

    auto operator==(const Decision &) const -> bool = default;
};

/// Where a stopped search was, enough to describe what it did not explore.
struct ResumeState {
    std::vector<Decision> path;
    VarId stop_var = 0;
    Domain stop_domain;
};

struct SearchStats {
    std::uint64_t solution_count = 0;
    std::uint64_t node_count = 0;
    std::chrono::milliseconds wall_time{0};
};

struct Exhausted {
    SearchStats stats;
};

struct Stopped {
    ResumeState resume;
    SearchStats stats;
};

using SearchOutcome = std::variant<Exhausted, Stopped>;

auto stats_of(const SearchOutcome & outcome) -> const SearchStats &;

using SolutionSink = std::function<void(std::span<const int>)>;

/// Thrown from a checkpoint hook to abandon the search without an outcome.
class SearchAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SearchLimits {
    /// Wall-clock budget; nullopt means unlimited.
    std::optional<std::chrono::milliseconds> budget;
    /// Nodes between clock checks.
    std::uint64_t check_interval = 512;
    /// Called at every clock check with the node count so far. May throw
    /// SearchAborted.
    std::function<void(std::uint64_t)> checkpoint;
    /// Stop (as if the budget ran out) once this many nodes were explored.
    /// Deterministic stand-in for the clock, used when testing splits.
    std::optional<std::uint64_t> node_limit;
};

/// Lowest-id variable with more than one value, paired with its smallest
/// value. Throws std::logic_error when every variable is assigned.
auto select_decision(const DomainStore & store) -> std::pair<VarId, int>;

/// Depth-first search with 2-way branching.
///
/// Exhausted means every solution was delivered to sink. Stopped means the
/// budget ran out; the solutions delivered so far together with the
/// solutions in the frontier described by the returned ResumeState are
/// exactly the solutions of the model. Throws std::invalid_argument for a
/// non-positive budget and InvalidModel for a model that fails validation.
auto solve(const Model & model, const SearchLimits & limits, const SolutionSink & sink = {}) -> SearchOutcome;

/// Convenience wrapper taking the budget alone.
auto solve(const Model & model, std::optional<std::chrono::milliseconds> budget, const SolutionSink & sink = {})
    -> SearchOutcome;

/// The limits stored in a model's options (budget_ms == 0 means unlimited).
auto limits_from_options(const SolverOptions & options) -> SearchLimits;

} // namespace splitsolve
