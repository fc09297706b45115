#pragma once

#include <splitsolve/model.hpp>
#include <splitsolve/store.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace splitsolve {

enum class PropagationResult { fixpoint, conflict };

class Propagator {
public:
    virtual ~Propagator() = default;

    /// Filters domains in store; returns false on conflict.
    virtual auto propagate(DomainStore & store) -> bool = 0;
    virtual auto variables() const -> std::vector<VarId> = 0;

    /// Number of backtrackable integer slots this propagator needs.
    virtual auto aux_slots() const -> std::size_t { return 0; }
    void set_aux_base(std::size_t base) { aux_base_ = base; }

protected:
    std::size_t aux_base_ = 0;
};

/// Domain-consistent filtering for result = list[index], exact even when
/// the same variable occurs in several roles.
class ElementPropagator final : public Propagator {
public:
    explicit ElementPropagator(const Element & c);

    auto propagate(DomainStore & store) -> bool override;
    auto variables() const -> std::vector<VarId> override;

private:
    struct Role {
        VarId var;
        bool is_index;
        bool is_result;
        std::uint64_t list_positions;
    };

    Element c_;
    std::vector<Role> roles_;
};

/// Builds one propagator per constraint and runs them to a common fixpoint
/// with a FIFO queue of constraints woken by domain changes.
class PropagationEngine {
public:
    explicit PropagationEngine(const Model & model);

    PropagationEngine(const PropagationEngine &) = delete;
    auto operator=(const PropagationEngine &) -> PropagationEngine & = delete;

    /// Makes store usable with this engine (allocates propagator state).
    void attach(DomainStore & store) const;

    /// Runs every propagator, then everything woken up, to fixpoint.
    auto propagate_all(DomainStore & store) -> PropagationResult;

    /// Runs only the propagators woken by changes recorded in store.
    auto propagate_changes(DomainStore & store) -> PropagationResult;

    auto propagator_count() const -> std::size_t { return propagators_.size(); }
    auto propagation_calls() const -> std::uint64_t { return calls_; }

private:
    void enqueue(std::size_t p);
    void wake(DomainStore & store, std::size_t running);
    auto run_queue(DomainStore & store) -> PropagationResult;

    std::vector<std::unique_ptr<Propagator>> propagators_;
    std::vector<std::vector<std::size_t>> watches_;
    std::vector<std::size_t> queue_;
    std::size_t queue_head_ = 0;
    std::vector<char> queued_;
    std::vector<VarId> changed_;
    std::size_t aux_slots_ = 0;
    std::uint64_t calls_ = 0;
};

/// One-shot propagation of the whole model over store.
auto propagate(const Model & model, DomainStore & store) -> PropagationResult;

/// Runs the element filter once on store. Returns the variables whose domains
/// shrank, or nullopt on conflict.
auto propagate_element(const Element & c, DomainStore & store) -> std::optional<std::vector<VarId>>;

} // namespace splitsolve
