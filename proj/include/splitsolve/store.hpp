#pragma once

#include <splitsolve/domain.hpp>
#include <splitsolve/model.hpp>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace splitsolve {

/// Current domains during search, with a trail so that every change made
/// after push_level() is undone by the matching pop_level().
///
/// Besides domains the store carries a small array of integer slots that
/// propagators use for backtrackable state of their own.
class DomainStore {
public:
    DomainStore() = default;
    explicit DomainStore(const Model & model);
    explicit DomainStore(std::vector<Domain> domains);

    auto size() const -> int { return static_cast<int>(domains_.size()); }
    auto domain(VarId v) const -> Domain { return domains_[v]; }
    auto domains() const -> std::span<const Domain> { return domains_; }
    auto assigned(VarId v) const -> bool { return domains_[v].is_single(); }
    auto all_assigned() const -> bool;

    /// Intersects the domain of v with keep. Returns false if it empties,
    /// in which case the store is in conflict until the next pop_level().
    auto restrict(VarId v, Domain keep) -> bool;

    auto conflict() const -> bool { return conflict_; }

    void push_level();
    void pop_level();
    auto level() const -> int { return static_cast<int>(marks_.size()); }

    auto aux(std::size_t slot) const -> int { return aux_[slot]; }
    void set_aux(std::size_t slot, int value);
    void ensure_aux(std::size_t slots) { if (aux_.size() < slots) aux_.resize(slots, 0); }

    /// Variables whose domains changed since the last call.
    /// Moves them into out (which is cleared first).
    void drain_changes(std::vector<VarId> & out);
    auto has_changes() const -> bool { return ! changes_.empty(); }
    void discard_changes() { changes_.clear(); }

    /// The full assignment; only meaningful when all_assigned().
    auto assignment() const -> std::vector<int>;

private:
    struct Mark {
        std::size_t trail;
        std::size_t aux_trail;
    };

    std::vector<Domain> domains_;
    std::vector<std::pair<VarId, Domain>> trail_;
    std::vector<int> aux_;
    std::vector<std::pair<std::size_t, int>> aux_trail_;
    std::vector<Mark> marks_;
    std::vector<VarId> changes_;
    bool conflict_ = false;
};

} // namespace splitsolve
