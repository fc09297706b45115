#include <splitsolve/store.hpp>

#include <algorithm>

namespace splitsolve {

DomainStore::DomainStore(const Model & model)
{
    domains_.reserve(model.variables.size());
    for (auto & v : model.variables)
        domains_.push_back(v.domain);
}

DomainStore::DomainStore(std::vector<Domain> domains) :
    domains_(std::move(domains))
{
}

auto DomainStore::all_assigned() const -> bool
{
    return std::all_of(domains_.begin(), domains_.end(), [](Domain d) { return d.is_single(); });
}

auto DomainStore::restrict(VarId v, Domain keep) -> bool
{
    Domain old = domains_[v];
    Domain updated = old & keep;
    if (updated == old)
        return ! old.empty();
    if (! marks_.empty())
        trail_.emplace_back(v, old);
    domains_[v] = updated;
    changes_.push_back(v);
    if (updated.empty()) {
        conflict_ = true;
        return false;
    }
    return true;
}

void DomainStore::push_level()
{
    marks_.push_back(Mark{trail_.size(), aux_trail_.size()});
}

void DomainStore::pop_level()
{
    Mark m = marks_.back();
    marks_.pop_back();
    while (trail_.size() > m.trail) {
        auto [v, d] = trail_.back();
        domains_[v] = d;
        trail_.pop_back();
    }
    while (aux_trail_.size() > m.aux_trail) {
        auto [slot, value] = aux_trail_.back();
        aux_[slot] = value;
        aux_trail_.pop_back();
    }
    changes_.clear();
    conflict_ = false;
}

void DomainStore::set_aux(std::size_t slot, int value)
{
    if (aux_[slot] == value)
        return;
    if (! marks_.empty())
        aux_trail_.emplace_back(slot, aux_[slot]);
    aux_[slot] = value;
}

void DomainStore::drain_changes(std::vector<VarId> & out)
{
    out.clear();
    out.swap(changes_);
}

auto DomainStore::assignment() const -> std::vector<int>
{
    std::vector<int> out;
    out.reserve(domains_.size());
    for (auto d : domains_)
        out.push_back(d.empty() ? -1 : d.min());
    return out;
}

} // namespace splitsolve
