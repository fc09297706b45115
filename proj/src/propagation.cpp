#include <splitsolve/propagation.hpp>

#include <algorithm>

namespace splitsolve {

ElementPropagator::ElementPropagator(const Element & c) :
    c_(c)
{
    auto role_of = [&](VarId v) -> Role & {
        for (auto & r : roles_)
            if (r.var == v)
                return r;
        roles_.push_back(Role{v, false, false, 0});
        return roles_.back();
    };
    role_of(c_.index).is_index = true;
    role_of(c_.result).is_result = true;
    for (std::size_t q = 0; q < c_.list.size() && q < kDomainCapacity; ++q)
        role_of(c_.list[q]).list_positions |= std::uint64_t{1} << q;
    for (std::size_t q = kDomainCapacity; q < c_.list.size(); ++q)
        role_of(c_.list[q]);
}

auto ElementPropagator::variables() const -> std::vector<VarId>
{
    std::vector<VarId> out;
    for (auto & r : roles_)
        out.push_back(r.var);
    return out;
}

auto ElementPropagator::propagate(DomainStore & store) -> bool
{
    const int k = static_cast<int>(std::min<std::size_t>(c_.list.size(), kDomainCapacity));
    const Domain index_dom = store.domain(c_.index) & Domain::range(0, k - 1);
    const Domain result_dom = store.domain(c_.result);

    // For each feasible index value p, the result values with a support
    // through list[p].
    Domain through[kDomainCapacity];
    Domain valid_index;
    index_dom.for_each([&](int p) {
        VarId m = c_.list[p];
        Domain v = result_dom & store.domain(m);
        if (c_.index == c_.result || c_.index == m)
            v = v & Domain::single(p);
        through[p] = v;
        if (! v.empty())
            valid_index.insert(p);
    });

    if (valid_index.empty()) {
        store.restrict(c_.index, Domain{});
        return false;
    }

    for (auto & r : roles_) {
        Domain supported;
        bool free = false;
        valid_index.for_each([&](int p) {
            if (free)
                return;
            if (r.is_index)
                supported.insert(p);
            else if (r.is_result || ((r.list_positions >> p) & 1U))
                supported = supported | through[p];
            else
                free = true;
        });
        if (free)
            continue;
        if (! store.restrict(r.var, supported))
            return false;
    }
    return true;
}

namespace {
    class UnaryBoundPropagator final : public Propagator {
    public:
        explicit UnaryBoundPropagator(const UnaryBound & c) : c_(c) {}

        auto propagate(DomainStore & store) -> bool override
        {
            return store.restrict(c_.var, op_filter(c_.op, store.domain(c_.var), c_.value));
        }

        auto variables() const -> std::vector<VarId> override { return {c_.var}; }

    private:
        UnaryBound c_;
    };

    /// flat <=_lex value_map(flat o position_map). Slot 0 holds the first
    /// position not yet known to be fixed and equal, slot 1 is set once the
    /// constraint is entailed.
    class LexLeaderPropagator final : public Propagator {
    public:
        explicit LexLeaderPropagator(const LexLeaderMapped & c) :
            c_(c)
        {
        }

        auto variables() const -> std::vector<VarId> override
        {
            std::vector<VarId> out = c_.flat;
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        }

        auto aux_slots() const -> std::size_t override { return 2; }

        auto propagate(DomainStore & store) -> bool override
        {
            const int length = static_cast<int>(c_.flat.size());
            while (true) {
                if (store.aux(aux_base_ + 1))
                    return true;

                int p = store.aux(aux_base_);
                while (p < length) {
                    Domain x = store.domain(c_.flat[p]);
                    Domain y = store.domain(source(p));
                    if (! (x.is_single() && y.is_single()))
                        break;
                    int xv = x.min(), yv = c_.value_map[y.min()];
                    if (xv == yv) {
                        ++p;
                        continue;
                    }
                    if (xv < yv) {
                        store.set_aux(aux_base_ + 1, 1);
                        return true;
                    }
                    store.restrict(c_.flat[p], Domain{});
                    return false;
                }
                if (p == length) {
                    store.set_aux(aux_base_ + 1, 1);
                    return true;
                }
                store.set_aux(aux_base_, p);

                const bool strict = tail_forces_greater(store, p + 1);
                const VarId xvar = c_.flat[p], yvar = source(p);
                bool changed = false;

                if (xvar == yvar) {
                    Domain d = store.domain(xvar), keep;
                    d.for_each([&](int a) {
                        int image = c_.value_map[a];
                        if (a < image || (! strict && a == image))
                            keep.insert(a);
                    });
                    changed = keep != d;
                    if (! store.restrict(xvar, keep))
                        return false;
                }
                else {
                    Domain xd = store.domain(xvar);
                    int max_y = mapped(store.domain(yvar)).max();
                    Domain xkeep = Domain::at_most(strict ? max_y - 1 : max_y);
                    changed = ! xd.subset_of(xkeep);
                    if (! store.restrict(xvar, xkeep))
                        return false;

                    int min_x = store.domain(xvar).min();
                    Domain yd = store.domain(yvar), ykeep;
                    yd.for_each([&](int s) {
                        int image = c_.value_map[s];
                        if (image > min_x || (! strict && image == min_x))
                            ykeep.insert(s);
                    });
                    changed = changed || ykeep != yd;
                    if (! store.restrict(yvar, ykeep))
                        return false;
                }

                if (! changed)
                    return true;
            }
        }

    private:
        auto source(int p) const -> VarId { return c_.flat[c_.position_map[p]]; }

        auto mapped(Domain d) const -> Domain
        {
            Domain out;
            d.for_each([&](int v) { out.insert(c_.value_map[v]); });
            return out;
        }

        // True when equality at every position before q would force the
        // flat vector to be lexicographically greater than its image.
        auto tail_forces_greater(const DomainStore & store, int q) const -> bool
        {
            const int length = static_cast<int>(c_.flat.size());
            for (; q < length; ++q) {
                Domain x = store.domain(c_.flat[q]);
                Domain y = mapped(store.domain(source(q)));
                if (x.is_single() && y.is_single() && x.min() == y.min())
                    continue;
                return x.min() > y.max();
            }
            return false;
        }

        LexLeaderMapped c_;
    };

    /// At least one region holds. Slot r is 1 once region r is known dead.
    class FrontierPropagator final : public Propagator {
    public:
        explicit FrontierPropagator(const FrontierDisjunction & c) : c_(c) {}

        auto variables() const -> std::vector<VarId> override
        {
            std::vector<VarId> out;
            for (auto & r : c_.regions)
                for (auto & l : r.literals)
                    out.push_back(l.var);
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        }

        auto aux_slots() const -> std::size_t override { return c_.regions.size(); }

        auto propagate(DomainStore & store) -> bool override
        {
            int live = 0;
            std::size_t last_live = 0;
            for (std::size_t r = 0; r < c_.regions.size(); ++r) {
                if (store.aux(aux_base_ + r))
                    continue;
                if (! region_possible(store, c_.regions[r])) {
                    store.set_aux(aux_base_ + r, 1);
                    continue;
                }
                ++live;
                last_live = r;
            }
            if (live == 0) {
                if (VarId v = first_var(); v >= 0)
                    store.restrict(v, Domain{});
                return false;
            }
            if (live == 1)
                for (auto & l : c_.regions[last_live].literals)
                    if (! store.restrict(l.var, op_filter(l.op, store.domain(l.var), l.value)))
                        return false;
            return true;
        }

    private:
        auto first_var() const -> VarId
        {
            for (auto & r : c_.regions)
                for (auto & l : r.literals)
                    return l.var;
            return -1;
        }

        static auto region_possible(const DomainStore & store, const Region & region) -> bool
        {
            scratch_.clear();
            for (auto & l : region.literals) {
                auto it = std::find_if(scratch_.begin(), scratch_.end(), [&](auto & e) { return e.first == l.var; });
                if (it == scratch_.end()) {
                    scratch_.emplace_back(l.var, store.domain(l.var));
                    it = scratch_.end() - 1;
                }
                it->second = op_filter(l.op, it->second, l.value);
                if (it->second.empty())
                    return false;
            }
            return true;
        }

        inline static thread_local std::vector<std::pair<VarId, Domain>> scratch_;
        FrontierDisjunction c_;
    };

    class NonZeroWitnessPropagator final : public Propagator {
    public:
        explicit NonZeroWitnessPropagator(const NonZeroWitness & c) : c_(c) {}

        auto variables() const -> std::vector<VarId> override { return c_.vars; }

        auto propagate(DomainStore & store) -> bool override
        {
            int candidates = 0;
            VarId candidate = -1;
            for (VarId v : c_.vars) {
                if (! store.domain(v).without(Domain::single(0)).empty()) {
                    if (++candidates > 1)
                        return true;
                    candidate = v;
                }
            }
            if (candidates == 0) {
                if (! c_.vars.empty())
                    store.restrict(c_.vars.front(), Domain{});
                return false;
            }
            return store.restrict(candidate, store.domain(candidate).without(Domain::single(0)));
        }

    private:
        NonZeroWitness c_;
    };

    auto make_propagator(const Constraint & c) -> std::unique_ptr<Propagator>
    {
        return std::visit(
            [](const auto & k) -> std::unique_ptr<Propagator> {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Element>)
                    return std::make_unique<ElementPropagator>(k);
                else if constexpr (std::is_same_v<K, UnaryBound>)
                    return std::make_unique<UnaryBoundPropagator>(k);
                else if constexpr (std::is_same_v<K, LexLeaderMapped>)
                    return std::make_unique<LexLeaderPropagator>(k);
                else if constexpr (std::is_same_v<K, FrontierDisjunction>)
                    return std::make_unique<FrontierPropagator>(k);
                else
                    return std::make_unique<NonZeroWitnessPropagator>(k);
            },
            c);
    }
}

PropagationEngine::PropagationEngine(const Model & model) :
    watches_(model.variables.size())
{
    propagators_.reserve(model.constraints.size());
    for (auto & c : model.constraints) {
        auto p = make_propagator(c);
        p->set_aux_base(aux_slots_);
        aux_slots_ += p->aux_slots();
        for (VarId v : p->variables())
            watches_[v].push_back(propagators_.size());
        propagators_.push_back(std::move(p));
    }
    queued_.assign(propagators_.size(), 0);
    queue_.reserve(propagators_.size());
}

void PropagationEngine::attach(DomainStore & store) const
{
    store.ensure_aux(aux_slots_);
}

void PropagationEngine::enqueue(std::size_t p)
{
    if (! queued_[p]) {
        queued_[p] = 1;
        queue_.push_back(p);
    }
}

void PropagationEngine::wake(DomainStore & store, std::size_t running)
{
    store.drain_changes(changed_);
    for (VarId v : changed_)
        for (std::size_t p : watches_[v])
            if (p != running)
                enqueue(p);
}

auto PropagationEngine::run_queue(DomainStore & store) -> PropagationResult
{
    while (queue_head_ < queue_.size()) {
        std::size_t p = queue_[queue_head_++];
        queued_[p] = 0;
        ++calls_;
        if (! propagators_[p]->propagate(store)) {
            for (std::size_t i = queue_head_; i < queue_.size(); ++i)
                queued_[queue_[i]] = 0;
            queue_.clear();
            queue_head_ = 0;
            store.discard_changes();
            return PropagationResult::conflict;
        }
        wake(store, p);
        if (queue_head_ > 4096 && queue_head_ * 2 > queue_.size()) {
            queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(queue_head_));
            queue_head_ = 0;
        }
    }
    queue_.clear();
    queue_head_ = 0;
    return PropagationResult::fixpoint;
}

auto PropagationEngine::propagate_all(DomainStore & store) -> PropagationResult
{
    attach(store);
    store.discard_changes();
    for (std::size_t p = 0; p < propagators_.size(); ++p)
        enqueue(p);
    return run_queue(store);
}

auto PropagationEngine::propagate_changes(DomainStore & store) -> PropagationResult
{
    if (store.conflict()) {
        store.discard_changes();
        return PropagationResult::conflict;
    }
    wake(store, propagators_.size());
    return run_queue(store);
}

auto propagate(const Model & model, DomainStore & store) -> PropagationResult
{
    if (store.conflict())
        return PropagationResult::conflict;
    PropagationEngine engine{model};
    return engine.propagate_all(store);
}

auto propagate_element(const Element & c, DomainStore & store) -> std::optional<std::vector<VarId>>
{
    ElementPropagator p{c};
    store.discard_changes();
    if (! p.propagate(store)) {
        store.discard_changes();
        return std::nullopt;
    }
    std::vector<VarId> changed;
    store.drain_changes(changed);
    std::sort(changed.begin(), changed.end());
    changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
    return changed;
}

} // namespace splitsolve
