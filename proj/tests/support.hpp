#pragma once

#include <splitsolve/model.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testing {

using namespace splitsolve;

class TempDir {
public:
    TempDir()
    {
        std::string tmpl = (std::filesystem::temp_directory_path() / "splitsolve-test-XXXXXX").string();
        path_ = ::mkdtemp(tmpl.data());
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    auto operator=(const TempDir &) -> TempDir & = delete;

    auto path() const -> const std::filesystem::path & { return path_; }
    auto operator/(const std::string & name) const -> std::filesystem::path { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline auto random_domain(std::mt19937_64 & rng, int max_value) -> Domain
{
    std::uniform_int_distribution<int> coin(0, 1);
    Domain d;
    while (d.empty())
        for (int v = 0; v <= max_value; ++v)
            if (coin(rng))
                d.insert(v);
    return d;
}

/// Evaluates constraints directly from their definitions.
inline auto satisfies(const Model & m, const std::vector<int> & a) -> bool
{
    for (std::size_t v = 0; v < a.size(); ++v)
        if (! m.variables[v].domain.contains(a[v]))
            return false;
    auto lit = [&](const Literal & l) {
        int x = a[l.var];
        switch (l.op) {
        case Op::le: return x <= l.value;
        case Op::ge: return x >= l.value;
        case Op::eq: return x == l.value;
        case Op::ne: return x != l.value;
        }
        return false;
    };
    for (auto & c : m.constraints) {
        if (auto * e = std::get_if<Element>(&c)) {
            int p = a[e->index];
            if (p < 0 || p >= static_cast<int>(e->list.size()) || a[e->list[p]] != a[e->result])
                return false;
        }
        else if (auto * u = std::get_if<UnaryBound>(&c)) {
            if (! lit(Literal{u->var, u->op, u->value}))
                return false;
        }
        else if (auto * f = std::get_if<FrontierDisjunction>(&c)) {
            bool any = false;
            for (auto & r : f->regions) {
                bool all = true;
                for (auto & l : r.literals)
                    all = all && lit(l);
                any = any || all;
            }
            if (! any)
                return false;
        }
        else if (auto * w = std::get_if<NonZeroWitness>(&c)) {
            bool any = false;
            for (auto v : w->vars)
                any = any || a[v] != 0;
            if (! any)
                return false;
        }
        else if (auto * x = std::get_if<LexLeaderMapped>(&c)) {
            std::vector<int> lhs, rhs;
            for (std::size_t p = 0; p < x->flat.size(); ++p) {
                lhs.push_back(a[x->flat[p]]);
                rhs.push_back(x->value_map[a[x->flat[x->position_map[p]]]]);
            }
            if (rhs < lhs)
                return false;
        }
    }
    return true;
}

/// Every full assignment over the declared domains, in odometer order.
template <typename F>
void for_each_assignment(const Model & m, F && f)
{
    const int n = m.variable_count();
    std::vector<std::vector<int>> values;
    for (auto & v : m.variables) {
        values.push_back(v.domain.values());
        if (values.back().empty())
            return;
    }
    std::vector<std::size_t> digit(static_cast<std::size_t>(n), 0);
    std::vector<int> a(static_cast<std::size_t>(n));
    while (true) {
        for (int i = 0; i < n; ++i)
            a[i] = values[i][digit[i]];
        f(a);
        int i = n - 1;
        while (i >= 0 && ++digit[i] == values[i].size())
            digit[i--] = 0;
        if (i < 0)
            return;
    }
}

inline auto brute_solutions(const Model & m) -> std::set<std::vector<int>>
{
    std::set<std::vector<int>> out;
    for_each_assignment(m, [&](const std::vector<int> & a) {
        if (satisfies(m, a))
            out.insert(a);
    });
    return out;
}

/// Small models with Element and UnaryBound constraints, aliasing allowed.
inline auto random_toy_model(std::mt19937_64 & rng, int max_vars = 4, int max_value = 4) -> Model
{
    std::uniform_int_distribution<int> nvars(2, max_vars);
    Model m;
    const int n = nvars(rng);
    std::uniform_int_distribution<int> var(0, n - 1);
    for (int i = 0; i < n; ++i)
        m.add_variable("x" + std::to_string(i), random_domain(rng, max_value));

    std::uniform_int_distribution<int> ncons(0, 3);
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_int_distribution<int> value(0, max_value);
    std::uniform_int_distribution<int> op(0, 3);
    std::uniform_int_distribution<int> len(1, 4);
    const int k = ncons(rng);
    for (int c = 0; c < k; ++c) {
        if (kind(rng) == 0) {
            m.constraints.emplace_back(UnaryBound{var(rng), static_cast<Op>(op(rng)), value(rng)});
        }
        else {
            Element e;
            e.result = var(rng);
            e.index = var(rng);
            const int l = len(rng);
            for (int i = 0; i < l; ++i)
                e.list.push_back(var(rng));
            m.constraints.emplace_back(std::move(e));
        }
    }
    return m;
}

/// Supported values of each variable of an element constraint, by
/// enumerating all tuples over the distinct variables it mentions.
inline auto element_support(const Element & e, const std::vector<Domain> & doms) -> std::vector<Domain>
{
    std::vector<VarId> vars{e.result, e.index};
    vars.insert(vars.end(), e.list.begin(), e.list.end());
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

    std::vector<Domain> out = doms;
    for (auto v : vars)
        out[v] = Domain{};

    std::map<VarId, int> value;
    std::vector<std::vector<int>> choices;
    for (auto v : vars)
        choices.push_back(doms[v].values());

    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == vars.size()) {
            int p = value[e.index];
            if (p < 0 || p >= static_cast<int>(e.list.size()) || value[e.list[p]] != value[e.result])
                return;
            for (auto v : vars)
                out[v].insert(value[v]);
            return;
        }
        for (int x : choices[i]) {
            value[vars[i]] = x;
            rec(i + 1);
        }
    };
    rec(0);
    return out;
}

} // namespace testing
