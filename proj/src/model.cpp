#include <splitsolve/model.hpp>

#include <algorithm>
#include <sstream>

namespace splitsolve {

auto op_symbol(Op op) -> const char *
{
    switch (op) {
    case Op::le: return "<=";
    case Op::ge: return ">=";
    case Op::eq: return "==";
    case Op::ne: return "!=";
    }
    return "?";
}

auto parse_op(const std::string & s) -> std::optional<Op>
{
    if (s == "<=")
        return Op::le;
    if (s == ">=")
        return Op::ge;
    if (s == "==")
        return Op::eq;
    if (s == "!=")
        return Op::ne;
    return std::nullopt;
}

auto negate(const Literal & lit) -> Literal
{
    switch (lit.op) {
    case Op::le: return Literal{lit.var, Op::ge, lit.value + 1};
    case Op::ge: return Literal{lit.var, Op::le, lit.value - 1};
    case Op::eq: return Literal{lit.var, Op::ne, lit.value};
    case Op::ne: return Literal{lit.var, Op::eq, lit.value};
    }
    return lit;
}

auto op_holds(Op op, int value, int bound) -> bool
{
    switch (op) {
    case Op::le: return value <= bound;
    case Op::ge: return value >= bound;
    case Op::eq: return value == bound;
    case Op::ne: return value != bound;
    }
    return false;
}

auto op_filter(Op op, Domain d, int bound) -> Domain
{
    switch (op) {
    case Op::le: return d & Domain::at_most(bound);
    case Op::ge: return d & Domain::at_least(bound);
    case Op::eq: return (bound >= 0 && bound < kDomainCapacity) ? (d & Domain::single(bound)) : Domain{};
    case Op::ne: return (bound >= 0 && bound < kDomainCapacity) ? d.without(Domain::single(bound)) : d;
    }
    return d;
}

auto Model::add_variable(std::string name, Domain domain) -> VarId
{
    VarId id = static_cast<VarId>(variables.size());
    variables.push_back(Variable{id, std::move(name), domain});
    return id;
}

auto operator==(const Variable & a, const Variable & b) -> bool
{
    return a.id == b.id && a.name == b.name && a.domain == b.domain;
}

auto operator==(const Model & a, const Model & b) -> bool
{
    return a.variables == b.variables && a.constraints == b.constraints && a.lineage == b.lineage
        && a.options == b.options;
}

auto ValidationReport::summary() const -> std::string
{
    if (ok())
        return "ok";
    std::string s;
    for (auto & v : violations) {
        if (! s.empty())
            s += "; ";
        s += v;
    }
    return s;
}

InvalidModel::InvalidModel(const ValidationReport & r) :
    std::runtime_error("invalid model: " + r.summary()),
    report(r)
{
}

namespace {
    class Checker {
    public:
        explicit Checker(const Model & m) : model(m) {}

        void var(VarId v, const std::string & where)
        {
            if (v < 0 || v >= model.variable_count())
                fail("dangling variable " + std::to_string(v) + " in " + where);
        }

        void fail(std::string msg) { report.violations.push_back(std::move(msg)); }

        const Model & model;
        ValidationReport report;
    };
}

auto validate_model(const Model & model) -> ValidationReport
{
    Checker c{model};

    for (std::size_t i = 0; i < model.variables.size(); ++i) {
        const auto & v = model.variables[i];
        if (v.id != static_cast<VarId>(i))
            c.fail("variable at position " + std::to_string(i) + " has id " + std::to_string(v.id));
        if (v.domain.empty())
            c.fail("empty initial domain for variable " + std::to_string(i));
    }

    if (model.options.arity < 2)
        c.fail("arity must be at least 2");
    if (model.options.budget_ms < 0)
        c.fail("negative budget");

    for (std::size_t ci = 0; ci < model.constraints.size(); ++ci) {
        std::string where = "constraint " + std::to_string(ci);
        std::visit(
            [&](const auto & k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Element>) {
                    c.var(k.result, where);
                    c.var(k.index, where);
                    if (k.list.empty())
                        c.fail("malformed element with empty list in " + where);
                    for (auto v : k.list)
                        c.var(v, where);
                }
                else if constexpr (std::is_same_v<K, UnaryBound>) {
                    c.var(k.var, where);
                }
                else if constexpr (std::is_same_v<K, LexLeaderMapped>) {
                    for (auto v : k.flat)
                        c.var(v, where);
                    if (k.position_map.size() != k.flat.size())
                        c.fail("malformed lex-leader position map size in " + where);
                    for (int p : k.position_map)
                        if (p < 0 || p >= static_cast<int>(k.flat.size()))
                            c.fail("malformed lex-leader position map entry in " + where);
                    std::vector<int> sorted = k.value_map;
                    std::sort(sorted.begin(), sorted.end());
                    for (std::size_t i = 0; i < sorted.size(); ++i)
                        if (sorted[i] != static_cast<int>(i)) {
                            c.fail("malformed lex-leader value map (not a bijection) in " + where);
                            break;
                        }
                    Domain mapped = Domain::range(0, static_cast<int>(k.value_map.size()) - 1);
                    for (auto v : k.flat)
                        if (v >= 0 && v < model.variable_count() && ! model.variables[v].domain.subset_of(mapped))
                            c.fail("lex-leader variable " + std::to_string(v) + " has values outside the value map in "
                                + where);
                }
                else if constexpr (std::is_same_v<K, FrontierDisjunction>) {
                    for (auto & r : k.regions)
                        for (auto & l : r.literals)
                            c.var(l.var, where);
                }
                else if constexpr (std::is_same_v<K, NonZeroWitness>) {
                    if (k.vars.empty())
                        c.fail("malformed non-zero witness with no variables in " + where);
                    for (auto v : k.vars)
                        c.var(v, where);
                }
            },
            model.constraints[ci]);
    }

    return std::move(c.report);
}

auto literal_holds(const Literal & lit, std::span<const int> a) -> bool
{
    return op_holds(lit.op, a[lit.var], lit.value);
}

auto region_holds(const Region & region, std::span<const int> a) -> bool
{
    return std::all_of(region.literals.begin(), region.literals.end(),
        [&](const Literal & l) { return literal_holds(l, a); });
}

namespace {
    auto lex_holds(const LexLeaderMapped & c, std::span<const int> a) -> bool
    {
        for (std::size_t p = 0; p < c.flat.size(); ++p) {
            int x = a[c.flat[p]];
            int src = a[c.flat[c.position_map[p]]];
            if (src < 0 || src >= static_cast<int>(c.value_map.size()))
                return false;
            int y = c.value_map[src];
            if (x < y)
                return true;
            if (x > y)
                return false;
        }
        return true;
    }
}

auto check_assignment(const Model & model, std::span<const int> a) -> bool
{
    if (static_cast<int>(a.size()) != model.variable_count())
        throw MalformedAssignment("assignment has " + std::to_string(a.size()) + " values but the model has "
            + std::to_string(model.variable_count()) + " variables");

    for (std::size_t v = 0; v < a.size(); ++v)
        if (! model.variables[v].domain.contains(a[v]))
            return false;

    for (auto & constraint : model.constraints) {
        bool ok = std::visit(
            [&](const auto & k) -> bool {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Element>) {
                    int p = a[k.index];
                    return p >= 0 && p < static_cast<int>(k.list.size()) && a[k.list[p]] == a[k.result];
                }
                else if constexpr (std::is_same_v<K, UnaryBound>) {
                    return op_holds(k.op, a[k.var], k.value);
                }
                else if constexpr (std::is_same_v<K, LexLeaderMapped>) {
                    return lex_holds(k, a);
                }
                else if constexpr (std::is_same_v<K, FrontierDisjunction>) {
                    return std::any_of(k.regions.begin(), k.regions.end(),
                        [&](const Region & r) { return region_holds(r, a); });
                }
                else {
                    return std::any_of(k.vars.begin(), k.vars.end(), [&](VarId v) { return a[v] != 0; });
                }
            },
            constraint);
        if (! ok)
            return false;
    }
    return true;
}

} // namespace splitsolve
