#include <splitsolve/semigroup.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

namespace splitsolve::semigroup {

SemigroupTable::SemigroupTable(int order) :
    order_(order),
    cells_(static_cast<std::size_t>(order * order), 0)
{
}

SemigroupTable::SemigroupTable(int order, std::vector<int> cells) :
    order_(order),
    cells_(std::move(cells))
{
    if (static_cast<int>(cells_.size()) != order * order)
        throw std::invalid_argument("SemigroupTable: expected " + std::to_string(order * order) + " cells");
    for (int v : cells_)
        if (v < 0 || v >= order)
            throw std::invalid_argument("SemigroupTable: entry " + std::to_string(v) + " out of range");
}

SemigroupTable::SemigroupTable(std::initializer_list<std::initializer_list<int>> rows) :
    order_(static_cast<int>(rows.size()))
{
    for (auto & row : rows) {
        if (static_cast<int>(row.size()) != order_)
            throw std::invalid_argument("SemigroupTable: table is not square");
        cells_.insert(cells_.end(), row.begin(), row.end());
    }
    for (int v : cells_)
        if (v < 0 || v >= order_)
            throw std::invalid_argument("SemigroupTable: entry " + std::to_string(v) + " out of range");
}

auto Symmetry::inverse() const -> std::array<std::uint8_t, kMaxOrder>
{
    std::array<std::uint8_t, kMaxOrder> inv{};
    for (int x = 0; x < order; ++x)
        inv[perm[x]] = static_cast<std::uint8_t>(x);
    return inv;
}

auto Symmetry::is_identity() const -> bool
{
    if (transpose)
        return false;
    for (int x = 0; x < order; ++x)
        if (perm[x] != x)
            return false;
    return true;
}

auto compose(const Symmetry & h, const Symmetry & g) -> Symmetry
{
    Symmetry r;
    r.order = g.order;
    for (int x = 0; x < g.order; ++x)
        r.perm[x] = h.perm[g.perm[x]];
    r.transpose = h.transpose != g.transpose;
    return r;
}

auto table_var(int order, int a, int b) -> VarId
{
    return a * order + b;
}

auto product_var(int order, int a, int b, int c) -> VarId
{
    return order * order + (a * order + b) * order + c;
}

auto symmetry_group(int order) -> std::vector<Symmetry>
{
    if (order < 1 || order > kMaxOrder)
        throw std::invalid_argument("symmetry_group: order out of range");
    std::array<std::uint8_t, kMaxOrder> perm{};
    std::iota(perm.begin(), perm.begin() + order, std::uint8_t{0});

    std::uint64_t factorial = 1;
    for (int i = 2; i <= order; ++i)
        factorial *= static_cast<std::uint64_t>(i);

    std::vector<Symmetry> group;
    group.reserve(2 * factorial);
    do {
        Symmetry g;
        g.perm = perm;
        g.order = static_cast<std::uint8_t>(order);
        g.transpose = false;
        group.push_back(g);
        g.transpose = true;
        group.push_back(g);
    } while (std::next_permutation(perm.begin(), perm.begin() + order));
    return group;
}

auto apply_symmetry(const SemigroupTable & t, const Symmetry & g) -> SemigroupTable
{
    const int n = t.order();
    if (n != g.order)
        throw std::invalid_argument("apply_symmetry: order mismatch");
    auto inv = g.inverse();
    SemigroupTable out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int a = inv[i], b = inv[j];
            int u = g.transpose ? t.at(b, a) : t.at(a, b);
            out.set(i, j, g.image(u));
        }
    return out;
}

auto verify_associative(const SemigroupTable & t) -> bool
{
    const int n = t.order();
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                if (t.at(t.at(x, y), z) != t.at(x, t.at(y, z)))
                    return false;
    return true;
}

auto lex_leader_constraints(int order, std::span<const Symmetry> group) -> std::vector<LexLeaderMapped>
{
    const int cells = order * order;
    std::vector<VarId> flat(static_cast<std::size_t>(cells));
    std::iota(flat.begin(), flat.end(), 0);

    std::vector<LexLeaderMapped> out;
    out.reserve(group.size());
    for (auto & g : group) {
        if (g.order != order)
            throw std::invalid_argument("lex_leader_constraints: symmetry of the wrong order");
        if (g.is_identity())
            continue;
        auto inv = g.inverse();
        LexLeaderMapped c;
        c.flat = flat;
        c.position_map.resize(static_cast<std::size_t>(cells));
        for (int i = 0; i < order; ++i)
            for (int j = 0; j < order; ++j) {
                int a = inv[i], b = inv[j];
                c.position_map[i * order + j] = g.transpose ? table_var(order, b, a) : table_var(order, a, b);
            }
        c.value_map.resize(static_cast<std::size_t>(order));
        for (int v = 0; v < order; ++v)
            c.value_map[v] = g.image(v);
        out.push_back(std::move(c));
    }
    return out;
}

auto is_canonical(const SemigroupTable & t, std::span<const Symmetry> group) -> bool
{
    for (auto & g : group)
        if (apply_symmetry(t, g).flat() < t.flat())
            return false;
    return true;
}

auto build_model(int order, const ModelOptions & opts) -> Model
{
    if (order < 1 || order > kMaxOrder)
        throw std::invalid_argument("build_model: order must be in 1.." + std::to_string(kMaxOrder));
    if (opts.symmetry_breaking && order > kMaxSymmetryBreakingOrder)
        throw std::invalid_argument("build_model: the full lex-leader set is only posted up to order "
            + std::to_string(kMaxSymmetryBreakingOrder));

    const int n = order;
    const Domain values = Domain::range(0, n - 1);
    Model m;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            m.add_variable("T[" + std::to_string(a) + "][" + std::to_string(b) + "]", values);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                m.add_variable("A[" + std::to_string(a) + "][" + std::to_string(b) + "][" + std::to_string(c) + "]",
                    values);

    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                VarId product = product_var(n, a, b, c);
                // a * (b * c): row a indexed by T[b][c]
                Element right;
                right.result = product;
                right.index = table_var(n, b, c);
                for (int x = 0; x < n; ++x)
                    right.list.push_back(table_var(n, a, x));
                // (a * b) * c: column c indexed by T[a][b]
                Element left;
                left.result = product;
                left.index = table_var(n, a, b);
                for (int x = 0; x < n; ++x)
                    left.list.push_back(table_var(n, x, c));
                m.constraints.emplace_back(std::move(right));
                m.constraints.emplace_back(std::move(left));
            }

    if (opts.symmetry_breaking) {
        auto group = symmetry_group(n);
        for (auto & c : lex_leader_constraints(n, group))
            m.constraints.emplace_back(std::move(c));
    }

    if (opts.exclude_all_zero_products) {
        NonZeroWitness w;
        for (int i = 0; i < n * n * n; ++i)
            w.vars.push_back(n * n + i);
        m.constraints.emplace_back(std::move(w));
    }

    return m;
}

namespace {
    template <typename F>
    void for_each_table(int order, F && f)
    {
        if (order < 1 || order > 3)
            throw std::invalid_argument("brute force oracle limit: order must be at most 3");
        const int cells = order * order;
        std::vector<int> digits(static_cast<std::size_t>(cells), 0);
        while (true) {
            f(SemigroupTable(order, digits));
            int i = cells - 1;
            while (i >= 0 && digits[i] == order - 1)
                digits[i--] = 0;
            if (i < 0)
                return;
            ++digits[i];
        }
    }
}

auto brute_force_tables(int order, CountMode mode) -> std::vector<SemigroupTable>
{
    std::vector<SemigroupTable> out;
    std::vector<Symmetry> group;
    if (mode == CountMode::canonical && order >= 1 && order <= 3)
        group = symmetry_group(order);
    for_each_table(order, [&](const SemigroupTable & t) {
        if (! verify_associative(t))
            return;
        if (mode == CountMode::canonical && ! is_canonical(t, group))
            return;
        out.push_back(t);
    });
    return out;
}

auto brute_force_count(int order, CountMode mode) -> std::uint64_t
{
    return brute_force_tables(order, mode).size();
}

auto orbit_total(std::span<const SemigroupTable> tables, std::span<const Symmetry> group) -> std::uint64_t
{
    std::uint64_t total = 0;
    for (auto & t : tables) {
        std::set<std::vector<int>> orbit;
        for (auto & g : group)
            orbit.insert(apply_symmetry(t, g).flat());
        total += orbit.size();
    }
    return total;
}

auto table_from_assignment(int order, std::span<const int> assignment) -> SemigroupTable
{
    if (static_cast<int>(assignment.size()) < order * order)
        throw std::invalid_argument("table_from_assignment: assignment too short");
    return SemigroupTable(order, std::vector<int>(assignment.begin(), assignment.begin() + order * order));
}

auto assignment_from_table(const SemigroupTable & t) -> std::vector<int>
{
    const int n = t.order();
    std::vector<int> a = t.flat();
    a.resize(static_cast<std::size_t>(n * n + n * n * n));
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                a[product_var(n, x, y, z)] = t.at(x, t.at(y, z));
    return a;
}

auto read_table(std::istream & in) -> SemigroupTable
{
    int n = 0;
    if (! (in >> n) || n < 1 || n > kMaxOrder)
        throw std::runtime_error("read_table: bad order line");
    std::vector<int> cells;
    for (int i = 0; i < n * n; ++i) {
        int v;
        if (! (in >> v))
            throw std::runtime_error("read_table: expected " + std::to_string(n * n) + " entries, got "
                + std::to_string(i));
        cells.push_back(v);
    }
    return SemigroupTable(n, std::move(cells));
}

auto read_table_file(const std::string & path) -> SemigroupTable
{
    std::ifstream in(path);
    if (! in)
        throw std::runtime_error("read_table: cannot open " + path);
    return read_table(in);
}

void write_table(std::ostream & out, const SemigroupTable & t)
{
    out << t.order() << "\n";
    for (int a = 0; a < t.order(); ++a) {
        for (int b = 0; b < t.order(); ++b)
            out << (b ? " " : "") << t.at(a, b);
        out << "\n";
    }
}

} // namespace splitsolve::semigroup
