#pragma once

#include <splitsolve/model.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace splitsolve::semigroup {

inline constexpr int kMaxOrder = 10;
/// Largest order for which build_model posts the full lex-leader set.
inline constexpr int kMaxSymmetryBreakingOrder = 8;

/// An order-n multiplication table; cell (a, b) holds a * b.
class SemigroupTable {
public:
    SemigroupTable() = default;
    explicit SemigroupTable(int order);
    SemigroupTable(int order, std::vector<int> cells);
    SemigroupTable(std::initializer_list<std::initializer_list<int>> rows);

    auto order() const -> int { return order_; }
    auto at(int a, int b) const -> int { return cells_[a * order_ + b]; }
    void set(int a, int b, int v) { cells_[a * order_ + b] = v; }
    /// Row-major cells.
    auto flat() const -> const std::vector<int> & { return cells_; }

    auto operator==(const SemigroupTable &) const -> bool = default;
    auto operator<(const SemigroupTable & o) const -> bool { return cells_ < o.cells_; }

private:
    int order_ = 0;
    std::vector<int> cells_;
};

/// (pi, phi): relabel by pi, and transpose when phi is set.
struct Symmetry {
    std::array<std::uint8_t, kMaxOrder> perm{};
    std::uint8_t order = 0;
    bool transpose = false;

    auto image(int x) const -> int { return perm[x]; }
    auto inverse() const -> std::array<std::uint8_t, kMaxOrder>;
    auto is_identity() const -> bool;
    /// The symmetry h o g (apply g first).
    friend auto compose(const Symmetry & h, const Symmetry & g) -> Symmetry;

    auto operator==(const Symmetry &) const -> bool = default;
};

struct ModelOptions {
    bool symmetry_breaking = true;
    bool exclude_all_zero_products = false;
};

/// Variable ids in models produced by build_model.
auto table_var(int order, int a, int b) -> VarId;
auto product_var(int order, int a, int b, int c) -> VarId;

/// The semigroup CSP: table variables T[a][b] followed by triple-product
/// variables A[a][b][c], associativity as pairs of element constraints
/// sharing A[a][b][c], then optional lex-leader and non-zero constraints.
auto build_model(int order, const ModelOptions & opts = {}) -> Model;

/// All 2 * n! symmetries: permutations in lexicographic order, each without
/// then with transposition. The identity comes first.
auto symmetry_group(int order) -> std::vector<Symmetry>;

auto apply_symmetry(const SemigroupTable & t, const Symmetry & g) -> SemigroupTable;
auto verify_associative(const SemigroupTable & t) -> bool;

/// One constraint per non-identity element of group: the flattened table
/// is lexicographically no greater than its image under the symmetry.
auto lex_leader_constraints(int order, std::span<const Symmetry> group) -> std::vector<LexLeaderMapped>;

/// True iff the flattened table is the lexicographic minimum of its orbit.
auto is_canonical(const SemigroupTable & t, std::span<const Symmetry> group) -> bool;

enum class CountMode { labeled, canonical };

/// Exhaustive count over all n^(n*n) tables; n <= 3 only.
auto brute_force_count(int order, CountMode mode) -> std::uint64_t;
/// The tables that brute_force_count counts, in lexicographic order.
auto brute_force_tables(int order, CountMode mode) -> std::vector<SemigroupTable>;

/// Sum of orbit sizes.
auto orbit_total(std::span<const SemigroupTable> canonical_tables, std::span<const Symmetry> group) -> std::uint64_t;

/// The table part of a full assignment of a build_model model.
auto table_from_assignment(int order, std::span<const int> assignment) -> SemigroupTable;
/// A full assignment (table plus triple products) for t.
auto assignment_from_table(const SemigroupTable & t) -> std::vector<int>;

/// Text format: the order on the first line, then n rows of n integers.
auto read_table(std::istream & in) -> SemigroupTable;
auto read_table_file(const std::string & path) -> SemigroupTable;
void write_table(std::ostream & out, const SemigroupTable & t);

} // namespace splitsolve::semigroup
