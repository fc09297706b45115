#pragma once

#include <splitsolve/domain.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace splitsolve {

using VarId = int;

enum class Op { le, ge, eq, ne };

auto op_symbol(Op op) -> const char *;
auto parse_op(const std::string & s) -> std::optional<Op>;

/// Whether `value op bound` holds.
auto op_holds(Op op, int value, int bound) -> bool;
/// The values of `d` that satisfy `x op bound`.
auto op_filter(Op op, Domain d, int bound) -> Domain;

struct Variable {
    VarId id = 0;
    std::string name;
    Domain domain;
};

struct Literal {
    VarId var = 0;
    Op op = Op::eq;
    int value = 0;

    auto operator==(const Literal &) const -> bool = default;
};

auto negate(const Literal & lit) -> Literal;

/// A conjunction of literals; no literals means everything.
struct Region {
    std::vector<Literal> literals;

    auto operator==(const Region &) const -> bool = default;
};

/// result = list[index]
struct Element {
    VarId result = 0;
    std::vector<VarId> list;
    VarId index = 0;

    auto operator==(const Element &) const -> bool = default;
};

struct UnaryBound {
    VarId var = 0;
    Op op = Op::eq;
    int value = 0;

    auto operator==(const UnaryBound &) const -> bool = default;
};

/// flat <=_lex image, where image[p] = value_map[flat[position_map[p]]].
struct LexLeaderMapped {
    std::vector<VarId> flat;
    std::vector<int> position_map;
    std::vector<int> value_map;

    auto operator==(const LexLeaderMapped &) const -> bool = default;
};

/// At least one region must hold.
struct FrontierDisjunction {
    std::vector<Region> regions;

    auto operator==(const FrontierDisjunction &) const -> bool = default;
};

/// At least one of the listed variables is non-zero.
struct NonZeroWitness {
    std::vector<VarId> vars;

    auto operator==(const NonZeroWitness &) const -> bool = default;
};

using Constraint = std::variant<Element, UnaryBound, LexLeaderMapped, FrontierDisjunction, NonZeroWitness>;

struct LineageTag {
    std::string unit_id;
    std::optional<std::string> parent_id;
    std::string root_id;

    auto operator==(const LineageTag &) const -> bool = default;
};

struct SolverOptions {
    /// Wall-clock budget per unit in milliseconds; 0 means unlimited.
    std::int64_t budget_ms = 0;
    int arity = 2;

    auto operator==(const SolverOptions &) const -> bool = default;
};

struct Model {
    std::vector<Variable> variables;
    std::vector<Constraint> constraints;
    std::optional<LineageTag> lineage;
    SolverOptions options;

    auto add_variable(std::string name, Domain domain) -> VarId;
    auto variable_count() const -> int { return static_cast<int>(variables.size()); }
};

auto operator==(const Variable & a, const Variable & b) -> bool;
auto operator==(const Model & a, const Model & b) -> bool;

struct ValidationReport {
    std::vector<std::string> violations;

    auto ok() const -> bool { return violations.empty(); }
    auto summary() const -> std::string;
};

auto validate_model(const Model & model) -> ValidationReport;

class InvalidModel : public std::runtime_error {
public:
    explicit InvalidModel(const ValidationReport & report);
    ValidationReport report;
};

class MalformedAssignment : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// True iff the full assignment satisfies every constraint. Throws
/// MalformedAssignment when the assignment does not cover the variables.
auto check_assignment(const Model & model, std::span<const int> assignment) -> bool;

auto literal_holds(const Literal & lit, std::span<const int> assignment) -> bool;
auto region_holds(const Region & region, std::span<const int> assignment) -> bool;

} // namespace splitsolve
