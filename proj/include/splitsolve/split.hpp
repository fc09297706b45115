#pragma once

#include <splitsolve/model.hpp>
#include <splitsolve/search.hpp>

#include <chrono>
#include <string>
#include <vector>

namespace splitsolve {

struct SplitConfig {
    /// Number of children per split; at least 2.
    int arity = 2;
    std::chrono::milliseconds budget{0};
};

/// The unexplored part of a stopped search as a disjunction of regions:
/// one per left decision whose right sibling is still open (the path up to
/// it, then its negation), followed by the subtree under the stop node.
/// The last region is always the stop region.
auto encode_frontier(const ResumeState & resume) -> FrontierDisjunction;

/// Splits the stop domain into min(arity, |stop_domain|) contiguous blocks
/// of near-equal size, returned as the literals that select each block.
auto partition_stop_domain(VarId var, Domain stop_domain, int arity) -> std::vector<std::vector<Literal>>;

/// The id of child `index` of a unit.
auto child_unit_id(const std::string & parent_id, int index) -> std::string;

/// Builds the child models of a stopped unit. Child j restricts the stop
/// region to block j of the stop domain; child 0 additionally carries the
/// open right-sibling regions. Children partition the frontier exactly.
/// Throws std::invalid_argument when the stop domain has fewer than two
/// values or the arity is below two.
auto split_model(const Model & model, const ResumeState & resume, const SplitConfig & cfg) -> std::vector<Model>;

} // namespace splitsolve
