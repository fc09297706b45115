#pragma once

#include <splitsolve/model.hpp>
#include <splitsolve/spool.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace splitsolve {

class AuditError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LineageNode {
    std::string unit_id;
    std::filesystem::path model_path;
    std::string model_digest;
    /// Lineage tag read from the unit file.
    std::optional<std::string> declared_parent;
    /// The accepted result, if any.
    std::optional<UnitResult> accepted;
    /// Late results kept under duplicates/.
    std::vector<UnitResult> duplicates;
    /// Child models carried by each duplicate, keyed by child id.
    std::vector<std::map<std::string, std::string>> duplicate_child_digests;

    auto children() const -> std::vector<std::string>
    {
        return accepted ? accepted->child_unit_ids : std::vector<std::string>{};
    }
    auto result_count() const -> std::size_t { return (accepted ? 1 : 0) + duplicates.size(); }
};

struct LineageTree {
    std::filesystem::path campaign_dir;
    std::string root_id;
    std::map<std::string, LineageNode> nodes;
    /// Files in the campaign that belong to no node.
    std::vector<std::string> unreferenced_files;
};

/// Builds the tree from a campaign directory (<spool>/<campaign>).
/// Throws AuditError when the root unit is missing.
auto load_lineage(const std::filesystem::path & campaign_dir) -> LineageTree;
auto load_lineage(const std::filesystem::path & spool, const std::string & campaign_id) -> LineageTree;

struct DuplicateEntry {
    std::string unit_id;
    std::size_t results = 0;
    bool consistent = true;
};

struct AuditReport {
    bool complete = false;
    std::uint64_t total_count = 0;
    std::size_t node_count = 0;
    std::vector<DuplicateEntry> duplicates;
    std::vector<std::string> missing_results;
    std::vector<std::string> missing_children;
    std::vector<std::string> unreachable_units;
    std::vector<std::string> unreferenced_files;
    std::size_t partition_checks_attempted = 0;
    std::size_t partition_checks_passed = 0;
    std::vector<std::string> integrity_failures;

    auto ok() const -> bool { return complete && integrity_failures.empty(); }
    auto to_json() const -> nlohmann::json;
    /// A few human-readable lines.
    auto summary() const -> std::string;
};

struct AuditOptions {
    /// Also check that each split partitions its parent's remaining space.
    bool deep = false;
};

auto verify_tree(const LineageTree & tree, const AuditOptions & opts = {}) -> AuditReport;

/// Spaces larger than this are not enumerated.
inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

struct PartitionVerdict {
    bool passed = false;
    std::uint64_t parent_solutions = 0;
    std::uint64_t child_solutions = 0;
    std::string detail;

    explicit operator bool() const { return passed; }
};

/// Enumerates every assignment of the parent's variables. Passes when no
/// assignment satisfies two children, every child solution is a parent
/// solution, and the parent's solutions number exactly parent_emitted plus
/// the children's. Throws AuditError("not enumerable") above kEnumerationLimit.
auto verify_partition(const Model & parent, const std::vector<Model> & children, std::uint64_t parent_emitted = 0)
    -> PartitionVerdict;

/// Checks that children were produced from parent by one split: each child
/// is the parent plus one frontier disjunction, the stop regions agree
/// except for contiguous disjoint blocks that cover every value, and only
/// the first child carries the sibling regions.
auto verify_split_structure(const Model & parent, const std::vector<Model> & children) -> PartitionVerdict;

/// Sum of accepted counts; throws AuditError when the tree is incomplete.
auto aggregate(const LineageTree & tree) -> std::uint64_t;

} // namespace splitsolve
