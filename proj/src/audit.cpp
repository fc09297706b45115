#include <splitsolve/audit.hpp>
#include <splitsolve/unit_file.hpp>

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace splitsolve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
    auto is_temp(const fs::path & p) -> bool
    {
        return p.filename().string().find(".tmp.") != std::string::npos;
    }

    auto relative_name(const fs::path & p, const fs::path & base) -> std::string
    {
        return fs::relative(p, base).generic_string();
    }

    auto load_result(const fs::path & p) -> UnitResult
    {
        try {
            return result_from_json(json::parse(read_file(p)));
        }
        catch (const json::exception & e) {
            throw AuditError("unreadable result " + p.string() + ": " + e.what());
        }
    }
}

auto load_lineage(const fs::path & spool, const std::string & campaign_id) -> LineageTree
{
    return load_lineage(spool / campaign_id);
}

auto load_lineage(const fs::path & campaign_dir) -> LineageTree
{
    CampaignPaths paths{campaign_dir};
    if (! fs::exists(paths.manifest))
        throw AuditError("no campaign manifest in " + campaign_dir.string());

    LineageTree tree;
    tree.campaign_dir = campaign_dir;
    tree.root_id = json::parse(read_file(paths.manifest)).at("root_unit").get<std::string>();

    std::set<std::string> known;
    auto note = [&](const fs::path & p) { known.insert(relative_name(p, campaign_dir)); };
    note(paths.manifest);
    note(paths.journal);
    note(paths.lock);

    for (auto & dir : {paths.pending, paths.leased, paths.done}) {
        if (! fs::exists(dir))
            continue;
        for (auto & e : fs::directory_iterator(dir)) {
            if (e.path().extension() != ".model" || is_temp(e.path()))
                continue;
            auto bytes = read_file(e.path());
            LineageNode node;
            node.unit_id = e.path().stem().string();
            node.model_path = e.path();
            node.model_digest = content_digest(bytes);
            note(e.path());
            note(paths.state_file(dir, node.unit_id));
            try {
                auto m = parse_model(bytes);
                if (m.lineage)
                    node.declared_parent = m.lineage->parent_id;
            }
            catch (const std::exception &) {
                // An unreadable unit still appears in the tree; its digest check flags it.
            }
            tree.nodes.emplace(node.unit_id, std::move(node));
        }
    }

    if (fs::exists(paths.done))
        for (auto & e : fs::directory_iterator(paths.done)) {
            if (e.path().extension() != ".result" || is_temp(e.path()))
                continue;
            auto id = e.path().stem().string();
            auto it = tree.nodes.find(id);
            if (it == tree.nodes.end())
                continue;
            it->second.accepted = load_result(e.path());
            note(e.path());
        }

    if (fs::exists(paths.duplicates))
        for (auto & e : fs::directory_iterator(paths.duplicates)) {
            if (e.path().extension() != ".result" || is_temp(e.path()))
                continue;
            auto stem = e.path().stem().string();
            auto plus = stem.rfind('+');
            if (plus == std::string::npos)
                continue;
            auto it = tree.nodes.find(stem.substr(0, plus));
            if (it == tree.nodes.end())
                continue;
            auto r = load_result(e.path());
            note(e.path());
            std::map<std::string, std::string> digests;
            for (auto & c : r.child_unit_ids) {
                auto cp = paths.model_file(paths.duplicates, c + "+" + std::to_string(r.attempt));
                if (fs::exists(cp)) {
                    digests[c] = content_digest(read_file(cp));
                    note(cp);
                }
            }
            it->second.duplicates.push_back(std::move(r));
            it->second.duplicate_child_digests.push_back(std::move(digests));
        }

    if (! tree.nodes.count(tree.root_id))
        throw AuditError("root unit '" + tree.root_id + "' is missing from " + campaign_dir.string());

    for (auto & e : fs::recursive_directory_iterator(campaign_dir)) {
        if (! e.is_regular_file() || is_temp(e.path()))
            continue;
        auto name = relative_name(e.path(), campaign_dir);
        if (! known.count(name))
            tree.unreferenced_files.push_back(name);
    }
    std::sort(tree.unreferenced_files.begin(), tree.unreferenced_files.end());
    return tree;
}

auto AuditReport::to_json() const -> json
{
    json dups = json::array();
    for (auto & d : duplicates)
        dups.push_back({{"unit_id", d.unit_id}, {"results", d.results}, {"consistent", d.consistent}});
    return json{
        {"complete", complete},
        {"ok", ok()},
        {"total_count", total_count},
        {"node_count", node_count},
        {"duplicates", dups},
        {"missing_results", missing_results},
        {"missing_children", missing_children},
        {"unreachable_units", unreachable_units},
        {"unreferenced_files", unreferenced_files},
        {"partition_checks", {{"attempted", partition_checks_attempted}, {"passed", partition_checks_passed}}},
        {"integrity_failures", integrity_failures},
    };
}

auto AuditReport::summary() const -> std::string
{
    std::ostringstream out;
    out << "audit: " << (complete ? "complete" : "incomplete") << "\n";
    out << "units: " << node_count << "\n";
    out << "solutions: " << total_count << "\n";
    std::size_t consistent = std::count_if(duplicates.begin(), duplicates.end(), [](auto & d) { return d.consistent; });
    out << "duplicates: " << duplicates.size() << " (" << consistent << " consistent)\n";
    if (partition_checks_attempted > 0)
        out << "partition checks: " << partition_checks_passed << "/" << partition_checks_attempted << " passed\n";
    for (auto & f : integrity_failures)
        out << "integrity failure: " << f << "\n";
    for (auto & m : missing_results)
        out << "missing result: " << m << "\n";
    for (auto & m : missing_children)
        out << "missing child: " << m << "\n";
    return out.str();
}

auto verify_tree(const LineageTree & tree, const AuditOptions & opts) -> AuditReport
{
    AuditReport report;
    CampaignPaths paths{tree.campaign_dir};
    report.unreferenced_files = tree.unreferenced_files;

    std::set<std::string> seen;
    std::deque<std::string> frontier{tree.root_id};
    seen.insert(tree.root_id);

    while (! frontier.empty()) {
        auto id = frontier.front();
        frontier.pop_front();
        const auto & node = tree.nodes.at(id);
        ++report.node_count;

        if (! node.accepted) {
            report.missing_results.push_back(id);
            continue;
        }
        const auto & r = *node.accepted;
        report.total_count += r.solution_count;

        if (r.unit_id != id)
            report.integrity_failures.push_back(id + ": result names unit '" + r.unit_id + "'");
        if (! r.model_digest.empty() && r.model_digest != node.model_digest)
            report.integrity_failures.push_back(id + ": unit file digest " + node.model_digest
                + " differs from the executed digest " + r.model_digest);

        std::map<std::string, std::string> child_digests;
        for (auto & c : r.child_unit_ids) {
            auto it = tree.nodes.find(c);
            if (it == tree.nodes.end()) {
                report.missing_children.push_back(c);
                continue;
            }
            child_digests[c] = it->second.model_digest;
            if (it->second.declared_parent != id)
                report.integrity_failures.push_back(c + ": lineage parent is '"
                    + it->second.declared_parent.value_or("none") + "', expected '" + id + "'");
            if (! seen.insert(c).second) {
                report.integrity_failures.push_back(c + ": reached twice in the lineage");
                continue;
            }
            frontier.push_back(c);
        }

        if (! node.duplicates.empty()) {
            DuplicateEntry d{id, node.result_count(), true};
            for (std::size_t k = 0; k < node.duplicates.size(); ++k) {
                const auto & dup = node.duplicates[k];
                if (dup.solution_count != r.solution_count || dup.child_unit_ids != r.child_unit_ids
                    || node.duplicate_child_digests[k] != child_digests)
                    d.consistent = false;
            }
            if (! d.consistent)
                report.integrity_failures.push_back(id + ": duplicate results disagree");
            report.duplicates.push_back(d);
        }

        if (opts.deep && r.status == ResultStatus::split && child_digests.size() == r.child_unit_ids.size()) {
            ++report.partition_checks_attempted;
            try {
                Model parent = read_unit(node.model_path);
                std::vector<Model> children;
                for (auto & c : r.child_unit_ids)
                    children.push_back(read_unit(tree.nodes.at(c).model_path));
                std::uint64_t space = 1;
                for (auto & v : parent.variables) {
                    space *= static_cast<std::uint64_t>(std::max(1, v.domain.size()));
                    if (space > kEnumerationLimit)
                        break;
                }
                auto verdict = space <= kEnumerationLimit ? verify_partition(parent, children, r.solution_count)
                                                          : verify_split_structure(parent, children);
                if (verdict)
                    ++report.partition_checks_passed;
                else
                    report.integrity_failures.push_back(id + ": partition check failed: " + verdict.detail);
            }
            catch (const std::exception & e) {
                report.integrity_failures.push_back(id + ": partition check error: " + e.what());
            }
        }
    }

    for (auto & [id, node] : tree.nodes)
        if (! seen.count(id))
            report.unreachable_units.push_back(id);
    for (auto & id : report.unreachable_units)
        report.integrity_failures.push_back(id + ": not reachable from the root");

    report.complete = report.missing_results.empty() && report.missing_children.empty();
    return report;
}

auto verify_partition(const Model & parent, const std::vector<Model> & children, std::uint64_t parent_emitted)
    -> PartitionVerdict
{
    const int n = parent.variable_count();
    std::uint64_t space = 1;
    for (auto & v : parent.variables) {
        space *= static_cast<std::uint64_t>(v.domain.size());
        if (space > kEnumerationLimit)
            throw AuditError("not enumerable: parent space exceeds " + std::to_string(kEnumerationLimit)
                + " assignments");
    }
    for (auto & c : children)
        if (c.variable_count() != n)
            return {false, 0, 0, "child has " + std::to_string(c.variable_count()) + " variables, parent has "
                    + std::to_string(n)};

    PartitionVerdict verdict;
    if (space == 0) {
        verdict.passed = parent_emitted == 0;
        verdict.detail = verdict.passed ? "" : "parent space is empty";
        return verdict;
    }

    std::vector<std::vector<int>> values;
    for (auto & v : parent.variables)
        values.push_back(v.domain.values());
    std::vector<std::size_t> digit(static_cast<std::size_t>(n), 0);
    std::vector<int> a(static_cast<std::size_t>(n));

    auto show = [&] {
        std::string s = "(";
        for (int i = 0; i < n; ++i)
            s += (i ? "," : "") + std::to_string(a[i]);
        return s + ")";
    };

    while (true) {
        for (int i = 0; i < n; ++i)
            a[i] = values[i][digit[i]];
        bool in_parent = check_assignment(parent, a);
        int hits = 0;
        for (auto & c : children)
            hits += check_assignment(c, a) ? 1 : 0;
        if (hits > 1)
            return {false, 0, 0, "assignment " + show() + " satisfies " + std::to_string(hits) + " children"};
        if (hits == 1 && ! in_parent)
            return {false, 0, 0, "assignment " + show() + " satisfies a child but not the parent"};
        verdict.parent_solutions += in_parent ? 1 : 0;
        verdict.child_solutions += static_cast<std::uint64_t>(hits);

        int i = n - 1;
        while (i >= 0 && ++digit[i] == values[i].size())
            digit[i--] = 0;
        if (i < 0)
            break;
    }

    verdict.passed = verdict.parent_solutions == verdict.child_solutions + parent_emitted;
    if (! verdict.passed)
        verdict.detail = "parent has " + std::to_string(verdict.parent_solutions) + " solutions, children hold "
            + std::to_string(verdict.child_solutions) + " and the parent emitted " + std::to_string(parent_emitted);
    return verdict;
}

namespace {
    struct Block {
        std::optional<int> lo, hi;
    };
}

auto verify_split_structure(const Model & parent, const std::vector<Model> & children) -> PartitionVerdict
{
    auto fail = [](std::string why) { return PartitionVerdict{false, 0, 0, std::move(why)}; };
    if (children.size() < 2)
        return fail("fewer than two children");

    const std::size_t base = parent.constraints.size();
    std::optional<Region> common;
    std::optional<VarId> stop_var;
    std::vector<Block> blocks;

    for (std::size_t j = 0; j < children.size(); ++j) {
        const auto & c = children[j];
        const std::string who = "child " + std::to_string(j);
        if (! (c.variables == parent.variables))
            return fail(who + " changes the variables");
        if (c.constraints.size() != base + 1
            || ! std::equal(parent.constraints.begin(), parent.constraints.end(), c.constraints.begin()))
            return fail(who + " is not the parent plus one constraint");
        const auto * fd = std::get_if<FrontierDisjunction>(&c.constraints.back());
        if (! fd || fd->regions.empty())
            return fail(who + " does not end in a frontier disjunction");
        if (j > 0 && fd->regions.size() != 1)
            return fail(who + " carries sibling regions");

        // The stop region ends in one block literal (first and last child) or two.
        Region stop = fd->regions.front();
        const std::size_t block_literals = (j == 0 || j + 1 == children.size()) ? 1 : 2;
        if (stop.literals.size() < block_literals)
            return fail(who + " stop region is too short");
        Block b;
        for (std::size_t k = stop.literals.size() - block_literals; k < stop.literals.size(); ++k) {
            const auto & lit = stop.literals[k];
            if (stop_var && lit.var != *stop_var)
                return fail(who + " splits a different variable");
            stop_var = lit.var;
            if (lit.op == Op::ge && ! b.lo)
                b.lo = lit.value;
            else if (lit.op == Op::le && ! b.hi)
                b.hi = lit.value;
            else
                return fail(who + " has a malformed block literal");
        }
        if ((j == 0 && (b.lo || ! b.hi)) || (j + 1 == children.size() && (! b.lo || b.hi)))
            return fail(who + " block is not open on its outer side");
        stop.literals.resize(stop.literals.size() - block_literals);
        if (common && ! (*common == stop))
            return fail(who + " stop region differs from child 0");
        common = stop;
        blocks.push_back(b);
    }

    for (std::size_t j = 0; j + 1 < blocks.size(); ++j) {
        if (! blocks[j].hi || ! blocks[j + 1].lo || *blocks[j].hi + 1 != *blocks[j + 1].lo)
            return fail("blocks " + std::to_string(j) + " and " + std::to_string(j + 1) + " are not adjacent");
        if (blocks[j + 1].hi && *blocks[j + 1].hi < *blocks[j + 1].lo)
            return fail("block " + std::to_string(j + 1) + " is empty");
    }

    // Each sibling region is a prefix of the stop path followed by the negation of its next decision.
    const auto & first = std::get<FrontierDisjunction>(children.front().constraints.back());
    std::set<std::size_t> used;
    for (std::size_t r = 1; r < first.regions.size(); ++r) {
        const auto & lits = first.regions[r].literals;
        const std::size_t k = lits.size() - 1;
        if (lits.empty() || k >= common->literals.size()
            || ! std::equal(lits.begin(), lits.begin() + static_cast<std::ptrdiff_t>(k), common->literals.begin())
            || ! (lits.back() == negate(common->literals[k])) || common->literals[k].op != Op::eq)
            return fail("sibling region " + std::to_string(r) + " is not an open branch of the stop path");
        if (! used.insert(k).second)
            return fail("sibling region " + std::to_string(r) + " repeats a branch");
    }
    return PartitionVerdict{true, 0, 0, ""};
}

auto aggregate(const LineageTree & tree) -> std::uint64_t
{
    auto report = verify_tree(tree);
    if (! report.complete)
        throw AuditError("cannot aggregate an incomplete lineage: " + std::to_string(report.missing_results.size())
            + " units lack results, " + std::to_string(report.missing_children.size()) + " children are missing");
    return report.total_count;
}

} // namespace splitsolve
