#include <splitsolve/split.hpp>

#include <stdexcept>

namespace splitsolve {

auto encode_frontier(const ResumeState & resume) -> FrontierDisjunction
{
    FrontierDisjunction fd;
    std::vector<Literal> prefix;
    prefix.reserve(resume.path.size());
    for (auto & d : resume.path) {
        if (d.polarity == Polarity::assign && ! d.sibling_explored) {
            Region sibling{prefix};
            sibling.literals.push_back(negate(d.literal()));
            fd.regions.push_back(std::move(sibling));
        }
        prefix.push_back(d.literal());
    }
    fd.regions.push_back(Region{std::move(prefix)});
    return fd;
}

auto partition_stop_domain(VarId var, Domain stop_domain, int arity) -> std::vector<std::vector<Literal>>
{
    auto values = stop_domain.values();
    const int n = static_cast<int>(values.size());
    const int k = std::min(arity, n);
    std::vector<std::vector<Literal>> blocks;
    int begin = 0;
    for (int j = 0; j < k; ++j) {
        // first n % k blocks get one extra value
        int len = n / k + (j < n % k ? 1 : 0);
        int end = begin + len;
        std::vector<Literal> lits;
        // each lower bound is one above the previous block's largest value
        if (j > 0)
            lits.push_back(Literal{var, Op::ge, values[begin - 1] + 1});
        if (j < k - 1)
            lits.push_back(Literal{var, Op::le, values[end - 1]});
        blocks.push_back(std::move(lits));
        begin = end;
    }
    return blocks;
}

auto child_unit_id(const std::string & parent_id, int index) -> std::string
{
    return parent_id + "." + std::to_string(index);
}

auto split_model(const Model & model, const ResumeState & resume, const SplitConfig & cfg) -> std::vector<Model>
{
    if (cfg.arity < 2)
        throw std::invalid_argument("split_model: arity must be at least 2");
    if (resume.stop_domain.size() < 2)
        throw std::invalid_argument("split_model: stop domain has fewer than two values");

    FrontierDisjunction frontier = encode_frontier(resume);
    Region stop_region = std::move(frontier.regions.back());
    frontier.regions.pop_back();

    LineageTag parent = model.lineage.value_or(LineageTag{"root", std::nullopt, "root"});
    auto blocks = partition_stop_domain(resume.stop_var, resume.stop_domain, cfg.arity);

    std::vector<Model> children;
    children.reserve(blocks.size());
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        Region region = stop_region;
        region.literals.insert(region.literals.end(), blocks[j].begin(), blocks[j].end());

        FrontierDisjunction fd;
        fd.regions.push_back(std::move(region));
        if (j == 0)
            fd.regions.insert(fd.regions.end(), frontier.regions.begin(), frontier.regions.end());

        Model child = model;
        child.constraints.push_back(std::move(fd));
        child.lineage = LineageTag{child_unit_id(parent.unit_id, static_cast<int>(j)), parent.unit_id, parent.root_id};
        child.options.arity = cfg.arity;
        if (cfg.budget.count() > 0)
            child.options.budget_ms = cfg.budget.count();
        children.push_back(std::move(child));
    }
    return children;
}

} // namespace splitsolve
