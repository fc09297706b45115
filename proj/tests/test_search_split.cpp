#include "support.hpp"

#include <splitsolve/propagation.hpp>
#include <splitsolve/search.hpp>
#include <splitsolve/semigroup.hpp>
#include <splitsolve/split.hpp>
#include <splitsolve/store.hpp>
#include <splitsolve/unit_file.hpp>

#include <doctest.h>

#include <fstream>

using namespace testing;
using namespace std::chrono_literals;

namespace {
    auto collect(const Model & m, const SearchLimits & limits, std::set<std::vector<int>> & out) -> SearchOutcome
    {
        return solve(m, limits, [&](std::span<const int> a) {
            bool fresh = out.emplace(a.begin(), a.end()).second;
            CHECK(fresh);
        });
    }

    auto with_constraint(Model m, Constraint c) -> Model
    {
        m.constraints.push_back(std::move(c));
        return m;
    }
}

TEST_CASE("solve examples")
{
    SUBCASE("one fixed variable")
    {
        Model m;
        m.add_variable("x", Domain::range(0, 1));
        m.constraints.emplace_back(UnaryBound{0, Op::eq, 0});
        std::set<std::vector<int>> sols;
        auto out = collect(m, {}, sols);
        REQUIRE(std::holds_alternative<Exhausted>(out));
        CHECK(stats_of(out).solution_count == 1);
        CHECK(sols == std::set<std::vector<int>>{{0}});
    }
    SUBCASE("contradiction")
    {
        Model m;
        m.add_variable("x", Domain::range(1, 4));
        m.constraints.emplace_back(UnaryBound{0, Op::le, 2});
        m.constraints.emplace_back(UnaryBound{0, Op::ge, 3});
        auto out = solve(m, std::nullopt);
        REQUIRE(std::holds_alternative<Exhausted>(out));
        CHECK(stats_of(out).solution_count == 0);
    }
    SUBCASE("order-3 semigroups")
    {
        CHECK(stats_of(solve(semigroup::build_model(3), std::nullopt)).solution_count == 18);
    }
}

TEST_CASE("solve rejects bad budgets and invalid models")
{
    Model m;
    m.add_variable("x", Domain::range(0, 1));
    CHECK_THROWS_AS(solve(m, std::optional<std::chrono::milliseconds>{0ms}), std::invalid_argument);
    CHECK_THROWS_AS(solve(m, std::optional<std::chrono::milliseconds>{-5ms}), std::invalid_argument);
    m.constraints.emplace_back(UnaryBound{3, Op::le, 0});
    CHECK_THROWS_AS(solve(m, std::nullopt), InvalidModel);
}

TEST_CASE("select_decision")
{
    DomainStore s({Domain::single(1), Domain::of({0, 2})});
    CHECK(select_decision(s) == std::pair<VarId, int>{1, 0});

    DomainStore all_fixed({Domain::single(3), Domain::single(1)});
    CHECK_THROWS_AS(select_decision(all_fixed), std::logic_error);

    auto m = semigroup::build_model(2);
    DomainStore root(m);
    REQUIRE(propagate(m, root) == PropagationResult::fixpoint);
    auto [var, value] = select_decision(root);
    int expected = -1;
    for (int v = 0; v < 4 && expected < 0; ++v)
        if (! root.assigned(v))
            expected = v;
    CHECK(var == expected);
    CHECK(value == root.domain(var).min());
}

TEST_CASE("search is deterministic")
{
    auto m = semigroup::build_model(4);
    auto a = stats_of(solve(m, std::nullopt));
    auto b = stats_of(solve(m, std::nullopt));
    CHECK(a.solution_count == b.solution_count);
    CHECK(a.node_count == b.node_count);
}

TEST_CASE("a stopped search leaves a well-formed resume state")
{
    auto m = semigroup::build_model(4);
    for (std::uint64_t limit : {1, 5, 40, 200}) {
        SearchLimits lim;
        lim.node_limit = limit;
        auto out = solve(m, lim);
        auto * st = std::get_if<Stopped>(&out);
        REQUIRE(st);
        CHECK(st->resume.stop_domain.size() >= 2);
        CHECK(st->resume.stop_domain.subset_of(m.variables[st->resume.stop_var].domain));
        for (auto & d : st->resume.path)
            if (d.polarity == Polarity::refute)
                CHECK(d.sibling_explored);
    }
}

TEST_CASE("encode_frontier examples")
{
    SUBCASE("stop at the root")
    {
        auto fd = encode_frontier(ResumeState{{}, 0, Domain::range(0, 3)});
        REQUIRE(fd.regions.size() == 1);
        CHECK(fd.regions[0].literals.empty());
    }
    SUBCASE("one open left decision, one right decision")
    {
        ResumeState r;
        r.path.push_back(Decision{0, 1, Polarity::assign, false});
        r.path.push_back(Decision{1, 2, Polarity::refute, true});
        auto fd = encode_frontier(r);
        REQUIRE(fd.regions.size() == 2);
        CHECK(fd.regions[0] == Region{{{0, Op::ne, 1}}});
        CHECK(fd.regions[1] == Region{{{0, Op::eq, 1}, {1, Op::ne, 2}}});
    }
}

TEST_CASE("split-transparency: emitted plus frontier equals all solutions")
{
    SUBCASE("three variables over {0,1,2}")
    {
        Model m;
        for (int i = 0; i < 3; ++i)
            m.add_variable("x" + std::to_string(i), Domain::range(0, 2));
        auto all = brute_solutions(m);
        REQUIRE(all.size() == 27);
        for (std::uint64_t limit = 1; limit <= 50; ++limit) {
            SearchLimits lim;
            lim.node_limit = limit;
            std::set<std::vector<int>> emitted;
            auto out = collect(m, lim, emitted);
            std::set<std::vector<int>> rest;
            if (auto * st = std::get_if<Stopped>(&out))
                rest = brute_solutions(with_constraint(m, encode_frontier(st->resume)));
            for (auto & a : rest)
                CHECK(emitted.count(a) == 0);
            rest.insert(emitted.begin(), emitted.end());
            CHECK(rest == all);
        }
    }
    SUBCASE("random toy models")
    {
        std::mt19937_64 rng(4242);
        std::uniform_int_distribution<std::uint64_t> limit(1, 30);
        for (int trial = 0; trial < 400; ++trial) {
            Model m = random_toy_model(rng, 6, 3);
            auto all = brute_solutions(m);
            SearchLimits lim;
            lim.node_limit = limit(rng);
            std::set<std::vector<int>> emitted;
            auto out = collect(m, lim, emitted);
            std::set<std::vector<int>> rest;
            if (auto * st = std::get_if<Stopped>(&out))
                rest = brute_solutions(with_constraint(m, encode_frontier(st->resume)));
            for (auto & a : rest)
                CHECK(emitted.count(a) == 0);
            rest.insert(emitted.begin(), emitted.end());
            CHECK(rest == all);
        }
    }
}

TEST_CASE("split_model examples")
{
    Model m;
    m.add_variable("x", Domain::range(1, 4));

    SUBCASE("x in 1..4, arity 2")
    {
        auto kids = split_model(m, ResumeState{{}, 0, Domain::range(1, 4)}, {2, 0ms});
        REQUIRE(kids.size() == 2);
        auto fd0 = std::get<FrontierDisjunction>(kids[0].constraints.back());
        auto fd1 = std::get<FrontierDisjunction>(kids[1].constraints.back());
        CHECK(fd0.regions == std::vector<Region>{Region{{{0, Op::le, 2}}}});
        CHECK(fd1.regions == std::vector<Region>{Region{{{0, Op::ge, 3}}}});
        CHECK(brute_solutions(kids[0]) == std::set<std::vector<int>>{{1}, {2}});
        CHECK(brute_solutions(kids[1]) == std::set<std::vector<int>>{{3}, {4}});
    }
    SUBCASE("two values, arity 4")
    {
        auto kids = split_model(m, ResumeState{{}, 0, Domain::of({0, 1})}, {4, 0ms});
        CHECK(kids.size() == 2);
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(split_model(m, ResumeState{{}, 0, Domain::single(1)}, {2, 0ms}), std::invalid_argument);
        CHECK_THROWS_AS(split_model(m, ResumeState{{}, 0, Domain::range(1, 4)}, {1, 0ms}), std::invalid_argument);
    }
    SUBCASE("lineage")
    {
        m.lineage = LineageTag{"c.3", "c", "c"};
        auto kids = split_model(m, ResumeState{{}, 0, Domain::range(1, 4)}, {3, 250ms});
        REQUIRE(kids.size() == 3);
        for (int j = 0; j < 3; ++j) {
            CHECK(kids[j].lineage->unit_id == "c.3." + std::to_string(j));
            CHECK(kids[j].lineage->parent_id == "c.3");
            CHECK(kids[j].lineage->root_id == "c");
            CHECK(kids[j].options.budget_ms == 250);
            CHECK(kids[j].options.arity == 3);
        }
    }
}

TEST_CASE("partition_stop_domain makes near-equal contiguous blocks")
{
    auto blocks = partition_stop_domain(0, Domain::range(0, 6), 3);
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0] == std::vector<Literal>{{0, Op::le, 2}});
    CHECK(blocks[1] == std::vector<Literal>{{0, Op::ge, 3}, {0, Op::le, 4}});
    CHECK(blocks[2] == std::vector<Literal>{{0, Op::ge, 5}});
}

TEST_CASE("children of a random stop partition the frontier")
{
    std::mt19937_64 rng(8080);
    std::uniform_int_distribution<std::uint64_t> limit(1, 25);
    std::uniform_int_distribution<int> arity(2, 4);
    int splits = 0;
    for (int trial = 0; trial < 400; ++trial) {
        Model m = random_toy_model(rng, 5, 4);
        SearchLimits lim;
        lim.node_limit = limit(rng);
        auto out = solve(m, lim);
        auto * st = std::get_if<Stopped>(&out);
        if (! st)
            continue;
        ++splits;
        auto frontier = brute_solutions(with_constraint(m, encode_frontier(st->resume)));
        auto kids = split_model(m, st->resume, {arity(rng), 0ms});
        std::set<std::vector<int>> seen;
        for (auto & k : kids)
            for (auto & a : brute_solutions(k))
                CHECK(seen.insert(a).second);
        CHECK(seen == frontier);
        CHECK(std::get<FrontierDisjunction>(kids[0].constraints.back()).regions.size()
            == encode_frontier(st->resume).regions.size());
    }
    CHECK(splits > 100);
}

TEST_CASE("recursive splitting loses and duplicates nothing")
{
    std::mt19937_64 rng(515);
    for (int trial = 0; trial < 100; ++trial) {
        Model root = random_toy_model(rng, 6, 3);
        const auto expected = stats_of(solve(root, std::nullopt)).solution_count;
        std::uint64_t total = 0;
        std::vector<Model> work{root};
        while (! work.empty()) {
            Model m = std::move(work.back());
            work.pop_back();
            SearchLimits lim;
            lim.node_limit = 3;
            auto out = solve(m, lim);
            total += stats_of(out).solution_count;
            if (auto * st = std::get_if<Stopped>(&out))
                for (auto & k : split_model(m, st->resume, {2, 0ms}))
                    work.push_back(std::move(k));
        }
        CHECK(total == expected);
    }
}

TEST_CASE("unit files")
{
    TempDir dir;
    auto m = semigroup::build_model(3);
    m.lineage = LineageTag{"c", std::nullopt, "c"};
    m.options = SolverOptions{1500, 3};

    SUBCASE("round-trip and byte stability")
    {
        write_unit(m, dir / "a.model");
        auto back = read_unit(dir / "a.model");
        CHECK(back == m);
        write_unit(back, dir / "b.model");
        CHECK(read_file(dir / "a.model") == read_file(dir / "b.model"));
        CHECK(stats_of(solve(back, std::nullopt)).solution_count == 18);
    }
    SUBCASE("split children round-trip")
    {
        auto out = solve(m, SearchLimits{std::nullopt, 512, {}, 5});
        auto & st = std::get<Stopped>(out);
        for (auto & k : split_model(m, st.resume, {2, 0ms})) {
            auto text = serialize_model(k);
            CHECK(parse_model(text) == k);
            CHECK(serialize_model(parse_model(text)) == text);
        }
    }
    SUBCASE("truncated file")
    {
        auto text = serialize_model(m);
        std::ofstream(dir / "t.model") << text.substr(0, text.size() / 2);
        try {
            read_unit(dir / "t.model");
            FAIL("expected a parse error");
        }
        catch (const UnitFormatError & e) {
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
    }
    SUBCASE("unknown constraint kind")
    {
        auto doc = model_to_json(m);
        doc["constraints"][0]["kind"] = "alldifferent";
        try {
            model_from_json(doc);
            FAIL("expected a format error");
        }
        catch (const UnitFormatError & e) {
            CHECK(std::string(e.what()).find("alldifferent") != std::string::npos);
        }
    }
    SUBCASE("invalid content is rejected by validation")
    {
        auto doc = model_to_json(m);
        doc["constraints"][0]["result"] = 4000;
        CHECK_THROWS_AS(model_from_json(doc), InvalidModel);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS(read_unit(dir / "absent.model"));
    }
    SUBCASE("digest follows content")
    {
        CHECK(content_digest("abc") == content_digest("abc"));
        CHECK(content_digest("abc") != content_digest("abd"));
        CHECK(content_digest("").size() == 16);
    }
}
