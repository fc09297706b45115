#include "support.hpp"

#include <splitsolve/propagation.hpp>
#include <splitsolve/semigroup.hpp>
#include <splitsolve/store.hpp>

#include <doctest.h>

using namespace testing;

TEST_CASE("domain basics")
{
    auto d = Domain::range(1, 4);
    CHECK(d.size() == 4);
    CHECK(d.min() == 1);
    CHECK(d.max() == 4);
    CHECK(d.contains(3));
    CHECK_FALSE(d.contains(0));
    CHECK(Domain::range(3, 2).empty());
    CHECK(Domain::range(0, 63).size() == 64);
    CHECK(Domain::of({2, 5}).values() == std::vector<int>{2, 5});
    CHECK((d & Domain::at_most(2)) == Domain::of({1, 2}));
    CHECK(d.without(Domain::single(2)) == Domain::of({1, 3, 4}));
    CHECK(Domain::single(7).is_single());
    CHECK(Domain::of({1, 3}).to_string() == "{1,3}");
}

TEST_CASE("literal negation flips the set of satisfying values")
{
    for (auto op : {Op::le, Op::ge, Op::eq, Op::ne})
        for (int bound = 0; bound < 6; ++bound) {
            Literal lit{0, op, bound};
            Literal neg = negate(lit);
            for (int x = 0; x < 6; ++x)
                CHECK(op_holds(op, x, bound) != op_holds(neg.op, x, neg.value));
        }
}

TEST_CASE("validate_model")
{
    SUBCASE("one variable, no constraints")
    {
        Model m;
        m.add_variable("x", Domain::range(0, 3));
        CHECK(validate_model(m).ok());
    }
    SUBCASE("dangling variable in an element constraint")
    {
        Model m;
        for (int i = 0; i < 3; ++i)
            m.add_variable("x" + std::to_string(i), Domain::range(0, 2));
        m.constraints.emplace_back(Element{0, {1, 99}, 2});
        auto r = validate_model(m);
        REQUIRE_FALSE(r.ok());
        CHECK(r.summary().find("dangling variable") != std::string::npos);
    }
    SUBCASE("empty initial domain")
    {
        Model m;
        m.add_variable("x", Domain{});
        CHECK_FALSE(validate_model(m).ok());
    }
    SUBCASE("non-bijective value map")
    {
        Model m;
        m.add_variable("x", Domain::range(0, 1));
        m.constraints.emplace_back(LexLeaderMapped{{0}, {0}, {0, 0}});
        CHECK_FALSE(validate_model(m).ok());
    }
    SUBCASE("order-3 semigroup model")
    {
        CHECK(validate_model(semigroup::build_model(3)).ok());
    }
}

TEST_CASE("check_assignment")
{
    Model m;
    m.add_variable("x", Domain::range(0, 4));
    CHECK(check_assignment(m, std::vector<int>{3}));
    m.constraints.emplace_back(UnaryBound{0, Op::le, 2});
    CHECK_FALSE(check_assignment(m, std::vector<int>{3}));
    CHECK_THROWS_AS(check_assignment(m, std::vector<int>{}), MalformedAssignment);
}

TEST_CASE("the order-10 fixture satisfies the order-10 associativity constraints")
{
    auto t = semigroup::read_table_file(SPLITSOLVE_FIXTURES "/semigroup_order10.txt");
    REQUIRE(t.order() == 10);
    auto m = semigroup::build_model(10, {false, false});
    CHECK(check_assignment(m, semigroup::assignment_from_table(t)));
    auto broken = t;
    broken.set(0, 0, 1);
    CHECK_FALSE(check_assignment(m, semigroup::assignment_from_table(broken)));
}

TEST_CASE("element examples")
{
    SUBCASE("fixed list, fixed index prunes the result")
    {
        DomainStore s({Domain::single(2), Domain::single(0), Domain::single(1), Domain::range(0, 2), Domain::single(0)});
        Element e{3, {0, 1, 2}, 4};
        REQUIRE(propagate_element(e, s));
        CHECK(s.domain(3) == Domain::single(2));
    }
    SUBCASE("fixed list, fixed result prunes the index")
    {
        DomainStore s({Domain::single(2), Domain::single(0), Domain::single(1), Domain::single(0), Domain::range(0, 2)});
        Element e{3, {0, 1, 2}, 4};
        REQUIRE(propagate_element(e, s));
        CHECK(s.domain(4) == Domain::single(1));
    }
    SUBCASE("result 5 only supported by M_1")
    {
        // vars: N, M0, M1, P
        DomainStore s({Domain::single(5), Domain::of({1, 2}), Domain::single(5), Domain::of({0, 1})});
        Element e{0, {1, 2}, 3};
        auto changed = propagate_element(e, s);
        REQUIRE(changed);
        CHECK(s.domain(3) == Domain::single(1));
        CHECK(s.domain(2) == Domain::single(5));
        CHECK(s.domain(1) == Domain::of({1, 2}));
    }
    SUBCASE("everything full")
    {
        std::vector<Domain> d(5, Domain::range(0, 9));
        d[4] = Domain::range(0, 2);
        DomainStore s(d);
        Element e{0, {1, 2, 3}, 4};
        auto changed = propagate_element(e, s);
        REQUIRE(changed);
        CHECK(changed->empty());
    }
}

TEST_CASE("contradictory bounds conflict")
{
    Model m;
    m.add_variable("x", Domain::range(1, 4));
    m.constraints.emplace_back(UnaryBound{0, Op::le, 2});
    m.constraints.emplace_back(UnaryBound{0, Op::ge, 3});
    DomainStore s(m);
    CHECK(propagate(m, s) == PropagationResult::conflict);
}

TEST_CASE("element pruning equals exhaustive support on random instances")
{
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> nvars(1, 4);
    std::uniform_int_distribution<int> len(1, 4);
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = nvars(rng);
        std::uniform_int_distribution<int> var(0, n - 1);
        std::vector<Domain> doms;
        for (int i = 0; i < n; ++i)
            doms.push_back(random_domain(rng, 5));
        Element e;
        e.result = var(rng);
        e.index = var(rng);
        const int l = len(rng);
        for (int i = 0; i < l; ++i)
            e.list.push_back(var(rng));

        auto expected = element_support(e, doms);
        DomainStore s(doms);
        auto got = propagate_element(e, s);
        bool wiped = std::any_of(expected.begin(), expected.end(), [](Domain d) { return d.empty(); });
        INFO("trial " << trial);
        if (wiped) {
            CHECK_FALSE(got);
            continue;
        }
        REQUIRE(got);
        for (int v = 0; v < n; ++v)
            CHECK(s.domain(v) == expected[v]);
    }
}

TEST_CASE("propagation is monotone and sound on random toy models")
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        Model m = random_toy_model(rng);
        auto sols = brute_solutions(m);
        DomainStore s(m);
        auto r = propagate(m, s);
        for (int v = 0; v < m.variable_count(); ++v)
            CHECK(s.domain(v).subset_of(m.variables[v].domain));
        if (r == PropagationResult::conflict) {
            CHECK(sols.empty());
            continue;
        }
        for (auto & a : sols)
            for (int v = 0; v < m.variable_count(); ++v)
                CHECK(s.domain(v).contains(a[v]));
    }
}

TEST_CASE("check_assignment agrees with propagation of a fixed assignment")
{
    std::mt19937_64 rng(991);
    for (int trial = 0; trial < 300; ++trial) {
        Model m = random_toy_model(rng);
        for_each_assignment(m, [&](const std::vector<int> & a) {
            std::vector<Domain> fixed;
            for (int x : a)
                fixed.push_back(Domain::single(x));
            DomainStore s(fixed);
            bool survives = propagate(m, s) == PropagationResult::fixpoint;
            CHECK(survives == check_assignment(m, a));
            CHECK(check_assignment(m, a) == satisfies(m, a));
        });
    }
}

TEST_CASE("frontier with a single live region posts its literals")
{
    Model m;
    m.add_variable("x", Domain::range(0, 4));
    m.add_variable("y", Domain::range(0, 4));
    FrontierDisjunction fd;
    fd.regions.push_back(Region{{{0, Op::le, 1}}});
    fd.regions.push_back(Region{{{0, Op::ge, 3}, {1, Op::eq, 2}}});
    m.constraints.emplace_back(fd);
    m.constraints.emplace_back(UnaryBound{0, Op::ge, 2});
    DomainStore s(m);
    REQUIRE(propagate(m, s) == PropagationResult::fixpoint);
    CHECK(s.domain(0) == Domain::of({3, 4}));
    CHECK(s.domain(1) == Domain::single(2));
}

TEST_CASE("non-zero witness fixes the last candidate")
{
    Model m;
    m.add_variable("a", Domain::single(0));
    m.add_variable("b", Domain::range(0, 2));
    m.constraints.emplace_back(NonZeroWitness{{0, 1}});
    DomainStore s(m);
    REQUIRE(propagate(m, s) == PropagationResult::fixpoint);
    CHECK(s.domain(1) == Domain::of({1, 2}));
}

TEST_CASE("trail restores domains and aux slots")
{
    DomainStore s({Domain::range(0, 5), Domain::range(0, 5)});
    s.ensure_aux(1);
    s.push_level();
    CHECK(s.restrict(0, Domain::at_most(2)));
    s.set_aux(0, 7);
    s.push_level();
    CHECK_FALSE(s.restrict(1, Domain{}));
    CHECK(s.conflict());
    s.pop_level();
    CHECK_FALSE(s.conflict());
    CHECK(s.domain(1) == Domain::range(0, 5));
    CHECK(s.domain(0) == Domain::range(0, 2));
    s.pop_level();
    CHECK(s.domain(0) == Domain::range(0, 5));
    CHECK(s.aux(0) == 0);
}
