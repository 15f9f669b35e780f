#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rwalk/exact.hpp"
#include "rwalk/formulations.hpp"

using namespace rwalk;

namespace {

ActivationPattern abs_pattern(bool first, bool second) {
    return ActivationPattern(std::vector<std::vector<bool>>{{first, second}});
}

RelaxationModel abs_relaxation() {
    const Network net = oracle::net_abs();
    const InputDomain dom = InputDomain::uniform_box(1, -1, 1);
    return build_relaxation(net, dom, Objective{{1.0}}, layer_bounds(net, dom.enclosing_box()));
}

}  // namespace

TEST_CASE("domain validation") {
    CHECK_NOTHROW(InputDomain::uniform_box(2, -1, 1).validate());
    CHECK_THROWS_AS(InputDomain::uniform_box(1, 1, 0).validate(), DomainError);
    CHECK_THROWS_AS(InputDomain::uniform_box(1, -kInf, 0).validate(), DomainError);
    InputDomain far = InputDomain::uniform_box(2, -1, 1);
    far.l1 = L1Ball{{3.0, 3.0}, 1.0};
    CHECK_THROWS_AS(far.validate(), DomainError);
    far.l1->radius = 4.0;  // reaches the corner (1,1) exactly
    CHECK_NOTHROW(far.validate());
    InputDomain neg = InputDomain::uniform_box(1, -1, 1);
    neg.l1 = L1Ball{{0.0}, -1.0};
    CHECK_THROWS_AS(neg.validate(), DomainError);
}

TEST_CASE("contains, clip and enclosing box") {
    InputDomain d = InputDomain::uniform_box(2, -1, 1);
    d.l1 = L1Ball{{0.5, 0.5}, 0.5};
    CHECK(d.contains(std::vector<double>{0.5, 0.9}));
    CHECK_FALSE(d.contains(std::vector<double>{0.9, 0.9}));
    const auto c = d.clip(std::vector<double>{2.0, 2.0});
    CHECK(d.contains(c, 1e-12));
    const Box e = d.enclosing_box();
    CHECK(e.lo == std::vector<double>{0.0, 0.0});
    CHECK(e.hi == std::vector<double>{1.0, 1.0});
    CHECK(d.anchor_point() == std::vector<double>{0.5, 0.5});
}

TEST_CASE("encode_domain") {
    LpModel box_lp(2);
    const DomainColumns bc = encode_domain(InputDomain::uniform_box(2, -1, 1), box_lp, 0);
    CHECK(box_lp.row_count() == 0);
    CHECK(bc.aux.empty());
    CHECK(box_lp.lower == std::vector<double>{-1, -1});
    CHECK(box_lp.upper == std::vector<double>{1, 1});

    // anchor 0, radius 1 on a wide box reduces to x in [-1, 1]
    InputDomain d = InputDomain::uniform_box(1, -10, 10);
    d.l1 = L1Ball{{0.0}, 1.0};
    for (double dir : {1.0, -1.0}) {
        LpModel lp(1);
        encode_domain(d, lp, 0);
        lp.objective[0] = dir;
        const LpOutcome out = solve_lp(lp);
        REQUIRE(out.optimal());
        CHECK(out.x[0] == doctest::Approx(dir));
    }
}

TEST_CASE("region LP on NET-ABS") {
    const Network net = oracle::net_abs();
    const InputDomain dom = InputDomain::uniform_box(1, -1, 1);
    const Objective obj{{1.0}};

    LpOutcome out = solve_lp(build_region_lp(net, abs_pattern(true, false), dom, obj));
    REQUIRE(out.optimal());
    CHECK(out.x[0] == doctest::Approx(1.0));
    CHECK(out.objective == doctest::Approx(1.0));

    // Both inactive: only x = 0 lies in the closed region, value 0.
    out = solve_lp(build_region_lp(net, abs_pattern(false, false), dom, obj));
    REQUIRE(out.optimal());
    CHECK(out.objective == doctest::Approx(0.0));
    CHECK(out.x[0] == doctest::Approx(0.0));

    CHECK_THROWS_AS(build_region_lp(net, ActivationPattern(std::vector<std::vector<bool>>{{true}}), dom, obj),
                    NetworkError);
}

TEST_CASE("region LP consistency on random nets") {
    std::mt19937_64 rng(8);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Network net = random_network({3, 2, 5, seed, 1});
        InputDomain dom = InputDomain::uniform_box(3, -1, 1);
        if (seed % 2) dom.l1 = L1Ball{{0.1, -0.2, 0.0}, 1.2};
        const Objective obj{{1.0}};
        for (int k = 0; k < 20; ++k) {
            const auto x0 = oracle::sample_domain(dom, rng);
            const ActivationPattern p0 = activation_pattern(net, x0);
            const LpOutcome out = solve_lp(build_region_lp(net, p0, dom, obj));
            REQUIRE(out.optimal());
            CHECK(out.objective >= objective_value(net, obj, x0) - 1e-9);
            const std::vector<double> xs(out.x.begin(), out.x.begin() + 3);
            CHECK(activation_pattern(net, xs, &p0) == p0);
            CHECK(objective_value(net, obj, xs) == doctest::Approx(out.objective).epsilon(1e-9));
            ++checked;
        }
    }
    CHECK(checked == 400);
}

TEST_CASE("LR on NET-ABS equals the hand value") {
    // With lb = -1, ub = 1 the rows give h1 <= min(x + 1 - z1, z1) <= (x + 1) / 2
    // and h2 <= (1 - x) / 2, so h1 + h2 <= 1, attained at z = 1/2.
    const RelaxationModel lr = abs_relaxation();
    const LpOutcome out = lr.solve();
    REQUIRE(out.optimal());
    CHECK(out.objective == doctest::Approx(1.0));
    const RelaxedSolution sol = lr.extract(out);
    CHECK(sol.value == doctest::Approx(1.0));
}

TEST_CASE("relaxation dominance on random nets") {
    std::mt19937_64 rng(9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Network net = oracle::desk_net(seed);
        const InputDomain dom = InputDomain::uniform_box(2, -1, 1);
        const Objective obj{{1.0}};
        const LpOutcome lr = build_relaxation(net, dom, obj, layer_bounds(net, dom.box)).solve();
        REQUIRE(lr.optimal());
        const ExactResult ex = enumerate_regions_optimize(net, dom, obj);
        REQUIRE(ex.complete());
        CHECK(lr.objective >= ex.value - 1e-7);
        CHECK(ex.value >= oracle::sample_max(net, obj, dom, 200, rng) - 1e-7);
    }
}

TEST_CASE("stable neurons") {
    const Network constant(1, {Layer{Matrix(1, 1, 0.0), {-0.5}, true}, Layer{Matrix(1, 1, 1.0), {0.0}, false}});
    const InputDomain dom = InputDomain::uniform_box(1, -1, 1);
    const NeuronBounds b = layer_bounds(constant, dom.box);
    RelaxationModel lr = build_relaxation(constant, dom, Objective{{1.0}}, b);
    CHECK(lr.stable(0, 0));
    CHECK(lr.lp().lower[lr.z_col(0, 0)] == 0.0);
    CHECK(lr.lp().upper[lr.z_col(0, 0)] == 0.0);
    CHECK(lr.lp().upper[lr.h_col(0, 0)] == 0.0);
    CHECK(lr.unstable_neurons().empty());

    const Network active(1, {Layer{Matrix(1, 1, 1.0), {5.0}, true}, Layer{Matrix(1, 1, 1.0), {0.0}, false}});
    MilpModel milp = build_milp(active, dom, Objective{{1.0}}, layer_bounds(active, dom.box));
    CHECK(milp.integer_neurons.empty());
    CHECK(milp.relaxation.lp().lower[milp.relaxation.z_col(0, 0)] == 1.0);
    const LpOutcome plain = milp.relaxation.solve();
    REQUIRE(plain.optimal());
    CHECK(plain.objective == doctest::Approx(6.0));

    milp.relaxation.fix_activation(0, 0, 0);
    CHECK(milp.relaxation.solve().status == LpStatus::Infeasible);
}

TEST_CASE("fix and unfix") {
    RelaxationModel lr = abs_relaxation();
    const LpModel before = lr.lp();
    const LpOutcome base = lr.solve();

    lr.fix_activation(0, 1, 0);
    CHECK(lr.is_fixed(0, 1));
    const LpOutcome fixed = lr.solve();
    REQUIRE(fixed.optimal());
    CHECK(lr.extract(fixed).z[0][1] == 0.0);
    CHECK_THROWS(lr.fix_activation(0, 1, 1));
    CHECK_THROWS(lr.fix_activation(0, 0, 2));
    CHECK_THROWS(lr.fix_activation(3, 0, 1));

    lr.unfix_activation(0, 1);
    CHECK(lr.lp() == before);
    const LpOutcome again = lr.solve();
    CHECK(again.x == base.x);
    CHECK(again.objective == base.objective);
    CHECK_THROWS(lr.unfix_activation(0, 1));

    lr.fix_activation(0, 0, 1);
    lr.fix_activation(0, 1, 0);
    CHECK(lr.fixings().size() == 2);
    lr.clear_all_fixings();
    CHECK(lr.fixings().empty());
    CHECK(lr.lp() == before);
}

TEST_CASE("MILP on NET-ABS") {
    const Network net = oracle::net_abs();
    const InputDomain dom = InputDomain::uniform_box(1, -1, 1);
    const MilpModel milp = build_milp(net, dom, Objective{{1.0}}, layer_bounds(net, dom.box));
    CHECK(milp.integer_neurons.size() == 2);
    // Brute force over the four binary assignments.
    double best = -kInf;
    for (int s = 0; s < 4; ++s) {
        RelaxationModel lr = milp.relaxation;
        lr.fix_activation(0, 0, s & 1);
        lr.fix_activation(0, 1, (s >> 1) & 1);
        const LpOutcome out = lr.solve();
        if (out.optimal()) best = std::max(best, out.objective);
    }
    CHECK(best == doctest::Approx(1.0));
}

TEST_CASE("forward-pass assignments satisfy every big-M row") {
    std::mt19937_64 rng(4);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Network net = random_network({3, 2, 5, seed, 2});
        InputDomain dom = InputDomain::uniform_box(3, -1, 1);
        if (seed % 2) dom.l1 = L1Ball{{0.0, 0.3, -0.3}, 1.5};
        const Objective obj{{1.0, -0.5}};
        const RelaxationModel lr = build_relaxation(net, dom, obj, layer_bounds(net, dom.enclosing_box()));
        for (int k = 0; k < 50; ++k) {
            const auto x = oracle::sample_domain(dom, rng);
            const auto a = milp_assignment(lr, net, x);
            const SolutionCheck chk = verify_solution(lr.lp(), a, 1e-9);
            CHECK(chk.feasible);
            CHECK(chk.objective == doctest::Approx(objective_value(net, obj, x)).epsilon(1e-9));
        }
    }
}
