#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rwalk/exact.hpp"
#include "rwalk/generator.hpp"

using namespace rwalk;

namespace {

GenConfig iterations(std::size_t n, std::uint64_t seed = 0) {
    GenConfig g;
    g.outer_iterations = n;
    g.seed = seed;
    return g;
}

}  // namespace

TEST_CASE("chi scores") {
    ActivationPattern p(std::vector<std::vector<bool>>{{true, false, true}});
    const std::vector<double> z{0.4, 0.4, 1.0};
    const std::vector<std::size_t> all{0, 1, 2};
    const auto chi = chi_scores(p, z, 0, all);
    CHECK(chi[0] == doctest::Approx(0.6));
    CHECK(chi[1] == doctest::Approx(0.4));
    CHECK(chi[2] == 0.0);
    const std::vector<double> exact{1.0, 0.0, 1.0};
    for (double c : chi_scores(p, exact, 0, all)) CHECK(c == 0.0);
    const std::vector<std::size_t> some{1};
    CHECK(chi_scores(p, z, 0, some).size() == 1);
}

TEST_CASE("pick_neuron distribution") {
    std::mt19937_64 rng(1);
    const std::vector<double> chi{0.2, 0.8};
    int ones = 0;
    const int n = 40000;
    for (int k = 0; k < n; ++k) ones += pick_neuron(chi, 0.1, rng) == 1;
    CHECK(ones / double(n) == doctest::Approx(0.75).epsilon(0.02));

    const std::vector<double> flat{0.0, 0.0};
    ones = 0;
    for (int k = 0; k < n; ++k) ones += pick_neuron(flat, 0.1, rng) == 1;
    CHECK(ones / double(n) == doctest::Approx(0.5).epsilon(0.03));

    const std::vector<double> single{0.3};
    CHECK(pick_neuron(single, 0.1, rng) == 0);
    CHECK_THROWS(pick_neuron(std::vector<double>{}, 0.1, rng));

    std::mt19937_64 a(9), b(9);
    const std::vector<double> many{0.1, 0.5, 0.0, 0.9};
    for (int k = 0; k < 100; ++k) CHECK(pick_neuron(many, 0.1, a) == pick_neuron(many, 0.1, b));
}

TEST_CASE("NET-ABS generator finds the optimum") {
    const Network net = oracle::net_abs();
    const InputDomain dom = InputDomain::uniform_box(1, -1, 1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GeneratorResult r = run_generator(net, dom, Objective{{1.0}}, iterations(3, seed));
        CHECK(r.incumbent.value == doctest::Approx(1.0));
        CHECK(r.outer_iterations == 3);
        CHECK(r.relaxation_value == doctest::Approx(1.0));
    }
    GenConfig timed;
    timed.time_limit_s = 0.2;
    const GeneratorResult r = run_generator(net, dom, Objective{{1.0}}, timed);
    CHECK(r.incumbent.value == doctest::Approx(1.0));
}

TEST_CASE("deterministic mode") {
    const Network net = random_network({3, 2, 6, 12, 1});
    const InputDomain dom = InputDomain::uniform_box(3, -1, 1);
    const GeneratorResult a = run_generator(net, dom, Objective{{1.0}}, iterations(10, 4));
    const GeneratorResult b = run_generator(net, dom, Objective{{1.0}}, iterations(10, 4));
    CHECK(a.incumbent.x == b.incumbent.x);
    CHECK(a.incumbent.value == b.incumbent.value);
    CHECK(a.local_searches == b.local_searches);
    CHECK(a.lr_solves == b.lr_solves);
    CHECK(a.infeasible_flips == b.infeasible_flips);
}

TEST_CASE("incumbents are monotone and valid") {
    const Network net = random_network({4, 2, 6, 2, 2});
    InputDomain dom = InputDomain::uniform_box(4, -1, 1);
    dom.l1 = L1Ball{{0.0, 0.0, 0.0, 0.0}, 1.5};
    const Objective obj{{1.0, -1.0}};
    std::vector<double> seen;
    const GeneratorResult r = run_generator(net, dom, obj, iterations(8, 3), {},
                                            [&](const Incumbent& inc) { seen.push_back(inc.value); });
    REQUIRE(!seen.empty());
    for (std::size_t k = 1; k < seen.size(); ++k) CHECK(seen[k] > seen[k - 1]);
    CHECK(seen.back() == r.incumbent.value);
    CHECK(r.incumbent.value == doctest::Approx(objective_value(net, obj, r.incumbent.x)).epsilon(1e-7));
    CHECK(dom.contains(r.incumbent.x, kFeasTol));
    CHECK(r.local_searches >= 1);
}

TEST_CASE("flips force the relaxed binary") {
    const Network net = oracle::desk_net(3);
    const InputDomain dom = InputDomain::uniform_box(2, -1, 1);
    RelaxationModel lr = build_relaxation(net, dom, Objective{{1.0}}, layer_bounds(net, dom.box));
    const RelaxedSolution root = lr.extract(lr.solve());
    const ActivationPattern p = activation_pattern(net, root.x);
    for (const NeuronRef& n : lr.unstable_neurons()) {
        const int state = p.active(n.layer, n.index) ? 0 : 1;
        lr.fix_activation(n.layer, n.index, state);
        const LpOutcome out = lr.solve();
        if (out.optimal()) CHECK(lr.extract(out).z[n.layer][n.index] == state);
        lr.unfix_activation(n.layer, n.index);
    }
}

TEST_CASE("generator attains the exact optimum on small nets") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Network net = oracle::desk_net(100 + seed);
        const InputDomain dom = InputDomain::uniform_box(2, -1, 1);
        const Objective obj{{1.0}};
        const ExactResult ex = enumerate_regions_optimize(net, dom, obj);
        REQUIRE(ex.complete());
        const GeneratorResult r = run_generator(net, dom, obj, iterations(30, seed));
        CHECK(r.incumbent.value <= ex.value + 1e-6);
        hits += r.incumbent.value >= ex.value - 1e-3 * std::abs(ex.value);
    }
    CHECK(hits >= 18);
}

TEST_CASE("relaxation failure falls back to random starts") {
    const Network net = random_network({4, 2, 8, 5, 1});
    WalkConfig walk;
    walk.lp_limits.max_pivots = 3;
    const GeneratorResult r =
        run_generator(net, InputDomain::uniform_box(4, -1, 1), Objective{{1.0}}, iterations(4, 1), walk);
    CHECK(r.termination == GenTermination::RelaxationFallback);
    CHECK(r.local_searches == 4);
    CHECK(r.incumbent.valid());
    CHECK(r.incumbent.provenance.random_start);
}

TEST_CASE("config validation") {
    const Network net = oracle::net_abs();
    const InputDomain dom = InputDomain::uniform_box(1, -1, 1);
    CHECK_THROWS(run_generator(net, dom, Objective{{1.0}}, GenConfig{}));
    GenConfig g = iterations(1);
    g.delta = 0.0;
    CHECK_THROWS(run_generator(net, dom, Objective{{1.0}}, g));
    CHECK_THROWS_AS(run_generator(net, InputDomain::uniform_box(1, 1, 0), Objective{{1.0}}, iterations(1)),
                    DomainError);
}

TEST_CASE("portfolio equals the best of its runs") {
    const Network net = random_network({3, 2, 6, 21, 1});
    const InputDomain dom = InputDomain::uniform_box(3, -1, 1);
    const Objective obj{{1.0}};
    const GeneratorResult p = run_portfolio(net, dom, obj, iterations(3, 10), 4);
    double best = -kInf;
    std::size_t searches = 0;
    for (std::uint64_t s = 10; s < 14; ++s) {
        const GeneratorResult r = run_generator(net, dom, obj, iterations(3, s));
        best = std::max(best, r.incumbent.value);
        searches += r.local_searches;
    }
    CHECK(p.incumbent.value == best);
    CHECK(p.local_searches == searches);
    CHECK(p.outer_iterations == 12);

    IncumbentReducer red;
    CHECK(red.offer(Incumbent{{0.0}, 1.0, {}, 0.0}));
    CHECK_FALSE(red.offer(Incumbent{{1.0}, 1.0, {}, 0.0}));
    CHECK(red.offer(Incumbent{{2.0}, 2.0, {}, 0.0}));
    CHECK(red.best().x == std::vector<double>{2.0});
    CHECK_THROWS(run_portfolio(net, dom, obj, iterations(1), 0));
}
