#include <cmath>
#include <random>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rwalk/network.hpp"

using namespace rwalk;

TEST_CASE("load NET-ABS fixture") {
    const Network net = load_network_file(oracle::fixture("net_abs.json"));
    CHECK(net.input_dim() == 1);
    CHECK(net.hidden_layer_count() == 1);
    CHECK(net.hidden_width(0) == 2);
    CHECK(net.output_dim() == 1);
    CHECK(net == oracle::net_abs());
}

TEST_CASE("loader rejects bad documents") {
    CHECK_THROWS_AS(load_network_file(oracle::fixture("bad_dims.json")), NetworkError);
    CHECK_THROWS_AS(parse_network("{\"input_dim\": 1"), NetworkError);
    CHECK_THROWS_AS(parse_network(R"({"input_dim":1,"layers":[{"weights":[[1]],"bias":[0],"relu":true}]})"),
                    NetworkError);  // no affine output layer
    CHECK_THROWS_AS(parse_network(R"({"input_dim":1,"layers":[{"weights":[[1]],"bias":[0,1],"relu":true},
        {"weights":[[1]],"bias":[0],"relu":false}]})"),
                    NetworkError);
    CHECK_THROWS_AS(parse_network(R"({"input_dim":1,"layers":[{"weights":[[1]],"bias":[0],"relu":true},
        {"weights":[[1]],"bias":[0],"relu":true}]})"),
                    NetworkError);
    try {
        load_network_file(oracle::fixture("bad_dims.json"));
    } catch (const NetworkError& e) {
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
}

TEST_CASE("loader accepts scientific notation") {
    const Network net = parse_network(R"({"input_dim":1,"layers":[{"weights":[[1e0],[-1.0E+0]],"bias":[0e-3,0],
        "relu":true},{"weights":[[1,1]],"bias":[0],"relu":false}]})");
    CHECK(net == oracle::net_abs());
}

TEST_CASE("save/load round trip") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Network net = random_network({3, 2, 5, seed, 2});
        CHECK(parse_network(save_network(net)) == net);
    }
    const Network boxed(1, oracle::net_abs().layers(), Box{{-2.0}, {3.0}});
    CHECK(parse_network(save_network(boxed)) == boxed);
}

TEST_CASE("forward on NET-ABS") {
    const Network net = oracle::net_abs();
    const std::vector<double> x{0.5};
    const LayerTrace tr = forward(net, x);
    CHECK(tr.pre[0] == std::vector<double>{0.5, -0.5});
    CHECK(tr.post[0] == std::vector<double>{0.5, 0.0});
    CHECK(tr.output == std::vector<double>{0.5});
    CHECK(evaluate(net, std::vector<double>{-1.0})[0] == 1.0);
    CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), NetworkError);
}

TEST_CASE("forward with zero biases maps 0 to 0") {
    Network net = random_network({3, 2, 4, 9, 2});
    std::vector<Layer> layers = net.layers();
    for (Layer& l : layers) std::fill(l.bias.begin(), l.bias.end(), 0.0);
    const Network zero_bias(3, layers);
    for (double y : evaluate(zero_bias, std::vector<double>(3, 0.0))) CHECK(y == 0.0);
}

TEST_CASE("forward matches the naive evaluator") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Network net = random_network({4, 3, 6, seed, 2});
        std::vector<double> x(4);
        for (double& v : x) v = u(rng);
        const auto y = evaluate(net, x);
        const auto ref = oracle::naive_forward(net, x);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("zeroed layer gives bias-only propagation") {
    const Network net = random_network({3, 2, 4, 5, 1});
    std::vector<Layer> layers = net.layers();
    layers[1].weights = Matrix(layers[1].out_dim(), layers[1].in_dim(), 0.0);
    const Network cut(3, layers);
    // Past the zeroed layer the input no longer matters.
    std::vector<double> h(layers[1].bias);
    for (double& v : h) v = std::max(0.0, v);
    double y = layers[2].bias[0];
    for (std::size_t j = 0; j < h.size(); ++j) y += layers[2].weights(0, j) * h[j];
    CHECK(evaluate(cut, std::vector<double>{0.3, -0.7, 0.1})[0] == doctest::Approx(y));
    CHECK(evaluate(cut, std::vector<double>{-1.0, 1.0, 1.0})[0] == doctest::Approx(y));
}

TEST_CASE("activation pattern and tie rule") {
    const Network net = oracle::net_abs();
    const ActivationPattern p = activation_pattern(net, std::vector<double>{0.5});
    CHECK(p.active(0, 0));
    CHECK_FALSE(p.active(0, 1));

    ActivationPattern prev(net);
    prev.set(0, 1, true);
    const ActivationPattern tied = activation_pattern(net, std::vector<double>{0.0}, &prev);
    CHECK(tied == prev);

    const ActivationPattern none = activation_pattern(net, std::vector<double>{0.0});
    CHECK(none.active_count(0) == 0);

    // Within tie tolerance counts as a tie; just outside does not.
    CHECK(activation_pattern(net, std::vector<double>{5e-10}, &prev) == prev);
    CHECK(activation_pattern(net, std::vector<double>{2e-9}, &prev).active(0, 0));
}

TEST_CASE("region affine map examples") {
    const Network net = oracle::net_abs();
    ActivationPattern p(net);
    p.set(0, 0, true);
    AffineMap m = region_affine_map(net, p);
    CHECK(m.T(0, 0) == 1.0);
    CHECK(m.t[0] == 0.0);
    p.set(0, 1, true);
    m = region_affine_map(net, p);
    CHECK(m.T(0, 0) == 0.0);
    CHECK(m.t[0] == 0.0);

    std::vector<Layer> layers{Layer{Matrix::identity(3), {0, 0, 0}, true}, Layer{Matrix::identity(3), {0, 0, 0}, true},
                              Layer{Matrix::identity(3), {0, 0, 0}, false}};
    const Network ident(3, layers);
    ActivationPattern all(ident);
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t i = 0; i < 3; ++i) all.set(l, i, true);
    m = region_affine_map(ident, all);
    CHECK(m.T == Matrix::identity(3));
    CHECK(m.t == std::vector<double>{0, 0, 0});

    ActivationPattern wrong(std::vector<std::vector<bool>>{{true}});
    CHECK_THROWS_AS(region_affine_map(net, wrong), NetworkError);
}

TEST_CASE("region affine map agrees with forward") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Network net = random_network({3, 3, 5, seed, 2});
        for (int k = 0; k < 50; ++k) {
            std::vector<double> x(3);
            for (double& v : x) v = u(rng);
            const auto y = evaluate(net, x);
            const auto ya = region_affine_map(net, activation_pattern(net, x)).apply(x);
            for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(ya[i] - y[i]) <= 1e-9 * (1.0 + std::abs(y[i])));
        }
    }
}

TEST_CASE("layer bounds examples") {
    Matrix w(1, 2);
    w(0, 0) = 2.0;
    w(0, 1) = -1.0;
    const Network single(2, {Layer{w, {1.0}, true}, Layer{Matrix(1, 1, 1.0), {0.0}, false}});
    NeuronBounds b = layer_bounds(single, Box{{0, 0}, {1, 1}});
    CHECK(b.lb[0][0] == 0.0);
    CHECK(b.ub[0][0] == 3.0);

    b = layer_bounds(oracle::net_abs(), Box{{-1}, {1}});
    CHECK(b.lb[0] == std::vector<double>{-1, -1});
    CHECK(b.ub[0] == std::vector<double>{1, 1});

    const Network constant(1, {Layer{Matrix(1, 1, 0.0), {5.0}, true}, Layer{Matrix(1, 1, 1.0), {0.0}, false}});
    b = layer_bounds(constant, Box{{-1}, {1}});
    CHECK(b.lb[0][0] == 5.0);
    CHECK(b.ub[0][0] == 5.0);
    CHECK(b.stably_active(0, 0));

    CHECK_THROWS_AS(layer_bounds(oracle::net_abs(), Box{{-std::numeric_limits<double>::infinity()}, {1}}), NetworkError);
}

TEST_CASE("layer bounds are sound") {
    std::mt19937_64 rng(21);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Network net = random_network({3, 3, 6, seed, 1});
        const Box box{{-1, -0.5, 0}, {1, 0.5, 2}};
        const NeuronBounds b = layer_bounds(net, box);
        for (int k = 0; k < 1000; ++k) {
            std::vector<double> x(3);
            for (std::size_t i = 0; i < 3; ++i) x[i] = std::uniform_real_distribution<double>(box.lo[i], box.hi[i])(rng);
            const LayerTrace tr = forward(net, x);
            for (std::size_t l = 0; l < net.hidden_layer_count(); ++l)
                for (std::size_t i = 0; i < net.hidden_width(l); ++i) {
                    CHECK(tr.pre[l][i] >= b.lb[l][i] - 1e-9);
                    CHECK(tr.pre[l][i] <= b.ub[l][i] + 1e-9);
                }
        }
    }
}

TEST_CASE("random networks are seeded") {
    const Network a = random_network({10, 1, 100, 7, 1});
    CHECK(a.input_dim() == 10);
    CHECK(a.hidden_layer_count() == 1);
    CHECK(a.hidden_width(0) == 100);
    CHECK(a.output_dim() == 1);
    CHECK(random_network({10, 1, 100, 7, 1}) == a);
    CHECK_FALSE(random_network({10, 1, 100, 8, 1}) == a);
    const double r = std::sqrt(6.0 / 10.0);
    for (double w : a.hidden(0).weights.data()) CHECK(std::abs(w) <= r);
    for (double b : a.hidden(0).bias) CHECK(std::abs(b) <= 1.0);
    CHECK_THROWS_AS(random_network({0, 1, 3, 1, 1}), NetworkError);
}

TEST_CASE("forward_batch parallel equals serial") {
    const Network net = random_network({5, 2, 16, 4, 3});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix xs(300, 5);
    for (std::size_t i = 0; i < xs.rows(); ++i)
        for (std::size_t j = 0; j < 5; ++j) xs(i, j) = u(rng);
    const Matrix par = forward_batch(net, xs);
    CHECK(par == forward_batch_serial(net, xs));
    const auto y = evaluate(net, xs.row(17));
    for (std::size_t k = 0; k < 3; ++k) CHECK(par(17, k) == y[k]);
}
