// Serial vs OpenMP timings for the parallel kernels.
#include <chrono>
#include <cstdio>
#include <random>

#include <omp.h>

#include "rwalk/exact.hpp"
#include "rwalk/generator.hpp"

using namespace rwalk;

template <class F>
double time_it(F&& f, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

static void report(const char* name, double serial, double parallel) {
    std::printf("%-22s serial %9.4f s  parallel %9.4f s  speedup %5.2fx\n", name, serial, parallel,
                parallel > 0 ? serial / parallel : 0.0);
}

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());

    {
        const Network net = random_network({64, 3, 256, 11, 1});
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Matrix xs(4096, 64);
        for (std::size_t i = 0; i < xs.rows(); ++i)
            for (std::size_t j = 0; j < xs.cols(); ++j) xs(i, j) = u(rng);
        report("forward_batch", time_it([&] { (void)forward_batch_serial(net, xs); }),
               time_it([&] { (void)forward_batch(net, xs); }));
    }
    {
        const Network net = random_network({2, 2, 6, 3, 1});
        const InputDomain dom = InputDomain::uniform_box(2, -1, 1);
        const Objective obj{{1.0}};
        report("region enumeration", time_it([&] { (void)enumerate_regions_optimize_serial(net, dom, obj); }, 1),
               time_it([&] { (void)enumerate_regions_optimize(net, dom, obj); }, 1));
    }
    {
        const Network net = random_network({20, 2, 60, 4, 1});
        const InputDomain dom = InputDomain::uniform_box(20, -1, 1);
        const RelaxationModel lr =
            build_relaxation(net, dom, Objective{{1.0}}, layer_bounds(net, dom.enclosing_box()));
        report("simplex pivots", time_it([&] { (void)solve_lp(lr.lp(), LpLimits{0, PivotKernel::Serial}); }),
               time_it([&] { (void)solve_lp(lr.lp(), LpLimits{0, PivotKernel::Parallel}); }));
    }
    {
        const Network net = random_network({4, 2, 8, 9, 1});
        const InputDomain dom = InputDomain::uniform_box(4, -1, 1);
        GenConfig gen;
        gen.outer_iterations = 5;
        const Objective obj{{1.0}};
        report("portfolio (8 runs)", time_it([&] {
                   for (std::uint64_t s = 0; s < 8; ++s) {
                       GenConfig g = gen;
                       g.seed = s;
                       (void)run_generator(net, dom, obj, g);
                   }
               }, 1),
               time_it([&] { (void)run_portfolio(net, dom, obj, gen, 8); }, 1));
    }
}
