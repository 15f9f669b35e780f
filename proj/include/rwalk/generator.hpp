#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rwalk/formulations.hpp"
#include "rwalk/walk.hpp"

namespace rwalk {

/// Budget of a generator run. Exactly one of the two limits should be set;
/// `outer_iterations` gives the reproducible mode.
struct GenConfig {
    double delta = 0.1;
    std::optional<double> time_limit_s;
    std::optional<std::size_t> outer_iterations;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Provenance {
    /// -1 for the walk from the relaxation optimum, otherwise the outer loop.
    long outer = -1;
    long layer = -1;
    std::size_t flips = 0;
    std::size_t walk_iterations = 0;
    bool random_start = false;
};

struct Incumbent {
    std::vector<double> x;
    double value = -kInf;
    Provenance provenance;
    double elapsed_s = 0.0;

    bool valid() const { return !x.empty(); }
};

enum class GenTermination { Budget, RelaxationFallback };

std::string to_string(GenTermination t);

struct GeneratorResult {
    Incumbent incumbent;
    std::size_t local_searches = 0;
    std::size_t outer_iterations = 0;
    std::size_t lr_solves = 0;
    std::size_t infeasible_flips = 0;
    GenTermination termination = GenTermination::Budget;
    double relaxation_value = 0.0;
};

using IncumbentCallback = std::function<void(const Incumbent&)>;

/// chi_i = 1 - zbar_i when i is active at xbar, zbar_i otherwise, for i in `candidates`.
std::vector<double> chi_scores(const ActivationPattern& pattern, std::span<const double> zbar, std::size_t layer,
                               std::span<const std::size_t> candidates);

/// Position in `chi` drawn with probability (chi_i + delta) / sum_j (chi_j + delta).
std::size_t pick_neuron(std::span<const double> chi, double delta, std::mt19937_64& rng);

/// Relax-and-walk: local search from the relaxation optimum, then repeated
/// passes that flip neuron activations layer by layer in the relaxation and
/// walk from every feasible flipped solution.
GeneratorResult run_generator(const Network& net, const InputDomain& domain, const Objective& obj,
                              const GenConfig& gen_cfg, const WalkConfig& walk_cfg = {},
                              const IncumbentCallback& on_incumbent = {});

/// Thread-safe best-of reducer shared by concurrent generator runs.
class IncumbentReducer {
public:
    /// Returns true when `candidate` became the new best. `on_improve` runs
    /// under the reducer lock, so callers see a nondecreasing sequence.
    bool offer(const Incumbent& candidate, const IncumbentCallback& on_improve = {});
    Incumbent best() const;

private:
    mutable std::mutex mutex_;
    Incumbent best_;
};

/// Independent generator runs with seeds seed, seed+1, ... run in parallel.
/// Counters are summed; the incumbent is the best one, ties going to the
/// lowest seed. Global improvements are reported through `on_incumbent`.
GeneratorResult run_portfolio(const Network& net, const InputDomain& domain, const Objective& obj,
                              const GenConfig& gen_cfg, std::size_t runs, const WalkConfig& walk_cfg = {},
                              const IncumbentCallback& on_incumbent = {});

}  // namespace rwalk
