#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rwalk/formulations.hpp"

namespace rwalk {

enum class Proof { EnumerationComplete, BnBComplete, TimeLimit };

std::string to_string(Proof p);

struct ExactResult {
    double value = -kInf;
    std::vector<double> x;
    Proof proof = Proof::TimeLimit;
    /// Upper bound on the optimum; equals `value` on complete proofs.
    double bound = kInf;
    /// Patterns visited (enumeration) or nodes solved (branch and bound).
    std::size_t count = 0;
    std::size_t feasible_regions = 0;
    double root_bound = kInf;

    bool complete() const { return proof != Proof::TimeLimit; }
};

/// Solves LP(pattern) for every activation pattern in Gray-code order and
/// keeps the best. `max_patterns` caps the number visited. Parallel over
/// chunks of the code sequence; without a time limit the result does not
/// depend on thread count.
ExactResult enumerate_regions_optimize(const Network& net, const InputDomain& domain, const Objective& obj,
                                       std::size_t max_patterns = std::size_t{1} << 22,
                                       std::optional<double> time_limit_s = std::nullopt);
/// Serial reference for `enumerate_regions_optimize`.
ExactResult enumerate_regions_optimize_serial(const Network& net, const InputDomain& domain,
                                              const Objective& obj,
                                              std::size_t max_patterns = std::size_t{1} << 22,
                                              std::optional<double> time_limit_s = std::nullopt);

/// Pattern number k of the enumeration: bit j of gray(k) activates the j-th
/// hidden neuron in layer-major order.
ActivationPattern gray_pattern(const Network& net, std::size_t k);

struct BnbLimits {
    std::size_t max_nodes = 1'000'000;
    std::optional<double> time_limit_s;
    LpLimits lp_limits{};
};

/// Branch and bound on the big-M MILP. Dives depth-first until the first
/// incumbent, then expands the open node with the largest bound.
ExactResult branch_and_bound(const Network& net, const InputDomain& domain, const Objective& obj,
                             const NeuronBounds& bounds, const BnbLimits& limits = {});

}  // namespace rwalk
