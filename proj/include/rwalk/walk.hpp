#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwalk/formulations.hpp"

namespace rwalk {

struct WalkConfig {
    double eps = 0.01;
    double improve_tol = 1e-6;
    double min_step_norm = 1e-12;
    /// 0 means 10 x (hidden neuron count).
    std::size_t max_iters = 0;
    LpLimits lp_limits{};
    /// Checked between LP solves; reaching it ends the walk as IterCap.
    std::optional<std::chrono::steady_clock::time_point> deadline;

    void validate() const;
};

enum class WalkTermination { NoImprovement, StepStall, IterCap, LpFailure };

std::string to_string(WalkTermination t);

struct WalkStep {
    std::vector<double> start;   // x0 of the iteration
    std::vector<double> region_opt;  // x1, the optimum of LP(x0)
    double value;                // F(x1)
};

struct WalkResult {
    std::vector<double> best_x;
    double best_value = 0.0;
    std::vector<WalkStep> trace;
    WalkTermination termination = WalkTermination::NoImprovement;
    std::size_t lp_solves = 0;
};

/// Moves each coordinate of x1 by eps*d unless that single-coordinate move
/// leaves the domain. For L1 balls the combined step is then halved (at most
/// 20 times) until the point is back inside; failing that, x1 is returned.
std::vector<double> step_correct(std::span<const double> x1, std::span<const double> d, double eps,
                                 const InputDomain& domain);

/// Region walk: optimize inside the current linear region with LP(x0), then
/// step eps along the improving direction into the neighbouring region.
WalkResult local_search(const Network& net, const InputDomain& domain, const Objective& obj,
                        std::span<const double> x0, const WalkConfig& cfg = {});

}  // namespace rwalk
