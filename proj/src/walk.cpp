#include "rwalk/walk.hpp"

#include <algorithm>
#include <cmath>

namespace rwalk {

void WalkConfig::validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("walk: eps must be positive");
    if (!(improve_tol > 0.0)) throw std::invalid_argument("walk: improve_tol must be positive");
    if (!(min_step_norm >= 0.0)) throw std::invalid_argument("walk: min_step_norm must be nonnegative");
}

std::string to_string(WalkTermination t) {
    switch (t) {
    case WalkTermination::NoImprovement: return "NoImprovement";
    case WalkTermination::StepStall: return "StepStall";
    case WalkTermination::IterCap: return "IterCap";
    case WalkTermination::LpFailure: return "LpFailure";
    }
    return "?";
}

std::vector<double> step_correct(std::span<const double> x1, std::span<const double> d, double eps,
                                 const InputDomain& domain) {
    const std::size_t n = x1.size();
    std::vector<double> x0(x1.begin(), x1.end());
    double dist = 0.0;
    if (domain.l1)
        for (std::size_t i = 0; i < n; ++i) dist += std::abs(x1[i] - domain.l1->anchor[i]);

    for (std::size_t i = 0; i < n; ++i) {
        const double moved = x1[i] + eps * d[i];
        if (moved < domain.box.lo[i] || moved > domain.box.hi[i]) continue;
        if (domain.l1) {
            const double a = domain.l1->anchor[i];
            if (dist - std::abs(x1[i] - a) + std::abs(moved - a) > domain.l1->radius) continue;
        }
        x0[i] = moved;
    }
    if (!domain.l1 || domain.contains(x0)) return x0;

    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = x0[i] - x1[i];
    for (int k = 0; k < 20; ++k) {
        for (double& s : step) s *= 0.5;
        for (std::size_t i = 0; i < n; ++i) x0[i] = x1[i] + step[i];
        if (domain.contains(x0)) return x0;
    }
    return {x1.begin(), x1.end()};
}

WalkResult local_search(const Network& net, const InputDomain& domain, const Objective& obj,
                        std::span<const double> x0, const WalkConfig& cfg) {
    cfg.validate();
    if (!domain.contains(x0, kFeasTol)) throw DomainError("local_search: start point is outside the domain");
    const std::size_t max_iters = cfg.max_iters ? cfg.max_iters : 10 * std::max<std::size_t>(1, net.hidden_neuron_count());
    const std::size_t n0 = net.input_dim();

    WalkResult result;
    std::vector<double> start(x0.begin(), x0.end());
    result.best_x = start;
    result.best_value = objective_value(net, obj, start);

    ActivationPattern prev;
    bool have_prev = false;
    std::size_t iters = 0;
    while (true) {
        if (iters >= max_iters || (cfg.deadline && std::chrono::steady_clock::now() >= *cfg.deadline)) {
            result.termination = WalkTermination::IterCap;
            break;
        }
        const ActivationPattern pattern = activation_pattern(net, start, have_prev ? &prev : nullptr);
        const LpOutcome out = solve_lp(build_region_lp(net, pattern, domain, obj), cfg.lp_limits);
        ++result.lp_solves;
        ++iters;
        if (!out.optimal()) {
            result.termination = WalkTermination::LpFailure;
            break;
        }
        std::vector<double> x1 = domain.clip(std::span<const double>(out.x).first(n0));
        const double f1 = objective_value(net, obj, x1);
        result.trace.push_back({start, x1, f1});

        if (!(f1 > result.best_value + cfg.improve_tol)) {
            if (f1 > result.best_value) {
                result.best_value = f1;
                result.best_x = x1;
            }
            result.termination = WalkTermination::NoImprovement;
            break;
        }
        result.best_value = f1;
        result.best_x = x1;

        std::vector<double> d(n0);
        double step_norm = 0.0;
        for (std::size_t i = 0; i < n0; ++i) {
            d[i] = x1[i] - start[i];
            step_norm = std::max(step_norm, std::abs(cfg.eps * d[i]));
        }
        if (step_norm < cfg.min_step_norm) {
            result.termination = WalkTermination::StepStall;
            break;
        }
        start = step_correct(x1, d, cfg.eps, domain);
        prev = pattern;
        have_prev = true;
        const double fs = objective_value(net, obj, start);
        if (fs > result.best_value) {
            result.best_value = fs;
            result.best_x = start;
        }
    }
    return result;
}

}  // namespace rwalk
