#include "rwalk/exact.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>

#include <omp.h>

namespace rwalk {

std::string to_string(Proof p) {
    switch (p) {
    case Proof::EnumerationComplete: return "EnumerationComplete";
    case Proof::BnBComplete: return "BnBComplete";
    case Proof::TimeLimit: return "TimeLimit";
    }
    return "?";
}

ActivationPattern gray_pattern(const Network& net, std::size_t k) {
    const std::size_t code = k ^ (k >> 1);
    ActivationPattern p(net);
    std::size_t bit = 0;
    for (std::size_t l = 0; l < p.layer_count(); ++l)
        for (std::size_t i = 0; i < p.width(l); ++i, ++bit)
            if (bit < 64 && ((code >> bit) & 1U)) p.set(l, i, true);
    return p;
}

namespace {

struct ChunkBest {
    double value = -kInf;
    std::vector<double> x;
    std::size_t feasible = 0;
    std::size_t visited = 0;
    bool lp_failure = false;
};

using Clock = std::chrono::steady_clock;

std::optional<Clock::time_point> deadline_after(std::optional<double> seconds) {
    if (!seconds) return std::nullopt;
    return Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*seconds));
}

std::size_t pattern_total(const Network& net) {
    const std::size_t n = net.hidden_neuron_count();
    return n >= 63 ? std::numeric_limits<std::size_t>::max() : (std::size_t{1} << n);
}

void visit_range(const Network& net, const InputDomain& domain, const Objective& obj, std::size_t begin,
                 std::size_t end, ChunkBest& best, const std::optional<Clock::time_point>& deadline) {
    for (std::size_t k = begin; k < end; ++k) {
        if (deadline && Clock::now() >= *deadline) return;
        ++best.visited;
        const LpOutcome out = solve_lp(build_region_lp(net, gray_pattern(net, k), domain, obj),
                                       LpLimits{0, PivotKernel::Serial});
        if (out.status == LpStatus::Infeasible) continue;
        if (!out.optimal()) {
            best.lp_failure = true;
            continue;
        }
        ++best.feasible;
        const auto x = domain.clip(std::span<const double>(out.x).first(net.input_dim()));
        const double v = objective_value(net, obj, x);
        if (v > best.value) {
            best.value = v;
            best.x = x;
        }
    }
}

ExactResult finish(const Network& net, const ChunkBest& best) {
    const std::size_t visited = best.visited;
    ExactResult r;
    r.value = best.value;
    r.x = best.x;
    r.count = visited;
    r.feasible_regions = best.feasible;
    const bool complete = visited == pattern_total(net) && !best.lp_failure;
    r.proof = complete ? Proof::EnumerationComplete : Proof::TimeLimit;
    r.bound = complete ? r.value : kInf;
    return r;
}

void merge(ChunkBest& into, const ChunkBest& from) {
    into.feasible += from.feasible;
    into.visited += from.visited;
    into.lp_failure = into.lp_failure || from.lp_failure;
    if (from.value > into.value) {
        into.value = from.value;
        into.x = from.x;
    }
}

}  // namespace

ExactResult enumerate_regions_optimize_serial(const Network& net, const InputDomain& domain, const Objective& obj,
                                              std::size_t max_patterns, std::optional<double> time_limit_s) {
    domain.validate();
    const auto deadline = deadline_after(time_limit_s);
    const std::size_t visit = std::min(pattern_total(net), max_patterns);
    ChunkBest best;
    visit_range(net, domain, obj, 0, visit, best, deadline);
    return finish(net, best);
}

ExactResult enumerate_regions_optimize(const Network& net, const InputDomain& domain, const Objective& obj,
                                       std::size_t max_patterns, std::optional<double> time_limit_s) {
    domain.validate();
    const auto deadline = deadline_after(time_limit_s);
    const std::size_t visit = std::min(pattern_total(net), max_patterns);
    constexpr std::size_t kChunk = 64;
    const std::size_t chunks = (visit + kChunk - 1) / kChunk;
    std::vector<ChunkBest> partial(chunks);
    const auto nchunks = static_cast<std::int64_t>(chunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        const auto begin = static_cast<std::size_t>(c) * kChunk;
        visit_range(net, domain, obj, begin, std::min(visit, begin + kChunk), partial[static_cast<std::size_t>(c)],
                    deadline);
    }
    ChunkBest best;
    for (const ChunkBest& p : partial) merge(best, p);
    return finish(net, best);
}

// --- branch and bound ------------------------------------------------------

namespace {

struct NodeFix {
    std::size_t layer, index;
    int state;
};

struct Node {
    std::vector<NodeFix> fixes;
    double bound;
    std::size_t id;
};

constexpr double kPruneTol = 1e-7;
constexpr double kIntegralTol = 1e-6;

}  // namespace

ExactResult branch_and_bound(const Network& net, const InputDomain& domain, const Objective& obj,
                             const NeuronBounds& bounds, const BnbLimits& limits) {
    domain.validate();
    const auto start = std::chrono::steady_clock::now();
    MilpModel milp = build_milp(net, domain, obj, bounds);
    RelaxationModel& lr = milp.relaxation;

    ExactResult result;
    std::vector<Node> open{{{}, kInf, 0}};
    std::size_t next_id = 1;
    bool incomplete = false;
    bool have_incumbent = false;
    bool lp_failed = false;

    while (!open.empty()) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (result.count >= limits.max_nodes || (limits.time_limit_s && elapsed >= *limits.time_limit_s)) {
            incomplete = true;
            break;
        }
        std::size_t pick = open.size() - 1;
        if (have_incumbent) {
            for (std::size_t i = 0; i < open.size(); ++i) {
                if (open[i].bound > open[pick].bound ||
                    (open[i].bound == open[pick].bound && open[i].id < open[pick].id))
                    pick = i;
            }
        }
        Node node = std::move(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        if (node.bound <= result.value + kPruneTol) continue;

        lr.clear_all_fixings();
        for (const NodeFix& f : node.fixes) lr.fix_activation(f.layer, f.index, f.state);
        const LpOutcome out = lr.solve(limits.lp_limits);
        ++result.count;
        if (node.id == 0) result.root_bound = out.optimal() ? out.objective : (out.status == LpStatus::Infeasible ? -kInf : kInf);
        if (out.status == LpStatus::Infeasible) continue;
        if (!out.optimal()) {
            incomplete = true;
            lp_failed = true;
            continue;
        }
        if (out.objective <= result.value + kPruneTol) continue;

        const RelaxedSolution sol = lr.extract(out);
        const auto x = domain.clip(sol.x);
        const double fx = objective_value(net, obj, x);
        if (fx > result.value) {
            result.value = fx;
            result.x = x;
            have_incumbent = true;
        }

        // Most fractional unfixed binary; ties keep the first in layer-then-index order.
        const NeuronRef* branch = nullptr;
        double best_frac = kIntegralTol;
        for (const NeuronRef& n : milp.integer_neurons) {
            const double z = sol.z[n.layer][n.index];
            const double frac = std::min(z, 1.0 - z);
            if (frac > best_frac) {
                best_frac = frac;
                branch = &n;
            }
        }
        if (branch == nullptr) continue;

        const double z = sol.z[branch->layer][branch->index];
        const int preferred = z >= 0.5 ? 1 : 0;
        for (int state : {1 - preferred, preferred}) {
            Node child{node.fixes, out.objective, next_id++};
            child.fixes.push_back({branch->layer, branch->index, state});
            open.push_back(std::move(child));
        }
    }
    lr.clear_all_fixings();

    if (incomplete) {
        result.proof = Proof::TimeLimit;
        result.bound = result.value;
        for (const Node& n : open) result.bound = std::max(result.bound, n.bound);
        if (lp_failed) result.bound = kInf;
    } else {
        result.proof = Proof::BnBComplete;
        result.bound = result.value;
    }
    return result;
}

}  // namespace rwalk
