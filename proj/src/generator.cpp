#include "rwalk/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>

#include <omp.h>

namespace rwalk {

void GenConfig::validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("generator: delta must be positive");
    if (time_limit_s && !(*time_limit_s > 0.0)) throw std::invalid_argument("generator: time limit must be positive");
    if (!time_limit_s && !outer_iterations)
        throw std::invalid_argument("generator: set a time limit or an outer-iteration budget");
}

std::string to_string(GenTermination t) {
    switch (t) {
    case GenTermination::Budget: return "Budget";
    case GenTermination::RelaxationFallback: return "RelaxationFallback";
    }
    return "?";
}

std::vector<double> chi_scores(const ActivationPattern& pattern, std::span<const double> zbar, std::size_t layer,
                               std::span<const std::size_t> candidates) {
    std::vector<double> chi;
    chi.reserve(candidates.size());
    for (std::size_t i : candidates) chi.push_back(pattern.active(layer, i) ? 1.0 - zbar[i] : zbar[i]);
    return chi;
}

std::size_t pick_neuron(std::span<const double> chi, double delta, std::mt19937_64& rng) {
    if (chi.empty()) throw std::invalid_argument("pick_neuron: no candidates");
    if (!(delta > 0.0)) throw std::invalid_argument("pick_neuron: delta must be positive");
    if (chi.size() == 1) return 0;
    std::vector<double> w(chi.size());
    // LP noise can leave z a hair outside [0, 1].
    for (std::size_t i = 0; i < chi.size(); ++i) w[i] = std::max(0.0, chi[i]) + delta;
    std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
    return dist(rng);
}

namespace {

class Budget {
public:
    explicit Budget(const GenConfig& cfg) : cfg_(cfg), start_(std::chrono::steady_clock::now()) {}

    std::optional<std::chrono::steady_clock::time_point> deadline() const {
        if (!timed()) return std::nullopt;
        return start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(*cfg_.time_limit_s));
    }

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    bool timed() const { return !cfg_.outer_iterations.has_value(); }
    bool time_up() const { return timed() && elapsed() >= *cfg_.time_limit_s; }
    bool exhausted(std::size_t outer_done) const {
        if (cfg_.outer_iterations) return outer_done >= *cfg_.outer_iterations;
        return time_up();
    }

private:
    const GenConfig& cfg_;
    std::chrono::steady_clock::time_point start_;
};

std::vector<double> sample_domain(const InputDomain& domain, std::mt19937_64& rng) {
    std::vector<double> x(domain.dim());
    const Box box = domain.enclosing_box();
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::uniform_real_distribution<double>(box.lo[i], box.hi[i])(rng);
        if (domain.contains(x)) return x;
    }
    return domain.clip(x);
}

}  // namespace

GeneratorResult run_generator(const Network& net, const InputDomain& domain, const Objective& obj,
                              const GenConfig& gen_cfg, const WalkConfig& walk_cfg,
                              const IncumbentCallback& on_incumbent) {
    gen_cfg.validate();
    walk_cfg.validate();
    domain.validate();
    Budget budget(gen_cfg);
    std::mt19937_64 rng(gen_cfg.seed);
    GeneratorResult result;

    WalkConfig walk = walk_cfg;
    if (!walk.deadline) walk.deadline = budget.deadline();

    auto walk_from = [&](std::span<const double> start, Provenance prov) {
        const auto x0 = domain.clip(start);
        const WalkResult w = local_search(net, domain, obj, x0, walk);
        ++result.local_searches;
        if (w.best_value > result.incumbent.value) {
            prov.walk_iterations = w.trace.size();
            result.incumbent = Incumbent{w.best_x, w.best_value, prov, budget.elapsed()};
            if (on_incumbent) on_incumbent(result.incumbent);
        }
    };

    RelaxationModel lr = build_relaxation(net, domain, obj, layer_bounds(net, domain.enclosing_box()));
    const LpOutcome root = lr.solve(walk_cfg.lp_limits);
    ++result.lr_solves;
    if (root.status == LpStatus::Infeasible) throw DomainError("generator: relaxation is infeasible");

    if (!root.optimal()) {
        result.termination = GenTermination::RelaxationFallback;
        while (!budget.exhausted(result.outer_iterations)) {
            Provenance prov;
            prov.outer = static_cast<long>(result.outer_iterations);
            prov.random_start = true;
            walk_from(sample_domain(domain, rng), prov);
            ++result.outer_iterations;
        }
        return result;
    }

    const RelaxedSolution tilde = lr.extract(root);
    result.relaxation_value = tilde.value;
    walk_from(tilde.x, Provenance{});

    std::vector<std::vector<std::size_t>> candidates(lr.layer_count());
    bool any_unstable = false;
    for (const NeuronRef& n : lr.unstable_neurons()) {
        candidates[n.layer].push_back(n.index);
        any_unstable = true;
    }
    if (!any_unstable && budget.timed()) return result;

    while (!budget.exhausted(result.outer_iterations)) {
        RelaxedSolution bar = tilde;
        std::size_t flips = 0;
        bool stop = false;
        for (std::size_t l = 0; l < lr.layer_count() && !stop; ++l) {
            std::vector<std::size_t> open = candidates[l];
            while (!open.empty()) {
                if (budget.time_up()) {
                    stop = true;
                    break;
                }
                const ActivationPattern pattern = activation_pattern(net, bar.x);
                const auto chi = chi_scores(pattern, bar.z[l], l, open);
                const std::size_t pos = pick_neuron(chi, gen_cfg.delta, rng);
                const std::size_t k = open[pos];
                open.erase(open.begin() + static_cast<std::ptrdiff_t>(pos));

                lr.fix_activation(l, k, pattern.active(l, k) ? 0 : 1);
                const LpOutcome out = lr.solve(walk_cfg.lp_limits);
                ++result.lr_solves;
                if (out.optimal()) {
                    bar = lr.extract(out);
                    ++flips;
                    Provenance prov;
                    prov.outer = static_cast<long>(result.outer_iterations);
                    prov.layer = static_cast<long>(l);
                    prov.flips = flips;
                    walk_from(bar.x, prov);
                } else {
                    lr.unfix_activation(l, k);
                    ++result.infeasible_flips;
                }
            }
        }
        lr.clear_all_fixings();
        if (stop) break;
        ++result.outer_iterations;
    }
    return result;
}

bool IncumbentReducer::offer(const Incumbent& candidate, const IncumbentCallback& on_improve) {
    std::lock_guard lock(mutex_);
    if (!candidate.valid() || (best_.valid() && !(candidate.value > best_.value))) return false;
    best_ = candidate;
    if (on_improve) on_improve(best_);
    return true;
}

Incumbent IncumbentReducer::best() const {
    std::lock_guard lock(mutex_);
    return best_;
}

GeneratorResult run_portfolio(const Network& net, const InputDomain& domain, const Objective& obj,
                              const GenConfig& gen_cfg, std::size_t runs, const WalkConfig& walk_cfg,
                              const IncumbentCallback& on_incumbent) {
    if (runs == 0) throw std::invalid_argument("run_portfolio: need at least one run");
    std::vector<GeneratorResult> results(runs);
    std::vector<std::exception_ptr> errors(runs);
    IncumbentReducer live;
    const auto n = static_cast<std::int64_t>(runs);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t r = 0; r < n; ++r) {
        GenConfig cfg = gen_cfg;
        cfg.seed = gen_cfg.seed + static_cast<std::uint64_t>(r);
        try {
            results[static_cast<std::size_t>(r)] = run_generator(
                net, domain, obj, cfg, walk_cfg, [&](const Incumbent& inc) { live.offer(inc, on_incumbent); });
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    GeneratorResult total;
    IncumbentReducer ordered;
    for (const GeneratorResult& r : results) {
        ordered.offer(r.incumbent);
        total.local_searches += r.local_searches;
        total.outer_iterations += r.outer_iterations;
        total.lr_solves += r.lr_solves;
        total.infeasible_flips += r.infeasible_flips;
        if (r.termination == GenTermination::RelaxationFallback) total.termination = r.termination;
        total.relaxation_value = r.relaxation_value;
    }
    total.incumbent = ordered.best();
    return total;
}

}  // namespace rwalk
