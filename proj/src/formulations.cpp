#include "rwalk/formulations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rwalk {

// --- domain ----------------------------------------------------------------

InputDomain InputDomain::uniform_box(std::size_t dim, double lo, double hi) {
    return InputDomain{Box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)}, std::nullopt};
}

void InputDomain::validate() const {
    if (box.lo.size() != box.hi.size() || box.lo.empty())
        throw DomainError("domain: box bounds have mismatched or zero length");
    for (std::size_t i = 0; i < box.dim(); ++i) {
        if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]))
            throw DomainError("domain: coordinate " + std::to_string(i) + " is not finite");
        if (box.lo[i] > box.hi[i])
            throw DomainError("domain: lo > hi at coordinate " + std::to_string(i));
    }
    if (!l1) return;
    if (l1->anchor.size() != box.dim()) throw DomainError("domain: anchor dimension mismatch");
    if (!std::isfinite(l1->radius) || l1->radius < 0.0) throw DomainError("domain: radius must be >= 0");
    for (double a : l1->anchor)
        if (!std::isfinite(a)) throw DomainError("domain: anchor is not finite");
    const auto p = anchor_point();
    double dist = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dist += std::abs(p[i] - l1->anchor[i]);
    if (dist > l1->radius) throw DomainError("domain: L1 ball does not meet the box");
}

Box InputDomain::enclosing_box() const {
    Box b = box;
    if (l1) {
        for (std::size_t i = 0; i < b.dim(); ++i) {
            b.lo[i] = std::max(b.lo[i], l1->anchor[i] - l1->radius);
            b.hi[i] = std::min(b.hi[i], l1->anchor[i] + l1->radius);
        }
    }
    return b;
}

std::vector<double> InputDomain::anchor_point() const {
    if (!l1) {
        std::vector<double> mid(dim());
        for (std::size_t i = 0; i < dim(); ++i) mid[i] = 0.5 * (box.lo[i] + box.hi[i]);
        return mid;
    }
    std::vector<double> p(dim());
    for (std::size_t i = 0; i < dim(); ++i) p[i] = std::clamp(l1->anchor[i], box.lo[i], box.hi[i]);
    return p;
}

bool InputDomain::contains(std::span<const double> x, double tol) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
        if (x[i] < box.lo[i] - tol || x[i] > box.hi[i] + tol) return false;
    if (l1) {
        double d = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) d += std::abs(x[i] - l1->anchor[i]);
        if (d > l1->radius + tol) return false;
    }
    return true;
}

std::vector<double> InputDomain::clip(std::span<const double> x) const {
    std::vector<double> p(x.begin(), x.end());
    for (std::size_t i = 0; i < dim(); ++i) p[i] = std::clamp(p[i], box.lo[i], box.hi[i]);
    if (!l1 || contains(p)) return p;
    // Bisect on the segment from the anchor point (feasible) to p.
    const auto q = anchor_point();
    double in = 0.0, out = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (in + out);
        std::vector<double> m(dim());
        for (std::size_t i = 0; i < dim(); ++i) m[i] = q[i] + mid * (p[i] - q[i]);
        (contains(m) ? in : out) = mid;
    }
    for (std::size_t i = 0; i < dim(); ++i) p[i] = q[i] + in * (p[i] - q[i]);
    return p;
}

double Objective::operator()(std::span<const double> output) const {
    if (output.size() != c.size()) throw NetworkError("objective: dimension mismatch with network output");
    double v = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * output[k];
    return v;
}

double objective_value(const Network& net, const Objective& obj, std::span<const double> x) {
    return obj(evaluate(net, x));
}

DomainColumns encode_domain(const InputDomain& domain, LpModel& model, std::size_t x_first) {
    domain.validate();
    DomainColumns cols{x_first, {}};
    for (std::size_t i = 0; i < domain.dim(); ++i) {
        model.lower[x_first + i] = domain.box.lo[i];
        model.upper[x_first + i] = domain.box.hi[i];
    }
    if (!domain.l1) return cols;
    const L1Ball& ball = *domain.l1;
    std::vector<Term> budget;
    for (std::size_t i = 0; i < domain.dim(); ++i) {
        const std::size_t u = model.add_variable(0.0, kInf);
        cols.aux.push_back(u);
        // u - x >= -a  and  u + x >= a
        model.add_row({{u, 1.0}, {x_first + i, -1.0}}, Sense::GreaterEqual, -ball.anchor[i]);
        model.add_row({{u, 1.0}, {x_first + i, 1.0}}, Sense::GreaterEqual, ball.anchor[i]);
        budget.push_back({u, 1.0});
    }
    model.add_row(std::move(budget), Sense::LessEqual, ball.radius);
    return cols;
}

// --- region LP -------------------------------------------------------------

namespace {

void check_shapes(const Network& net, const InputDomain& domain, const Objective& obj) {
    if (domain.dim() != net.input_dim())
        throw DomainError("domain dimension " + std::to_string(domain.dim()) + " != network input " +
                          std::to_string(net.input_dim()));
    if (obj.c.size() != net.output_dim())
        throw NetworkError("objective has " + std::to_string(obj.c.size()) + " entries, network output " +
                           std::to_string(net.output_dim()));
}

}  // namespace

LpModel build_region_lp(const Network& net, const ActivationPattern& pattern, const InputDomain& domain,
                        const Objective& obj) {
    check_shapes(net, domain, obj);
    const auto maps = region_layer_maps(net, pattern);
    const std::size_t n0 = net.input_dim();

    LpModel lp(n0, -kInf, kInf);
    encode_domain(domain, lp, 0);

    for (std::size_t l = 0; l < net.hidden_layer_count(); ++l) {
        const AffineMap& g = maps[l];
        for (std::size_t i = 0; i < g.T.rows(); ++i) {
            std::vector<Term> terms;
            auto row = g.T.row(i);
            for (std::size_t c = 0; c < n0; ++c)
                if (row[c] != 0.0) terms.push_back({c, row[c]});
            lp.add_row(std::move(terms), pattern.active(l, i) ? Sense::GreaterEqual : Sense::LessEqual,
                       -g.t[i]);
        }
    }
    const AffineMap& out = maps.back();
    for (std::size_t k = 0; k < out.T.rows(); ++k) {
        auto row = out.T.row(k);
        for (std::size_t c = 0; c < n0; ++c) lp.objective[c] += obj.c[k] * row[c];
        lp.objective_offset += obj.c[k] * out.t[k];
    }
    return lp;
}

// --- relaxation ------------------------------------------------------------

RelaxationModel::RelaxationModel(const Network& net, const InputDomain& domain, const Objective& obj,
                                 const NeuronBounds& bounds)
    : input_dim_(net.input_dim()) {
    check_shapes(net, domain, obj);
    const std::size_t L = net.hidden_layer_count();
    if (bounds.lb.size() != L || bounds.ub.size() != L)
        throw NetworkError("relaxation: bounds do not match network depth");
    for (std::size_t l = 0; l < L; ++l) {
        if (bounds.lb[l].size() != net.hidden_width(l) || bounds.ub[l].size() != net.hidden_width(l))
            throw NetworkError("relaxation: bounds do not match width of layer " + std::to_string(l));
        for (std::size_t i = 0; i < net.hidden_width(l); ++i) {
            const double lb = bounds.lb[l][i], ub = bounds.ub[l][i];
            if (!std::isfinite(lb) || !std::isfinite(ub) || lb > ub)
                throw NetworkError("relaxation: unsound bounds at layer " + std::to_string(l) + ", neuron " +
                                   std::to_string(i));
        }
    }

    model_ = LpModel(input_dim_, -kInf, kInf);
    domain_cols_ = encode_domain(domain, model_, 0);
    if (domain.l1) anchor_ = domain.l1->anchor;

    std::vector<std::size_t> prev_h(input_dim_);
    std::iota(prev_h.begin(), prev_h.end(), domain_cols_.x_first);

    for (std::size_t l = 0; l < L; ++l) {
        const Layer& layer = net.hidden(l);
        widths_.push_back(layer.out_dim());
        neuron_first_.push_back(model_.var_count());
        stable_.emplace_back(layer.out_dim(), false);
        std::vector<std::size_t> h_cols;
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            const double lb = bounds.lb[l][i], ub = bounds.ub[l][i];
            const std::size_t g = model_.add_variable(-kInf, kInf);
            const std::size_t h = model_.add_variable(0.0, kInf);
            const std::size_t z = model_.add_variable(0.0, 1.0);
            h_cols.push_back(h);

            std::vector<Term> def{{g, 1.0}};
            auto w = layer.weights.row(i);
            for (std::size_t k = 0; k < w.size(); ++k)
                if (w[k] != 0.0) def.push_back({prev_h[k], -w[k]});
            model_.add_row(std::move(def), Sense::Equal, layer.bias[i]);
            // h >= g;  h <= g - lb (1 - z);  h <= ub z
            model_.add_row({{h, 1.0}, {g, -1.0}}, Sense::GreaterEqual, 0.0);
            model_.add_row({{h, 1.0}, {g, -1.0}, {z, -lb}}, Sense::LessEqual, -lb);
            model_.add_row({{h, 1.0}, {z, -ub}}, Sense::LessEqual, 0.0);

            if (ub <= 0.0) {
                model_.lower[z] = model_.upper[z] = 0.0;
                model_.upper[h] = 0.0;
                stable_[l][i] = true;
            } else if (lb >= 0.0) {
                model_.lower[z] = model_.upper[z] = 1.0;
                stable_[l][i] = true;
            }
        }
        prev_h = std::move(h_cols);
    }

    const Layer& out = net.output_layer();
    y_first_ = model_.var_count();
    for (std::size_t k = 0; k < out.out_dim(); ++k) {
        const std::size_t y = model_.add_variable(-kInf, kInf, obj.c[k]);
        std::vector<Term> def{{y, 1.0}};
        auto w = out.weights.row(k);
        for (std::size_t j = 0; j < w.size(); ++j)
            if (w[j] != 0.0) def.push_back({prev_h[j], -w[j]});
        model_.add_row(std::move(def), Sense::Equal, out.bias[k]);
    }
}

void RelaxationModel::check_neuron(std::size_t l, std::size_t i) const {
    if (l >= widths_.size() || i >= widths_[l])
        throw NetworkError("relaxation: no neuron " + std::to_string(i) + " in layer " + std::to_string(l));
}

std::vector<NeuronRef> RelaxationModel::unstable_neurons() const {
    std::vector<NeuronRef> out;
    for (std::size_t l = 0; l < widths_.size(); ++l)
        for (std::size_t i = 0; i < widths_[l]; ++i)
            if (!stable_[l][i]) out.push_back({l, i});
    return out;
}

bool RelaxationModel::is_fixed(std::size_t l, std::size_t i) const {
    return std::any_of(fixings_.begin(), fixings_.end(),
                       [&](const Fixing& f) { return f.neuron == NeuronRef{l, i}; });
}

void RelaxationModel::fix_activation(std::size_t l, std::size_t i, int state) {
    check_neuron(l, i);
    if (state != 0 && state != 1) throw NetworkError("relaxation: activation state must be 0 or 1");
    if (is_fixed(l, i))
        throw NetworkError("relaxation: neuron " + std::to_string(i) + " in layer " + std::to_string(l) +
                           " is already fixed");
    const std::size_t z = z_col(l, i);
    fixings_.push_back({{l, i}, state, model_.lower[z], model_.upper[z]});
    model_.lower[z] = model_.upper[z] = static_cast<double>(state);
}

void RelaxationModel::unfix_activation(std::size_t l, std::size_t i) {
    check_neuron(l, i);
    auto it = std::find_if(fixings_.begin(), fixings_.end(),
                           [&](const Fixing& f) { return f.neuron == NeuronRef{l, i}; });
    if (it == fixings_.end())
        throw NetworkError("relaxation: neuron " + std::to_string(i) + " in layer " + std::to_string(l) +
                           " is not fixed");
    const std::size_t z = z_col(l, i);
    model_.lower[z] = it->saved_lo;
    model_.upper[z] = it->saved_hi;
    fixings_.erase(it);
}

void RelaxationModel::clear_all_fixings() {
    while (!fixings_.empty()) {
        const Fixing& f = fixings_.back();
        const std::size_t z = z_col(f.neuron.layer, f.neuron.index);
        model_.lower[z] = f.saved_lo;
        model_.upper[z] = f.saved_hi;
        fixings_.pop_back();
    }
}

RelaxedSolution RelaxationModel::extract(const LpOutcome& outcome) const {
    if (!outcome.optimal()) throw LpError("relaxation: cannot extract a non-optimal outcome");
    RelaxedSolution sol;
    sol.value = outcome.objective;
    sol.x.resize(input_dim_);
    for (std::size_t i = 0; i < input_dim_; ++i) sol.x[i] = outcome.x[x_col(i)];
    sol.z.resize(widths_.size());
    for (std::size_t l = 0; l < widths_.size(); ++l) {
        sol.z[l].resize(widths_[l]);
        for (std::size_t i = 0; i < widths_[l]; ++i) sol.z[l][i] = outcome.x[z_col(l, i)];
    }
    return sol;
}

RelaxationModel build_relaxation(const Network& net, const InputDomain& domain, const Objective& obj,
                                 const NeuronBounds& bounds) {
    return RelaxationModel(net, domain, obj, bounds);
}

MilpModel build_milp(const Network& net, const InputDomain& domain, const Objective& obj,
                     const NeuronBounds& bounds) {
    RelaxationModel relax(net, domain, obj, bounds);
    auto ints = relax.unstable_neurons();
    return MilpModel{std::move(relax), std::move(ints)};
}

std::vector<double> milp_assignment(const RelaxationModel& model, const Network& net, std::span<const double> x) {
    const LayerTrace trace = forward(net, x);
    const LpModel& lp = model.lp();
    std::vector<double> v(lp.var_count(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) v[model.x_col(i)] = x[i];
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        for (std::size_t i = 0; i < model.width(l); ++i) {
            v[model.g_col(l, i)] = trace.pre[l][i];
            v[model.h_col(l, i)] = trace.post[l][i];
            v[model.z_col(l, i)] = trace.pre[l][i] > 0.0 ? 1.0 : 0.0;
        }
    }
    for (std::size_t k = 0; k < trace.output.size(); ++k) v[model.y_col(k)] = trace.output[k];
    const auto& aux = model.domain_columns().aux;
    for (std::size_t i = 0; i < aux.size(); ++i) v[aux[i]] = std::abs(x[i] - model.anchor()[i]);
    return v;
}

}  // namespace rwalk
