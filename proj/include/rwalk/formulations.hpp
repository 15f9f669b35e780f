#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rwalk/linprog.hpp"
#include "rwalk/network.hpp"

namespace rwalk {

/// Empty or malformed input domain.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct L1Ball {
    std::vector<double> anchor;
    double radius = 0.0;
};

/// Input polytope: a finite box, optionally intersected with an L1 ball.
/// The ball is closed (|x - anchor|_1 <= radius).
struct InputDomain {
    Box box;
    std::optional<L1Ball> l1;

    static InputDomain uniform_box(std::size_t dim, double lo, double hi);

    std::size_t dim() const { return box.dim(); }

    /// Throws DomainError if bounds are inverted or non-finite, or the
    /// ball misses the box.
    void validate() const;

    /// Box enclosing the domain; used for interval bounds.
    Box enclosing_box() const;

    bool contains(std::span<const double> x, double tol = 0.0) const;

    /// A point of the domain closest to `x` along the segment towards a
    /// known interior-or-boundary point.
    std::vector<double> clip(std::span<const double> x) const;

    /// Point of the box nearest the anchor in L1; lies in the domain.
    std::vector<double> anchor_point() const;
};

struct Objective {
    std::vector<double> c;

    double operator()(std::span<const double> output) const;
};

/// Objective c.f(x) evaluated by a forward pass.
double objective_value(const Network& net, const Objective& obj, std::span<const double> x);

/// Columns of the domain encoding inside an LpModel.
struct DomainColumns {
    std::size_t x_first = 0;
    std::vector<std::size_t> aux;  // |x_i - anchor_i| epigraph variables
};

/// Box becomes bounds on columns [x_first, x_first + dim); an L1 ball adds
/// u_i >= x_i - a_i, u_i >= a_i - x_i and sum u_i <= radius.
DomainColumns encode_domain(const InputDomain& domain, LpModel& model, std::size_t x_first);

/// LP over x restricted to the closure of the linear region of `pattern`.
/// Columns 0..n0-1 are the inputs; the objective is c.(T x + t).
LpModel build_region_lp(const Network& net, const ActivationPattern& pattern,
                        const InputDomain& domain, const Objective& obj);

struct NeuronRef {
    std::size_t layer;
    std::size_t index;

    bool operator==(const NeuronRef&) const = default;
};

struct Fixing {
    NeuronRef neuron;
    int state;
    double saved_lo;
    double saved_hi;
};

struct RelaxedSolution {
    std::vector<double> x;
    std::vector<std::vector<double>> z;
    double value = 0.0;
};

/// Big-M linear relaxation of the network MILP with a stack of activation
/// fixings on the relaxed binaries.
class RelaxationModel {
public:
    RelaxationModel(const Network& net, const InputDomain& domain, const Objective& obj,
                    const NeuronBounds& bounds);

    const LpModel& lp() const { return model_; }

    std::size_t x_col(std::size_t i) const { return domain_cols_.x_first + i; }
    std::size_t g_col(std::size_t l, std::size_t i) const { return neuron_first_[l] + 3 * i; }
    std::size_t h_col(std::size_t l, std::size_t i) const { return g_col(l, i) + 1; }
    std::size_t z_col(std::size_t l, std::size_t i) const { return g_col(l, i) + 2; }
    std::size_t y_col(std::size_t k) const { return y_first_ + k; }

    const DomainColumns& domain_columns() const { return domain_cols_; }
    const std::vector<double>& anchor() const { return anchor_; }

    std::size_t layer_count() const { return widths_.size(); }
    std::size_t width(std::size_t l) const { return widths_[l]; }
    std::size_t input_dim() const { return input_dim_; }

    bool stable(std::size_t l, std::size_t i) const { return stable_[l][i]; }
    std::vector<NeuronRef> unstable_neurons() const;

    void fix_activation(std::size_t l, std::size_t i, int state);
    void unfix_activation(std::size_t l, std::size_t i);
    void clear_all_fixings();
    bool is_fixed(std::size_t l, std::size_t i) const;
    const std::vector<Fixing>& fixings() const { return fixings_; }

    LpOutcome solve(const LpLimits& limits = {}) const { return solve_lp(model_, limits); }
    RelaxedSolution extract(const LpOutcome& outcome) const;

private:
    void check_neuron(std::size_t l, std::size_t i) const;

    LpModel model_;
    DomainColumns domain_cols_;
    std::vector<double> anchor_;
    std::size_t input_dim_ = 0;
    std::vector<std::size_t> widths_;
    std::vector<std::size_t> neuron_first_;
    std::size_t y_first_ = 0;
    std::vector<std::vector<bool>> stable_;
    std::vector<Fixing> fixings_;
};

RelaxationModel build_relaxation(const Network& net, const InputDomain& domain, const Objective& obj,
                                 const NeuronBounds& bounds);

/// The relaxation plus the z columns that must be integral.
struct MilpModel {
    RelaxationModel relaxation;
    std::vector<NeuronRef> integer_neurons;
};

MilpModel build_milp(const Network& net, const InputDomain& domain, const Objective& obj,
                     const NeuronBounds& bounds);

/// Full MILP assignment (x, g, h, z, y) induced by a forward pass at x.
std::vector<double> milp_assignment(const RelaxationModel& model, const Network& net,
                                    std::span<const double> x);

}  // namespace rwalk
