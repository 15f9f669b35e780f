#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwalk {

/// Thrown for malformed networks, documents, and shape mismatches.
class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Layer {
    Matrix weights;             // n_l x n_{l-1}
    std::vector<double> bias;   // n_l
    bool relu = true;

    std::size_t out_dim() const { return weights.rows(); }
    std::size_t in_dim() const { return weights.cols(); }

    bool operator==(const Layer&) const = default;
};

/// Per-coordinate box [lo, hi].
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }
    bool operator==(const Box&) const = default;
};

/// Feed-forward ReLU network. Every layer but the last applies ReLU; the last
/// is a plain affine output layer. Immutable once constructed.
class Network {
public:
    Network(std::size_t input_dim, std::vector<Layer> layers,
            std::optional<Box> input_box = std::nullopt);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return layers_.back().out_dim(); }

    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t hidden_layer_count() const { return layers_.size() - 1; }
    const Layer& hidden(std::size_t l) const { return layers_[l]; }
    const Layer& output_layer() const { return layers_.back(); }
    std::size_t hidden_width(std::size_t l) const { return layers_[l].out_dim(); }
    std::size_t hidden_neuron_count() const;

    /// Optional input domain recorded with the network (e.g. pixel range).
    const std::optional<Box>& input_box() const { return input_box_; }

    bool operator==(const Network&) const = default;

private:
    std::size_t input_dim_;
    std::vector<Layer> layers_;
    std::optional<Box> input_box_;
};

/// Pre- and post-activation values of every layer. `pre` and `post` include
/// the output layer, whose post-activation equals its pre-activation.
struct LayerTrace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
    std::vector<double> output;
};

/// Active-neuron sets of the hidden layers; identifies a linear region.
class ActivationPattern {
public:
    ActivationPattern() = default;
    explicit ActivationPattern(const Network& net);
    explicit ActivationPattern(std::vector<std::vector<bool>> active)
        : active_(std::move(active)) {}

    std::size_t layer_count() const { return active_.size(); }
    std::size_t width(std::size_t l) const { return active_[l].size(); }
    bool active(std::size_t l, std::size_t i) const { return active_[l][i]; }
    void set(std::size_t l, std::size_t i, bool on) { active_[l][i] = on; }
    std::size_t active_count(std::size_t l) const;

    bool matches(const Network& net) const;

    bool operator==(const ActivationPattern&) const = default;

private:
    std::vector<std::vector<bool>> active_;
};

/// Output of the network restricted to one linear region: y = T x + t.
struct AffineMap {
    Matrix T;
    std::vector<double> t;

    std::vector<double> apply(std::span<const double> x) const;
};

/// Interval bounds [lb, ub] on every hidden pre-activation.
struct NeuronBounds {
    std::vector<std::vector<double>> lb;
    std::vector<std::vector<double>> ub;

    bool stably_active(std::size_t l, std::size_t i) const { return lb[l][i] >= 0.0; }
    bool stably_inactive(std::size_t l, std::size_t i) const { return ub[l][i] <= 0.0; }
};

struct RandomNetworkSpec {
    std::size_t input_dim = 0;
    std::size_t depth = 0;
    std::size_t width = 0;
    std::uint64_t seed = 0;
    std::size_t output_dim = 1;
};

/// Absolute tolerance under which a pre-activation counts as zero.
inline constexpr double kTieTolerance = 1e-9;

Network load_network(std::istream& in);
Network load_network_file(const std::string& path);
Network parse_network(const std::string& text);
std::string save_network(const Network& net);
void save_network_file(const Network& net, const std::string& path);

LayerTrace forward(const Network& net, std::span<const double> x);

/// Network output only; cheaper than `forward` when the trace is not needed.
std::vector<double> evaluate(const Network& net, std::span<const double> x);

/// Outputs for many inputs (row i of `xs` is one input). Parallel over rows.
Matrix forward_batch(const Network& net, const Matrix& xs);
/// Serial reference for `forward_batch`.
Matrix forward_batch_serial(const Network& net, const Matrix& xs);

/// i is active in layer l iff g^l_i > 0. Pre-activations within
/// kTieTolerance of zero take their state from `prev` when given, else
/// count as inactive.
ActivationPattern activation_pattern(const Network& net, std::span<const double> x,
                                     const ActivationPattern* prev = nullptr);
ActivationPattern activation_pattern(const LayerTrace& trace,
                                     const ActivationPattern* prev = nullptr);

/// Affine maps of the masked hidden pre-activations g^l = A^l x + a^l,
/// for l = 0..L-1 (hidden layers) followed by the output layer.
std::vector<AffineMap> region_layer_maps(const Network& net, const ActivationPattern& pattern);

AffineMap region_affine_map(const Network& net, const ActivationPattern& pattern);

/// Interval propagation of the box through the hidden layers.
NeuronBounds layer_bounds(const Network& net, const Box& box);

Network random_network(const RandomNetworkSpec& spec);

}  // namespace rwalk
