#include "rwalk/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <omp.h>

#include "json.hpp"

namespace rwalk {

using nlohmann::json;

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Network::Network(std::size_t input_dim, std::vector<Layer> layers, std::optional<Box> input_box)
    : input_dim_(input_dim), layers_(std::move(layers)), input_box_(std::move(input_box)) {
    if (input_dim_ == 0) throw NetworkError("network: input_dim must be positive");
    if (layers_.size() < 2)
        throw NetworkError("network: need at least one hidden layer and an output layer");
    std::size_t prev = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const std::string where = "layer " + std::to_string(l);
        if (layer.out_dim() == 0) throw NetworkError(where + ": no neurons");
        if (layer.in_dim() != prev)
            throw NetworkError(where + ": expects " + std::to_string(layer.in_dim()) +
                               " inputs but previous layer has " + std::to_string(prev));
        if (layer.bias.size() != layer.out_dim())
            throw NetworkError(where + ": bias length " + std::to_string(layer.bias.size()) +
                               " != row count " + std::to_string(layer.out_dim()));
        const bool last = l + 1 == layers_.size();
        if (last && layer.relu) throw NetworkError(where + ": output layer must not apply relu");
        if (!last && !layer.relu) throw NetworkError(where + ": hidden layer must apply relu");
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            for (double w : layer.weights.row(r))
                if (!std::isfinite(w))
                    throw NetworkError(where + ", row " + std::to_string(r) + ": non-finite weight");
            if (!std::isfinite(layer.bias[r]))
                throw NetworkError(where + ", row " + std::to_string(r) + ": non-finite bias");
        }
        prev = layer.out_dim();
    }
    if (input_box_) {
        if (input_box_->lo.size() != input_dim_ || input_box_->hi.size() != input_dim_)
            throw NetworkError("network: input box dimension mismatch");
        for (std::size_t i = 0; i < input_dim_; ++i)
            if (!(input_box_->lo[i] <= input_box_->hi[i]))
                throw NetworkError("network: input box has lo > hi at coordinate " +
                                   std::to_string(i));
    }
}

std::size_t Network::hidden_neuron_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < hidden_layer_count(); ++l) n += hidden_width(l);
    return n;
}

ActivationPattern::ActivationPattern(const Network& net) {
    active_.resize(net.hidden_layer_count());
    for (std::size_t l = 0; l < active_.size(); ++l) active_[l].assign(net.hidden_width(l), false);
}

std::size_t ActivationPattern::active_count(std::size_t l) const {
    return static_cast<std::size_t>(std::count(active_[l].begin(), active_[l].end(), true));
}

bool ActivationPattern::matches(const Network& net) const {
    if (active_.size() != net.hidden_layer_count()) return false;
    for (std::size_t l = 0; l < active_.size(); ++l)
        if (active_[l].size() != net.hidden_width(l)) return false;
    return true;
}

std::vector<double> AffineMap::apply(std::span<const double> x) const {
    std::vector<double> y(t);
    for (std::size_t r = 0; r < T.rows(); ++r) {
        auto row = T.row(r);
        for (std::size_t c = 0; c < T.cols(); ++c) y[r] += row[c] * x[c];
    }
    return y;
}

// --- serialization ---------------------------------------------------------

namespace {

std::vector<double> read_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw NetworkError(where + ": expected an array");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) {
        if (!e.is_number()) throw NetworkError(where + ": expected numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

Network from_json(const json& doc) {
    if (!doc.is_object()) throw NetworkError("network document: expected an object");
    if (!doc.contains("input_dim") || !doc["input_dim"].is_number_unsigned())
        throw NetworkError("network document: missing or invalid input_dim");
    if (!doc.contains("layers") || !doc["layers"].is_array())
        throw NetworkError("network document: missing layers array");
    const auto input_dim = doc["input_dim"].get<std::size_t>();

    std::vector<Layer> layers;
    std::size_t prev = input_dim;
    for (std::size_t l = 0; l < doc["layers"].size(); ++l) {
        const json& jl = doc["layers"][l];
        const std::string where = "layer " + std::to_string(l);
        if (!jl.is_object() || !jl.contains("weights") || !jl.contains("bias"))
            throw NetworkError(where + ": needs weights and bias");
        const json& jw = jl["weights"];
        if (!jw.is_array() || jw.empty()) throw NetworkError(where + ": weights must be a non-empty matrix");
        const std::size_t rows = jw.size();
        const std::size_t cols = jw[0].is_array() ? jw[0].size() : 0;
        if (cols != prev)
            throw NetworkError(where + ": expects " + std::to_string(cols) +
                               " inputs but previous layer has " + std::to_string(prev));
        Layer layer;
        layer.weights = Matrix(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = read_vector(jw[r], where + ", row " + std::to_string(r));
            if (row.size() != cols)
                throw NetworkError(where + ", row " + std::to_string(r) + ": ragged weight row");
            std::copy(row.begin(), row.end(), layer.weights.row(r).begin());
        }
        layer.bias = read_vector(jl["bias"], where + " bias");
        layer.relu = jl.value("relu", l + 1 < doc["layers"].size());
        prev = rows;
        layers.push_back(std::move(layer));
    }

    std::optional<Box> box;
    if (doc.contains("input_lo") || doc.contains("input_hi")) {
        if (!doc.contains("input_lo") || !doc.contains("input_hi"))
            throw NetworkError("network document: input_lo and input_hi must appear together");
        box = Box{read_vector(doc["input_lo"], "input_lo"), read_vector(doc["input_hi"], "input_hi")};
    }
    return Network(input_dim, std::move(layers), std::move(box));
}

}  // namespace

Network parse_network(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw NetworkError(std::string("network document: ") + e.what());
    }
    return from_json(doc);
}

Network load_network(std::istream& in) {
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NetworkError("cannot open network file " + path);
    return load_network(in);
}

std::string save_network(const Network& net) {
    json doc;
    doc["input_dim"] = net.input_dim();
    json layers = json::array();
    for (const Layer& layer : net.layers()) {
        json w = json::array();
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            auto row = layer.weights.row(r);
            w.push_back(std::vector<double>(row.begin(), row.end()));
        }
        layers.push_back({{"weights", w}, {"bias", layer.bias}, {"relu", layer.relu}});
    }
    doc["layers"] = layers;
    if (net.input_box()) {
        doc["input_lo"] = net.input_box()->lo;
        doc["input_hi"] = net.input_box()->hi;
    }
    return doc.dump(1);
}

void save_network_file(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw NetworkError("cannot write network file " + path);
    out << save_network(net) << '\n';
}

// --- evaluation ------------------------------------------------------------

namespace {

void affine(const Layer& layer, std::span<const double> in, std::vector<double>& out) {
    out.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        auto row = layer.weights.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * in[c];
        out[r] += s;
    }
}

void check_input(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw NetworkError("input has " + std::to_string(x.size()) + " entries, network expects " +
                           std::to_string(net.input_dim()));
}

}  // namespace

LayerTrace forward(const Network& net, std::span<const double> x) {
    check_input(net, x);
    LayerTrace trace;
    const auto& layers = net.layers();
    trace.pre.resize(layers.size());
    trace.post.resize(layers.size());
    std::span<const double> in = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        affine(layers[l], in, trace.pre[l]);
        trace.post[l] = trace.pre[l];
        if (layers[l].relu)
            for (double& v : trace.post[l]) v = std::max(0.0, v);
        in = trace.post[l];
    }
    trace.output = trace.post.back();
    return trace;
}

std::vector<double> evaluate(const Network& net, std::span<const double> x) {
    check_input(net, x);
    std::vector<double> a(x.begin(), x.end()), b;
    for (const Layer& layer : net.layers()) {
        affine(layer, a, b);
        if (layer.relu)
            for (double& v : b) v = std::max(0.0, v);
        std::swap(a, b);
    }
    return a;
}

Matrix forward_batch_serial(const Network& net, const Matrix& xs) {
    if (xs.cols() != net.input_dim()) throw NetworkError("forward_batch: input width mismatch");
    Matrix out(xs.rows(), net.output_dim());
    for (std::size_t r = 0; r < xs.rows(); ++r) {
        auto y = evaluate(net, xs.row(r));
        std::copy(y.begin(), y.end(), out.row(r).begin());
    }
    return out;
}

Matrix forward_batch(const Network& net, const Matrix& xs) {
    if (xs.cols() != net.input_dim()) throw NetworkError("forward_batch: input width mismatch");
    Matrix out(xs.rows(), net.output_dim());
    const auto n = static_cast<std::int64_t>(xs.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
        auto y = evaluate(net, xs.row(static_cast<std::size_t>(r)));
        std::copy(y.begin(), y.end(), out.row(static_cast<std::size_t>(r)).begin());
    }
    return out;
}

ActivationPattern activation_pattern(const LayerTrace& trace, const ActivationPattern* prev) {
    const std::size_t hidden = trace.pre.size() - 1;
    std::vector<std::vector<bool>> active(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
        active[l].resize(trace.pre[l].size());
        for (std::size_t i = 0; i < active[l].size(); ++i) {
            const double g = trace.pre[l][i];
            if (std::abs(g) <= kTieTolerance)
                active[l][i] = prev != nullptr && prev->active(l, i);
            else
                active[l][i] = g > 0.0;
        }
    }
    return ActivationPattern(std::move(active));
}

ActivationPattern activation_pattern(const Network& net, std::span<const double> x,
                                     const ActivationPattern* prev) {
    if (prev != nullptr && !prev->matches(net))
        throw NetworkError("activation_pattern: previous pattern does not match network");
    return activation_pattern(forward(net, x), prev);
}

// --- region maps -----------------------------------------------------------

std::vector<AffineMap> region_layer_maps(const Network& net, const ActivationPattern& pattern) {
    if (!pattern.matches(net)) throw NetworkError("region map: pattern does not match network");
    const std::size_t n0 = net.input_dim();
    // Post-activation map of the previous layer, starting from the identity on x.
    Matrix P = Matrix::identity(n0);
    std::vector<double> p(n0, 0.0);
    std::vector<AffineMap> maps;
    maps.reserve(net.layers().size());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const Layer& layer = net.layers()[l];
        AffineMap g{Matrix(layer.out_dim(), n0), layer.bias};
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            auto w = layer.weights.row(r);
            auto out = g.T.row(r);
            for (std::size_t k = 0; k < w.size(); ++k) {
                if (w[k] == 0.0) continue;
                auto prow = P.row(k);
                for (std::size_t c = 0; c < n0; ++c) out[c] += w[k] * prow[c];
                g.t[r] += w[k] * p[k];
            }
        }
        if (layer.relu) {
            P = g.T;
            p = g.t;
            for (std::size_t r = 0; r < layer.out_dim(); ++r) {
                if (pattern.active(l, r)) continue;
                std::fill(P.row(r).begin(), P.row(r).end(), 0.0);
                p[r] = 0.0;
            }
        }
        maps.push_back(std::move(g));
    }
    return maps;
}

AffineMap region_affine_map(const Network& net, const ActivationPattern& pattern) {
    return std::move(region_layer_maps(net, pattern).back());
}

// --- bounds ----------------------------------------------------------------

NeuronBounds layer_bounds(const Network& net, const Box& box) {
    if (box.dim() != net.input_dim() || box.hi.size() != net.input_dim())
        throw NetworkError("layer_bounds: box dimension mismatch");
    for (std::size_t i = 0; i < box.dim(); ++i)
        if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]))
            throw NetworkError("layer_bounds: coordinate " + std::to_string(i) + " is unbounded");

    NeuronBounds bounds;
    std::vector<double> lo = box.lo, hi = box.hi;
    for (std::size_t l = 0; l < net.hidden_layer_count(); ++l) {
        const Layer& layer = net.hidden(l);
        std::vector<double> glo(layer.out_dim()), ghi(layer.out_dim());
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            auto w = layer.weights.row(r);
            double a = layer.bias[r], b = layer.bias[r];
            for (std::size_t c = 0; c < w.size(); ++c) {
                const double u = w[c] * lo[c], v = w[c] * hi[c];
                a += std::min(u, v);
                b += std::max(u, v);
            }
            glo[r] = a;
            ghi[r] = b;
        }
        lo.resize(glo.size());
        hi.resize(ghi.size());
        for (std::size_t r = 0; r < glo.size(); ++r) {
            lo[r] = std::max(0.0, glo[r]);
            hi[r] = std::max(0.0, ghi[r]);
        }
        bounds.lb.push_back(std::move(glo));
        bounds.ub.push_back(std::move(ghi));
    }
    return bounds;
}

// --- random networks -------------------------------------------------------

Network random_network(const RandomNetworkSpec& spec) {
    if (spec.input_dim == 0 || spec.depth == 0 || spec.width == 0 || spec.output_dim == 0)
        throw NetworkError("random_network: dimensions must be positive");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Layer> layers;
    std::size_t prev = spec.input_dim;
    for (std::size_t l = 0; l <= spec.depth; ++l) {
        const bool last = l == spec.depth;
        const std::size_t rows = last ? spec.output_dim : spec.width;
        const double scale = std::sqrt(6.0 / static_cast<double>(prev));
        Layer layer{Matrix(rows, prev), std::vector<double>(rows), !last};
        for (std::size_t r = 0; r < rows; ++r)
            for (double& w : layer.weights.row(r)) w = scale * unit(rng);
        for (double& b : layer.bias) b = unit(rng);
        layers.push_back(std::move(layer));
        prev = rows;
    }
    return Network(spec.input_dim, std::move(layers));
}

}  // namespace rwalk
