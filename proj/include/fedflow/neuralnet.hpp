#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/datastore.hpp"
#include "fedflow/matrix.hpp"

namespace fedflow::nn {

// Dense autoencoder layout. The encoder runs input -> hidden_dims... ->
// latent, the decoder mirrors it back to the input width. Encoder and
// decoder are each tanh-hidden networks with a linear output layer, so both
// the latent coordinates and the reconstruction are unbounded.
struct ArchitectureSpec {
    std::size_t input_dim = 64;
    std::size_t latent_dim = 8;
    std::vector<std::size_t> hidden_dims = {48};  // encoder side; decoder mirrors

    void validate() const {
        if (latent_dim < 1) throw std::invalid_argument("ArchitectureSpec: latent_dim < 1");
        if (latent_dim >= input_dim)
            throw std::invalid_argument("ArchitectureSpec: latent_dim must be below input_dim");
        for (std::size_t h : hidden_dims)
            if (h == 0) throw std::invalid_argument("ArchitectureSpec: zero-width hidden layer");
    }

    // unit counts of every layer boundary: in, hidden..., latent, hidden reversed..., in
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(input_dim);
        for (std::size_t h : hidden_dims) dims.push_back(h);
        dims.push_back(latent_dim);
        for (auto it = hidden_dims.rbegin(); it != hidden_dims.rend(); ++it) dims.push_back(*it);
        dims.push_back(input_dim);
        return dims;
    }
};

struct LayerShape {
    std::uint32_t in = 0;
    std::uint32_t out = 0;
    bool operator==(const LayerShape&) const = default;
};

inline std::vector<LayerShape> layer_shapes(const ArchitectureSpec& spec) {
    spec.validate();
    const auto dims = spec.layer_dims();
    std::vector<LayerShape> shapes;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        shapes.push_back({static_cast<std::uint32_t>(dims[l]),
                          static_cast<std::uint32_t>(dims[l + 1])});
    return shapes;
}

inline std::size_t param_count(const std::vector<LayerShape>& shapes) {
    std::size_t n = 0;
    for (const auto& s : shapes) n += static_cast<std::size_t>(s.in) * s.out + s.out;
    return n;
}

// Flat parameter vector plus its layer table. Per layer the weights
// (row-major, in x out) come first, then the biases.
struct ModelParams {
    std::vector<double> values;
    std::vector<LayerShape> shapes;

    std::size_t weight_offset(std::size_t layer) const {
        std::size_t off = 0;
        for (std::size_t l = 0; l < layer; ++l)
            off += static_cast<std::size_t>(shapes[l].in) * shapes[l].out + shapes[l].out;
        return off;
    }
    std::size_t bias_offset(std::size_t layer) const {
        return weight_offset(layer) + static_cast<std::size_t>(shapes[layer].in) * shapes[layer].out;
    }
};

// Glorot-uniform weights, zero biases; bit-reproducible for a fixed seed.
inline ModelParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
    ModelParams p;
    p.shapes = layer_shapes(spec);
    p.values.assign(param_count(p.shapes), 0.0);
    Rng rng(splitmix64(seed ^ 0x9e3779b97f4a7c15ULL));
    std::size_t off = 0;
    for (const auto& s : p.shapes) {
        const double bound = std::sqrt(6.0 / (static_cast<double>(s.in) + s.out));
        const std::size_t nw = static_cast<std::size_t>(s.in) * s.out;
        for (std::size_t i = 0; i < nw; ++i) p.values[off + i] = bound * rng.next_symmetric();
        off += nw + s.out;  // biases stay zero
    }
    return p;
}

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> preacts;      // z_l, one per layer
    std::vector<Matrix> activations;  // a_l = act(z_l), one per layer
};

// Activation convention shared by forward/backward and anyone decoding an
// FWTS parameter block: tanh on every layer except the final one and, for
// even layer counts, the middle layer. The middle layer of a mirrored stack
// emits the latent coordinates, which stay linear.
inline bool layer_is_linear(std::size_t layer, std::size_t layer_count) {
    return layer + 1 == layer_count || 2 * (layer + 1) == layer_count;
}

// Batch forward pass. With `cache` set, every pre-activation and activation
// is retained for the matching backward call.
inline Matrix forward(const ModelParams& p, const Matrix& batch, ForwardCache* cache = nullptr) {
    if (p.shapes.empty()) throw std::invalid_argument("forward: empty model");
    if (batch.cols != p.shapes.front().in)
        throw std::invalid_argument("forward: batch width does not match input layer");
    if (cache) {
        cache->input = batch;
        cache->preacts.clear();
        cache->activations.clear();
    }
    Matrix a = batch;
    for (std::size_t l = 0; l < p.shapes.size(); ++l) {
        const LayerShape s = p.shapes[l];
        const double* w = p.values.data() + p.weight_offset(l);
        const double* b = p.values.data() + p.bias_offset(l);
        Matrix z(a.rows, s.out);
        for (std::size_t i = 0; i < a.rows; ++i) {
            double* zrow = z.row(i);
            for (std::size_t j = 0; j < s.out; ++j) zrow[j] = b[j];
            const double* arow = a.row(i);
            for (std::size_t k = 0; k < s.in; ++k) {
                const double aik = arow[k];
                const double* wrow = w + k * s.out;
                for (std::size_t j = 0; j < s.out; ++j) zrow[j] += aik * wrow[j];
            }
        }
        Matrix act = z;
        if (!layer_is_linear(l, p.shapes.size()))
            for (double& v : act.data) v = std::tanh(v);
        if (cache) {
            cache->preacts.push_back(std::move(z));
            cache->activations.push_back(act);
        }
        a = std::move(act);
    }
    return a;
}

// Mean over batch and feature of the squared reconstruction error.
inline double loss_mse(const Matrix& pred, const Matrix& target) {
    return mean_squared_error(pred, target);
}

// Exact gradient of loss_mse(forward(params, input), target) in the flat
// parameter layout. `cache` must come from a forward call on the same params.
inline std::vector<double> backward(const ModelParams& p, const ForwardCache& cache,
                                    const Matrix& target) {
    const std::size_t layers = p.shapes.size();
    if (cache.activations.size() != layers)
        throw std::invalid_argument("backward: cache does not match model depth");
    const Matrix& pred = cache.activations.back();
    if (!pred.same_shape(target)) throw std::invalid_argument("backward: target shape mismatch");

    std::vector<double> grad(p.values.size(), 0.0);
    const double scale = 2.0 / static_cast<double>(pred.rows * pred.cols);
    Matrix delta(pred.rows, pred.cols);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        delta.data[i] = scale * (pred.data[i] - target.data[i]);

    for (std::size_t l = layers; l-- > 0;) {
        const LayerShape s = p.shapes[l];
        const Matrix& a_prev = (l == 0) ? cache.input : cache.activations[l - 1];
        // dW = a_prev^T delta, db = column sums of delta
        double* gw = grad.data() + p.weight_offset(l);
        double* gb = grad.data() + p.bias_offset(l);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* arow = a_prev.row(i);
            const double* drow = delta.row(i);
            for (std::size_t k = 0; k < s.in; ++k) {
                const double aik = arow[k];
                double* gwrow = gw + k * s.out;
                for (std::size_t j = 0; j < s.out; ++j) gwrow[j] += aik * drow[j];
            }
            for (std::size_t j = 0; j < s.out; ++j) gb[j] += drow[j];
        }
        if (l == 0) break;
        // delta_prev = (delta W^T) .* act'(z_{l-1}); tanh' = 1 - a^2
        const double* w = p.values.data() + p.weight_offset(l);
        const Matrix& a_here = cache.activations[l - 1];
        const bool prev_linear = layer_is_linear(l - 1, layers);
        Matrix delta_prev(delta.rows, s.in);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* drow = delta.row(i);
            double* dprow = delta_prev.row(i);
            for (std::size_t k = 0; k < s.in; ++k) {
                const double* wrow = w + k * s.out;
                double acc = 0.0;
                for (std::size_t j = 0; j < s.out; ++j) acc += drow[j] * wrow[j];
                if (prev_linear) {
                    dprow[k] = acc;
                } else {
                    const double a = a_here(i, k);
                    dprow[k] = acc * (1.0 - a * a);
                }
            }
        }
        delta = std::move(delta_prev);
    }
    return grad;
}

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer: " + s);
}

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m;  // first moment, zero-initialized on first use
    std::vector<double> v;  // second moment
    std::uint64_t step_count = 0;

    static OptimizerState sgd(double lr) { return {OptimizerKind::sgd, lr}; }
    static OptimizerState adam(double lr) { return {OptimizerKind::adam, lr}; }
};

inline void optimizer_step(ModelParams& p, const std::vector<double>& grad, OptimizerState& s) {
    if (grad.size() != p.values.size())
        throw std::invalid_argument("optimizer_step: gradient layout mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw std::runtime_error("optimizer_step: non-finite gradient");
    if (s.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < p.values.size(); ++i)
            p.values[i] -= s.learning_rate * grad[i];
        return;
    }
    if (s.m.empty()) {
        s.m.assign(p.values.size(), 0.0);
        s.v.assign(p.values.size(), 0.0);
    }
    if (s.m.size() != p.values.size())
        throw std::invalid_argument("optimizer_step: moment vectors sized for another model");
    ++s.step_count;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double g = grad[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p.values[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

//------------------------------------------------------------------------------
// FWTS checkpoint, little-endian:
//   magic "FWTS" | version u16 = 1 | layer count u16
//   per layer: in u32, out u32
//   all weights and biases as f64 in layer order (weights row-major, then bias)
//   CRC32 (IEEE reflected) over all preceding bytes, u32
//------------------------------------------------------------------------------

inline constexpr char fwts_magic[5] = "FWTS";
inline constexpr std::uint16_t fwts_version = 1;

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t size,
                           std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : (c >> 1);
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = ~seed;
    for (std::size_t i = 0; i < size; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return ~c;
}

inline std::vector<std::uint8_t> serialize_params(const ModelParams& p) {
    if (p.shapes.size() > 0xffff) throw std::invalid_argument("serialize_params: too many layers");
    std::vector<std::uint8_t> out;
    out.insert(out.end(), fwts_magic, fwts_magic + 4);
    data::detail::put_u16(out, fwts_version);
    data::detail::put_u16(out, static_cast<std::uint16_t>(p.shapes.size()));
    auto put_u32 = [&out](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    };
    for (const auto& s : p.shapes) {
        put_u32(s.in);
        put_u32(s.out);
    }
    if (p.values.size() != param_count(p.shapes))
        throw std::invalid_argument("serialize_params: value/shape mismatch");
    for (double v : p.values) data::detail::put_f64(out, v);
    const std::uint32_t crc = crc32(out.data(), out.size());
    put_u32(crc);
    return out;
}

inline ModelParams deserialize_params(const std::uint8_t* data, std::size_t size) {
    if (size < 4 + 2 + 2 + 4) throw format_error("checkpoint too short", 0);
    const std::uint32_t stored =
        static_cast<std::uint32_t>(data[size - 4]) | static_cast<std::uint32_t>(data[size - 3]) << 8 |
        static_cast<std::uint32_t>(data[size - 2]) << 16 |
        static_cast<std::uint32_t>(data[size - 1]) << 24;
    if (crc32(data, size - 4) != stored) throw format_error("checkpoint CRC mismatch", size - 4);
    data::detail::Reader r(data, size - 4);
    r.expect_magic(fwts_magic);
    const std::uint16_t version = r.get_u16();
    if (version != fwts_version)
        throw format_error("unsupported checkpoint version " + std::to_string(version), 4);
    const std::uint16_t layers = r.get_u16();
    ModelParams p;
    auto get_u32 = [&r]() {
        std::uint32_t v = r.get_u16();
        v |= static_cast<std::uint32_t>(r.get_u16()) << 16;
        return v;
    };
    for (std::uint16_t l = 0; l < layers; ++l) {
        LayerShape s;
        s.in = get_u32();
        s.out = get_u32();
        if (s.in == 0 || s.out == 0) throw format_error("zero layer dimension", r.offset() - 8);
        p.shapes.push_back(s);
    }
    p.values.resize(param_count(p.shapes));
    for (double& v : p.values) v = r.get_f64();
    r.done();
    return p;
}

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
    data::detail::write_file(path, serialize_params(p));
}

inline ModelParams load_checkpoint(const std::string& path) {
    const auto bytes = data::detail::read_file(path);
    return deserialize_params(bytes.data(), bytes.size());
}

}  // namespace fedflow::nn
