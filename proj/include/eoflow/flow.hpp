#ifndef EOFLOW_FLOW_HPP
#define EOFLOW_FLOW_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "eoflow/autodiff.hpp"
#include "eoflow/tensor.hpp"

namespace eoflow::flow {

enum class LayerKind : uint8_t {
    fixed_orthogonal = 0,  // constant mixing matrix from a seeded QR
    coupling = 1,          // affine coupling with an MLP conditioner
    householder = 2,       // learnable rotation as a product of reflections
    affine = 3,            // learnable full affine map (PCA / linear-flow wrap)
};

const char* layer_kind_name(LayerKind kind);

struct LayerDesc {
    LayerKind kind = LayerKind::fixed_orthogonal;
    // coupling geometry: first d1 coordinates condition the remaining d2
    int64_t d1 = 0;
    int64_t d2 = 0;
    int32_t depth = 0;  // number of hidden MLP layers
    int32_t width = 0;
    double clamp = 0.0;
    std::vector<int32_t> param_ids;  // indices into the model parameter store
    Tensor fixed_q;                  // fixed_orthogonal payload
};

struct ModelConfig {
    int64_t dim = 2;
    int32_t n_blocks = 1;
    int32_t mlp_width = 32;
    int32_t mlp_depth = 2;
    double clamp = 2.0;  // scale logits pass through c*tanh(s/c)
    uint64_t seed = 0;
    bool learnable_rotation = true;
    bool fixed_mixing = true;
};

template <class V>
struct FlowOut {
    V value;
    V logdet;
};

// Invertible encoder/decoder stack with shared parameters. Layers are stored
// in encode order (x -> z); decoding applies their inverses in reverse.
// A built model is immutable during evaluation and safe to share across
// threads; parameter updates require exclusive access.
class FlowModel {
  public:
    FlowModel() = default;
    FlowModel(int64_t dim, uint64_t seed, std::vector<LayerDesc> layers,
              std::vector<Tensor> params);

    int64_t dim() const { return dim_; }
    uint64_t seed() const { return seed_; }
    const std::vector<LayerDesc>& layers() const { return layers_; }
    std::vector<Tensor>& parameters() { return params_; }
    const std::vector<Tensor>& parameters() const { return params_; }
    int64_t parameter_count() const;

    // Insert all parameters into a tape, as differentiable leaves when
    // trainable, otherwise as constants. Order matches parameters().
    std::vector<ad::Var> bind_params(ad::Tape& tape, bool trainable) const;

    template <class V>
    FlowOut<V> encode_traced(ad::Tape& tape, const std::vector<ad::Var>& params, V x) const;

    template <class V>
    FlowOut<V> decode_traced(ad::Tape& tape, const std::vector<ad::Var>& params, V z) const;

    struct Mapped {
        Tensor value;
        double logdet;
    };
    Mapped encode(const Tensor& x) const;  // z = f(x), log|df/dx|
    Mapped decode(const Tensor& z) const;  // x = g(z), log|dg/dz|

    // Column i of the decoder Jacobian via one forward-mode pass (0-based i).
    Tensor decoder_jacobian_column(const Tensor& z, int64_t i) const;

    // Full D x D decoder Jacobian, one jvp per column. Intended for small D;
    // warns above D = 256.
    Tensor decoder_jacobian_dense(const Tensor& z) const;

  private:
    template <class V>
    FlowOut<V> apply_layer(ad::Tape& tape, const LayerDesc& layer,
                           const std::vector<ad::Var>& params, V x, bool inverse,
                           size_t layer_index) const;

    int64_t dim_ = 0;
    uint64_t seed_ = 0;
    std::vector<LayerDesc> layers_;
    std::vector<Tensor> params_;
};

// Coupling + mixing stack per the standard recipe: n_blocks x (fixed
// orthogonal mixing, affine coupling), then one learnable rotation.
// Couplings start at identity (zeroed final conditioner layer).
FlowModel build_model(const ModelConfig& config);

// Single learnable affine layer g(z) = A z + b, A initialised near identity.
FlowModel build_affine_model(int64_t dim, uint64_t seed);

// Single affine layer with the given parameters (e.g. a fitted linear flow).
FlowModel make_affine_model(Tensor A, Tensor b);

void save_checkpoint(const FlowModel& model, const std::string& path);
FlowModel load_checkpoint(const std::string& path);

// --- template implementations --------------------------------------------

namespace detail {

template <class V>
void check_layer_finite(const V& v, size_t layer_index, LayerKind kind);

template <>
inline void check_layer_finite<ad::Var>(const ad::Var& v, size_t layer_index, LayerKind kind) {
    if (!v.value().all_finite()) {
        throw numeric_error("non-finite output in layer " + std::to_string(layer_index) + " (" +
                            layer_kind_name(kind) + ")");
    }
}

template <>
inline void check_layer_finite<ad::DualVar>(const ad::DualVar& v, size_t layer_index,
                                            LayerKind kind) {
    check_layer_finite<ad::Var>(v.primal, layer_index, kind);
}

// Householder reflection x - 2 v (v.x)/(v.v).
template <class V>
V reflect(V x, ad::Var v) {
    V t = ad::dot(V(v), x);
    ad::Var s = ad::squared_norm(v);
    V coef = ad::scale(ad::div(t, V(s)), 2.0);
    return ad::sub(x, ad::mul(coef, V(v)));
}

// Conditioner MLP: returns clamped scale logits and shifts.
template <class V>
std::pair<V, V> coupling_conditioner(const LayerDesc& layer, const std::vector<ad::Var>& params,
                                     V u1) {
    V h = u1;
    size_t p = 0;
    for (int32_t i = 0; i < layer.depth; ++i) {
        ad::Var w = params[static_cast<size_t>(layer.param_ids[p])];
        ad::Var b = params[static_cast<size_t>(layer.param_ids[p + 1])];
        h = ad::tanh(ad::add(ad::matmul(V(w), h), V(b)));
        p += 2;
    }
    ad::Var w_out = params[static_cast<size_t>(layer.param_ids[p])];
    ad::Var b_out = params[static_cast<size_t>(layer.param_ids[p + 1])];
    V out = ad::add(ad::matmul(V(w_out), h), V(b_out));
    V s = ad::slice(out, 0, layer.d2);
    V t = ad::slice(out, layer.d2, 2 * layer.d2);
    V s_clamped = ad::scale(ad::tanh(ad::scale(s, 1.0 / layer.clamp)), layer.clamp);
    return {s_clamped, t};
}

}  // namespace detail

template <class V>
FlowOut<V> FlowModel::apply_layer(ad::Tape& tape, const LayerDesc& layer,
                                  const std::vector<ad::Var>& params, V x, bool inverse,
                                  size_t layer_index) const {
    V zero_ld(tape.constant(Tensor::scalar(0.0)));
    FlowOut<V> out{x, zero_ld};
    switch (layer.kind) {
        case LayerKind::fixed_orthogonal: {
            ad::Var q = tape.constant(layer.fixed_q);
            if (inverse) q = ad::transpose(q);
            out.value = ad::matmul(V(q), x);
            break;
        }
        case LayerKind::householder: {
            V cur = x;
            int64_t n = static_cast<int64_t>(layer.param_ids.size());
            if (!inverse) {
                for (int64_t k = 0; k < n; ++k)
                    cur = detail::reflect(cur, params[static_cast<size_t>(layer.param_ids[k])]);
            } else {
                for (int64_t k = n - 1; k >= 0; --k)
                    cur = detail::reflect(cur, params[static_cast<size_t>(layer.param_ids[k])]);
            }
            out.value = cur;
            break;
        }
        case LayerKind::coupling: {
            V u1 = ad::slice(x, 0, layer.d1);
            V u2 = ad::slice(x, layer.d1, layer.d1 + layer.d2);
            auto [s, t] = detail::coupling_conditioner(layer, params, u1);
            if (!inverse) {
                V v2 = ad::add(ad::mul(u2, ad::exp(s)), t);
                out.value = ad::concat(u1, v2);
                out.logdet = ad::sum(s);
            } else {
                V v2 = ad::mul(ad::sub(u2, t), ad::exp(ad::neg(s)));
                out.value = ad::concat(u1, v2);
                out.logdet = ad::neg(ad::sum(s));
            }
            break;
        }
        case LayerKind::affine: {
            ad::Var A = params[static_cast<size_t>(layer.param_ids[0])];
            ad::Var b = params[static_cast<size_t>(layer.param_ids[1])];
            if (!inverse) {
                // encode: z = A^-1 (x - b)
                out.value = ad::matmul(V(ad::matinv(A)), ad::sub(x, V(b)));
                out.logdet = V(ad::neg(ad::logabsdet(A)));
            } else {
                out.value = ad::add(ad::matmul(V(A), x), V(b));
                out.logdet = V(ad::logabsdet(A));
            }
            break;
        }
    }
    detail::check_layer_finite(out.value, layer_index, layer.kind);
    return out;
}

template <class V>
FlowOut<V> FlowModel::encode_traced(ad::Tape& tape, const std::vector<ad::Var>& params,
                                    V x) const {
    if (x.value().size() != dim_) {
        throw shape_error("encode: input shape " + x.value().shape_str() + " does not match D=" +
                          std::to_string(dim_));
    }
    V cur = x;
    V logdet(tape.constant(Tensor::scalar(0.0)));
    for (size_t i = 0; i < layers_.size(); ++i) {
        FlowOut<V> step = apply_layer(tape, layers_[i], params, cur, /*inverse=*/false, i);
        cur = step.value;
        logdet = ad::add(logdet, step.logdet);
    }
    return {cur, logdet};
}

template <class V>
FlowOut<V> FlowModel::decode_traced(ad::Tape& tape, const std::vector<ad::Var>& params,
                                    V z) const {
    if (z.value().size() != dim_) {
        throw shape_error("decode: input shape " + z.value().shape_str() + " does not match D=" +
                          std::to_string(dim_));
    }
    V cur = z;
    V logdet(tape.constant(Tensor::scalar(0.0)));
    for (size_t i = layers_.size(); i-- > 0;) {
        FlowOut<V> step = apply_layer(tape, layers_[i], params, cur, /*inverse=*/true, i);
        cur = step.value;
        logdet = ad::add(logdet, step.logdet);
    }
    return {cur, logdet};
}

}  // namespace eoflow::flow

#endif
