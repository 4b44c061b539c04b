#include "eoflow/flow.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <random>

#include "eoflow/binio.hpp"
#include "eoflow/linalg.hpp"

namespace eoflow::flow {

namespace {

using binio::get_f64;
using binio::get_tensor_payload;
using binio::get_u32;
using binio::get_u64;
using binio::put_f64;
using binio::put_tensor_payload;
using binio::put_u32;
using binio::put_u64;
using linalg::random_orthogonal;

Tensor gaussian_tensor(std::vector<int64_t> shape, std::mt19937_64& rng, double scl) {
    return linalg::gaussian(std::move(shape), rng, scl);
}

constexpr char kMagic[4] = {'E', 'O', 'F', 'L'};
constexpr uint32_t kVersion = 1;
constexpr const char* kCkpt = "checkpoint";

}  // namespace

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::fixed_orthogonal: return "fixed_orthogonal";
        case LayerKind::coupling: return "coupling";
        case LayerKind::householder: return "householder";
        case LayerKind::affine: return "affine";
    }
    return "?";
}

FlowModel::FlowModel(int64_t dim, uint64_t seed, std::vector<LayerDesc> layers,
                     std::vector<Tensor> params)
    : dim_(dim), seed_(seed), layers_(std::move(layers)), params_(std::move(params)) {}

int64_t FlowModel::parameter_count() const {
    int64_t n = 0;
    for (const Tensor& p : params_) n += p.size();
    return n;
}

std::vector<ad::Var> FlowModel::bind_params(ad::Tape& tape, bool trainable) const {
    std::vector<ad::Var> vars;
    vars.reserve(params_.size());
    for (const Tensor& p : params_) {
        vars.push_back(trainable ? tape.input(p) : tape.constant(p));
    }
    return vars;
}

FlowModel::Mapped FlowModel::encode(const Tensor& x) const {
    if (!x.all_finite()) throw numeric_error("encode: non-finite input");
    ad::Tape tape;
    auto params = bind_params(tape, false);
    auto out = encode_traced<ad::Var>(tape, params, tape.constant(x));
    return {out.value.value(), out.logdet.value()[0]};
}

FlowModel::Mapped FlowModel::decode(const Tensor& z) const {
    if (!z.all_finite()) throw numeric_error("decode: non-finite input");
    ad::Tape tape;
    auto params = bind_params(tape, false);
    auto out = decode_traced<ad::Var>(tape, params, tape.constant(z));
    return {out.value.value(), out.logdet.value()[0]};
}

Tensor FlowModel::decoder_jacobian_column(const Tensor& z, int64_t i) const {
    if (i < 0 || i >= dim_) {
        throw config_error("decoder_jacobian_column: index " + std::to_string(i) +
                           " out of range for D=" + std::to_string(dim_));
    }
    ad::Tape tape;
    auto params = bind_params(tape, false);
    Tensor e = Tensor::zeros({dim_});
    e[i] = 1.0;
    ad::DualVar zv(tape.constant(z), tape.constant(e));
    auto out = decode_traced<ad::DualVar>(tape, params, zv);
    return out.value.tangent ? out.value.tangent->value() : Tensor::zeros({dim_});
}

Tensor FlowModel::decoder_jacobian_dense(const Tensor& z) const {
    if (dim_ > 256) {
        std::cerr << "eoflow: dense Jacobian requested for D=" << dim_
                  << "; this costs D jvp passes\n";
    }
    Tensor jac = Tensor::zeros({dim_, dim_});
    for (int64_t i = 0; i < dim_; ++i) {
        Tensor col = decoder_jacobian_column(z, i);
        for (int64_t r = 0; r < dim_; ++r) jac.at(r, i) = col[r];
    }
    return jac;
}

FlowModel build_model(const ModelConfig& config) {
    if (config.dim < 2) {
        throw config_error("build_model: D must be >= 2 (coupling needs a split), got " +
                           std::to_string(config.dim));
    }
    if (config.n_blocks < 1) throw config_error("build_model: n_blocks must be >= 1");
    if (config.mlp_depth < 1) throw config_error("build_model: mlp_depth must be >= 1");
    if (config.mlp_width < 1) throw config_error("build_model: mlp_width must be >= 1");
    if (config.clamp <= 0) throw config_error("build_model: clamp must be positive");

    std::mt19937_64 rng(config.seed);
    std::vector<LayerDesc> layers;
    std::vector<Tensor> params;
    int64_t dim = config.dim;
    int64_t d1 = dim / 2;
    int64_t d2 = dim - d1;

    auto push_param = [&](Tensor t) {
        params.push_back(std::move(t));
        return static_cast<int32_t>(params.size() - 1);
    };

    for (int32_t blk = 0; blk < config.n_blocks; ++blk) {
        if (config.fixed_mixing) {
            LayerDesc mix;
            mix.kind = LayerKind::fixed_orthogonal;
            mix.fixed_q = random_orthogonal(dim, rng);
            layers.push_back(std::move(mix));
        }
        LayerDesc cpl;
        cpl.kind = LayerKind::coupling;
        cpl.d1 = d1;
        cpl.d2 = d2;
        cpl.depth = config.mlp_depth;
        cpl.width = config.mlp_width;
        cpl.clamp = config.clamp;
        int64_t in_dim = d1;
        for (int32_t h = 0; h < config.mlp_depth; ++h) {
            double scl = 1.0 / std::sqrt(static_cast<double>(in_dim));
            cpl.param_ids.push_back(push_param(gaussian_tensor({config.mlp_width, in_dim}, rng, scl)));
            cpl.param_ids.push_back(push_param(Tensor::zeros({config.mlp_width})));
            in_dim = config.mlp_width;
        }
        // zeroed output layer: couplings start exactly at identity
        cpl.param_ids.push_back(push_param(Tensor::zeros({2 * d2, in_dim})));
        cpl.param_ids.push_back(push_param(Tensor::zeros({2 * d2})));
        layers.push_back(std::move(cpl));
    }

    if (config.learnable_rotation) {
        LayerDesc rot;
        rot.kind = LayerKind::householder;
        for (int64_t k = 0; k < dim; ++k) {
            Tensor v = gaussian_tensor({dim}, rng, 1.0);
            double norm = 0.0;
            for (int64_t i = 0; i < dim; ++i) norm += v[i] * v[i];
            norm = std::sqrt(norm);
            if (norm < 1e-12) {
                v = Tensor::zeros({dim});
                v[k] = 1.0;
                norm = 1.0;
            }
            for (int64_t i = 0; i < dim; ++i) v[i] /= norm;
            rot.param_ids.push_back(push_param(std::move(v)));
        }
        layers.push_back(std::move(rot));
    }

    return FlowModel(dim, config.seed, std::move(layers), std::move(params));
}

FlowModel build_affine_model(int64_t dim, uint64_t seed) {
    if (dim < 1) throw config_error("build_affine_model: D must be >= 1");
    std::mt19937_64 rng(seed);
    Tensor A = Tensor::identity(dim);
    Tensor noise = gaussian_tensor({dim, dim}, rng, 0.1 / std::sqrt(static_cast<double>(dim)));
    for (int64_t i = 0; i < A.size(); ++i) A[i] += noise[i];
    return make_affine_model(std::move(A), Tensor::zeros({dim}));
}

FlowModel make_affine_model(Tensor A, Tensor b) {
    if (A.rank() != 2 || A.rows() != A.cols()) {
        throw config_error("make_affine_model: A must be square, got " + A.shape_str());
    }
    if (b.rank() != 1 || b.extent(0) != A.rows()) {
        throw config_error("make_affine_model: b shape " + b.shape_str() + " does not match A");
    }
    int64_t dim = A.rows();
    LayerDesc layer;
    layer.kind = LayerKind::affine;
    layer.param_ids = {0, 1};
    std::vector<Tensor> params;
    params.push_back(std::move(A));
    params.push_back(std::move(b));
    return FlowModel(dim, 0, {std::move(layer)}, std::move(params));
}

void save_checkpoint(const FlowModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, model.seed());
    put_u32(out, static_cast<uint32_t>(model.dim()));
    put_u32(out, static_cast<uint32_t>(model.layers().size()));
    const auto& params = model.parameters();
    for (const LayerDesc& layer : model.layers()) {
        out.put(static_cast<char>(layer.kind));
        switch (layer.kind) {
            case LayerKind::fixed_orthogonal:
                put_tensor_payload(out, layer.fixed_q);
                break;
            case LayerKind::coupling:
                put_u32(out, static_cast<uint32_t>(layer.d1));
                put_u32(out, static_cast<uint32_t>(layer.d2));
                put_u32(out, static_cast<uint32_t>(layer.depth));
                put_u32(out, static_cast<uint32_t>(layer.width));
                put_f64(out, layer.clamp);
                for (int32_t id : layer.param_ids)
                    put_tensor_payload(out, params[static_cast<size_t>(id)]);
                break;
            case LayerKind::householder:
                put_u32(out, static_cast<uint32_t>(layer.param_ids.size()));
                for (int32_t id : layer.param_ids)
                    put_tensor_payload(out, params[static_cast<size_t>(id)]);
                break;
            case LayerKind::affine:
                for (int32_t id : layer.param_ids)
                    put_tensor_payload(out, params[static_cast<size_t>(id)]);
                break;
        }
    }
    if (!out) throw data_error("checkpoint: write failed for '" + path + "'");
}

FlowModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw data_error("checkpoint: bad magic in '" + path + "'");
    }
    uint32_t version = get_u32(in, kCkpt);
    if (version != kVersion) {
        throw data_error("checkpoint: unsupported version " + std::to_string(version));
    }
    uint64_t seed = get_u64(in, kCkpt);
    int64_t dim = static_cast<int64_t>(get_u32(in, kCkpt));
    uint32_t n_layers = get_u32(in, kCkpt);

    std::vector<LayerDesc> layers;
    std::vector<Tensor> params;
    auto push_param = [&](Tensor t) {
        params.push_back(std::move(t));
        return static_cast<int32_t>(params.size() - 1);
    };

    for (uint32_t li = 0; li < n_layers; ++li) {
        int kind_byte = in.get();
        if (kind_byte == EOF) throw data_error("checkpoint: truncated file");
        LayerDesc layer;
        layer.kind = static_cast<LayerKind>(kind_byte);
        switch (layer.kind) {
            case LayerKind::fixed_orthogonal:
                layer.fixed_q = get_tensor_payload(in, {dim, dim}, kCkpt);
                break;
            case LayerKind::coupling: {
                layer.d1 = static_cast<int64_t>(get_u32(in, kCkpt));
                layer.d2 = static_cast<int64_t>(get_u32(in, kCkpt));
                layer.depth = static_cast<int32_t>(get_u32(in, kCkpt));
                layer.width = static_cast<int32_t>(get_u32(in, kCkpt));
                layer.clamp = get_f64(in, kCkpt);
                int64_t in_dim = layer.d1;
                for (int32_t h = 0; h < layer.depth; ++h) {
                    layer.param_ids.push_back(push_param(get_tensor_payload(in, {layer.width, in_dim}, kCkpt)));
                    layer.param_ids.push_back(push_param(get_tensor_payload(in, {layer.width}, kCkpt)));
                    in_dim = layer.width;
                }
                layer.param_ids.push_back(push_param(get_tensor_payload(in, {2 * layer.d2, in_dim}, kCkpt)));
                layer.param_ids.push_back(push_param(get_tensor_payload(in, {2 * layer.d2}, kCkpt)));
                break;
            }
            case LayerKind::householder: {
                uint32_t n_vecs = get_u32(in, kCkpt);
                for (uint32_t k = 0; k < n_vecs; ++k) {
                    layer.param_ids.push_back(push_param(get_tensor_payload(in, {dim}, kCkpt)));
                }
                break;
            }
            case LayerKind::affine:
                layer.param_ids.push_back(push_param(get_tensor_payload(in, {dim, dim}, kCkpt)));
                layer.param_ids.push_back(push_param(get_tensor_payload(in, {dim}, kCkpt)));
                break;
            default:
                throw data_error("checkpoint: unknown layer kind " + std::to_string(kind_byte));
        }
        layers.push_back(std::move(layer));
    }
    return FlowModel(dim, seed, std::move(layers), std::move(params));
}

}  // namespace eoflow::flow
