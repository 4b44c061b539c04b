#include "eoflow/eval.hpp"

#include <cmath>

#include "eoflow/image.hpp"
#include "eoflow/losses.hpp"
#include "eoflow/metrics.hpp"
#include "eoflow/parallel.hpp"

namespace eoflow::eval {

namespace {

void check_order(const std::vector<int64_t>& order, int64_t dim) {
    if (static_cast<int64_t>(order.size()) != dim) {
        throw config_error("latent order must list all D dimensions");
    }
    std::vector<bool> seen(static_cast<size_t>(dim), false);
    for (int64_t i : order) {
        if (i < 0 || i >= dim || seen[static_cast<size_t>(i)]) {
            throw config_error("latent order is not a permutation of 0..D-1");
        }
        seen[static_cast<size_t>(i)] = true;
    }
}

}  // namespace

std::vector<int64_t> latent_order(const flow::FlowModel& model, const Tensor& samples) {
    metrics::EntropySpectrum spec = metrics::entropy_spectrum(model, samples, 0.0);
    return spec.order;
}

Tensor bottleneck_reconstruct(const flow::FlowModel& model, const Tensor& x,
                              const std::vector<int64_t>& order, int64_t keep,
                              DetailMode mode, std::mt19937_64* rng) {
    int64_t dim = model.dim();
    check_order(order, dim);
    if (keep < 0 || keep > dim) {
        throw config_error("bottleneck: keep must be in [0, D], got " + std::to_string(keep));
    }
    Tensor z = model.encode(x).value;
    if (mode == DetailMode::sample && rng == nullptr) {
        throw config_error("bottleneck: sample mode needs an rng");
    }
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int64_t r = keep; r < dim; ++r) {
        int64_t idx = order[static_cast<size_t>(r)];
        z[idx] = mode == DetailMode::zero ? 0.0 : dist(*rng);
    }
    return model.decode(z).value;
}

Tensor bottleneck_reconstruct_batch(const flow::FlowModel& model, const Tensor& batch,
                                    const std::vector<int64_t>& order, int64_t keep,
                                    DetailMode mode, uint64_t seed) {
    if (batch.rank() != 2 || batch.cols() != model.dim()) {
        throw shape_error("bottleneck: batch shape " + batch.shape_str() +
                          " does not match D=" + std::to_string(model.dim()));
    }
    int64_t n = batch.rows();
    int64_t dim = model.dim();
    Tensor out = Tensor::zeros({n, dim});
    // one rng per sample keeps the result independent of thread scheduling
    parallel_for(n, [&](int64_t i) {
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(i + 1)));
        Tensor rec = bottleneck_reconstruct(model, batch.row(i), order, keep, mode, &rng);
        for (int64_t j = 0; j < dim; ++j) out.at(i, j) = rec[j];
    });
    return out;
}

Tensor tweedie_denoise(const flow::FlowModel& model, const Tensor& x_noisy, double sigma) {
    if (sigma < 0) throw config_error("tweedie_denoise: negative sigma");
    ad::Tape tape;
    auto params = model.bind_params(tape, false);
    ad::Var x = tape.input(x_noisy);
    auto enc = model.encode_traced<ad::Var>(tape, params, x);
    losses::SampleTrace trace{enc.value, enc.logdet};
    ad::Var nll = losses::traced_nll_ml(tape, trace, model.dim());
    auto adjoints = tape.backward(nll);
    Tensor grad = ad::Tape::adjoint_or_zeros(adjoints, x);

    Tensor out = x_noisy;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= sigma * sigma * grad[i];
    return out;
}

Tensor tweedie_denoise_batch(const flow::FlowModel& model, const Tensor& noisy, double sigma) {
    if (noisy.rank() != 2 || noisy.cols() != model.dim()) {
        throw shape_error("tweedie_denoise: batch shape " + noisy.shape_str() +
                          " does not match D=" + std::to_string(model.dim()));
    }
    int64_t n = noisy.rows();
    Tensor out = Tensor::zeros(noisy.shape());
    parallel_for(n, [&](int64_t i) {
        Tensor d = tweedie_denoise(model, noisy.row(i), sigma);
        for (int64_t j = 0; j < model.dim(); ++j) out.at(i, j) = d[j];
    });
    return out;
}

std::vector<RatePoint> rate_distortion(const flow::FlowModel& model, const Tensor& clean,
                                       const Tensor& noisy, const std::vector<int64_t>& order,
                                       const std::vector<int64_t>& keep_grid, uint64_t seed,
                                       int64_t rows, int64_t cols) {
    if (!clean.same_shape(noisy)) {
        throw shape_error("rate_distortion: clean/noisy shapes differ");
    }
    if (rows * cols != model.dim()) {
        throw config_error("rate_distortion: rows*cols must equal D");
    }
    int64_t n = clean.rows();
    std::vector<RatePoint> out;
    for (int64_t keep : keep_grid) {
        Tensor zero_rec = bottleneck_reconstruct_batch(model, noisy, order, keep,
                                                       DetailMode::zero, seed);
        Tensor samp_rec = bottleneck_reconstruct_batch(model, noisy, order, keep,
                                                       DetailMode::sample, seed + 1);
        RatePoint p;
        p.keep = keep;
        double mse_z = 0, mse_s = 0, ssim_z = 0, ssim_s = 0;
        for (int64_t i = 0; i < n; ++i) {
            Tensor c = clean.row(i);
            Tensor rz = zero_rec.row(i);
            Tensor rs = samp_rec.row(i);
            mse_z += image::mse(c, rz);
            mse_s += image::mse(c, rs);
            ssim_z += image::ssim(c, rz, rows, cols);
            ssim_s += image::ssim(c, rs, rows, cols);
        }
        p.mse_zero = mse_z / static_cast<double>(n);
        p.mse_sample = mse_s / static_cast<double>(n);
        p.ssim_zero = ssim_z / static_cast<double>(n);
        p.ssim_sample = ssim_s / static_cast<double>(n);
        p.psnr_zero = image::psnr_from_mse(p.mse_zero);
        p.psnr_sample = image::psnr_from_mse(p.mse_sample);
        out.push_back(p);
    }
    return out;
}

std::vector<Archetype> archetypes(const flow::FlowModel& model,
                                  const std::vector<int64_t>& latent_dims, double magnitude,
                                  const Tensor& samples) {
    int64_t dim = model.dim();
    for (int64_t i : latent_dims) {
        if (i < 0 || i >= dim) {
            throw config_error("archetypes: latent index " + std::to_string(i) +
                               " out of range");
        }
    }
    if (samples.rank() != 2 || samples.cols() != dim) {
        throw shape_error("archetypes: samples shape " + samples.shape_str() +
                          " does not match D=" + std::to_string(dim));
    }
    int64_t n = samples.rows();

    std::vector<Archetype> out;
    out.reserve(latent_dims.size());
    for (int64_t idx : latent_dims) {
        Archetype a;
        a.latent_index = idx;
        Tensor z_plus = Tensor::zeros({dim});
        z_plus[idx] = magnitude;
        Tensor z_minus = Tensor::zeros({dim});
        z_minus[idx] = -magnitude;
        a.plus = model.decode(z_plus).value;
        a.minus = model.decode(z_minus).value;
        a.contrast = Tensor::zeros({dim});
        for (int64_t j = 0; j < dim; ++j) a.contrast[j] = a.plus[j] - a.minus[j];

        // mean decoder Jacobian column over the encoded samples
        Tensor acc = Tensor::zeros({dim});
        std::vector<Tensor> cols(static_cast<size_t>(n));
        parallel_for(n, [&](int64_t s) {
            Tensor z = model.encode(samples.row(s)).value;
            cols[static_cast<size_t>(s)] = model.decoder_jacobian_column(z, idx);
        });
        for (int64_t j = 0; j < dim; ++j) {
            std::vector<double> slots(static_cast<size_t>(n));
            for (int64_t s = 0; s < n; ++s) slots[static_cast<size_t>(s)] = cols[static_cast<size_t>(s)][j];
            acc[j] = pairwise_sum(slots) / static_cast<double>(n);
        }
        a.mean_jacobian = acc;
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace eoflow::eval
