#ifndef EOFLOW_EVAL_HPP
#define EOFLOW_EVAL_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "eoflow/flow.hpp"
#include "eoflow/tensor.hpp"

namespace eoflow::eval {

// Latent indices sorted by decreasing manifold entropy over the given
// samples; the dynamic bottleneck keeps the first C of these.
std::vector<int64_t> latent_order(const flow::FlowModel& model, const Tensor& samples);

enum class DetailMode { zero, sample };

// x_hat = g([f_C(x), 0]) or with the detail block drawn from the prior.
// `order` is an entropy ordering of all D latent indices; C in [0, D].
Tensor bottleneck_reconstruct(const flow::FlowModel& model, const Tensor& x,
                              const std::vector<int64_t>& order, int64_t keep,
                              DetailMode mode, std::mt19937_64* rng = nullptr);

Tensor bottleneck_reconstruct_batch(const flow::FlowModel& model, const Tensor& batch,
                                    const std::vector<int64_t>& order, int64_t keep,
                                    DetailMode mode, uint64_t seed = 0);

// One-step score denoising: x + sigma^2 * d/dx log q(x).
Tensor tweedie_denoise(const flow::FlowModel& model, const Tensor& x_noisy, double sigma);
Tensor tweedie_denoise_batch(const flow::FlowModel& model, const Tensor& noisy, double sigma);

struct RatePoint {
    int64_t keep = 0;
    double mse_zero = 0.0;
    double psnr_zero = 0.0;
    double ssim_zero = 0.0;
    double mse_sample = 0.0;
    double psnr_sample = 0.0;
    double ssim_sample = 0.0;
};

// Distortion of bottleneck reconstructions of `noisy` against `clean` for
// every requested bottleneck size, in both detail modes. rows*cols must
// equal D (vectors may use rows=1).
std::vector<RatePoint> rate_distortion(const flow::FlowModel& model, const Tensor& clean,
                                       const Tensor& noisy, const std::vector<int64_t>& order,
                                       const std::vector<int64_t>& keep_grid, uint64_t seed,
                                       int64_t rows, int64_t cols);

struct Archetype {
    int64_t latent_index = 0;
    Tensor plus;           // g(+magnitude e_i)
    Tensor minus;          // g(-magnitude e_i)
    Tensor contrast;       // plus - minus
    Tensor mean_jacobian;  // E_x[J_i(f(x))]
};

std::vector<Archetype> archetypes(const flow::FlowModel& model,
                                  const std::vector<int64_t>& latent_dims, double magnitude,
                                  const Tensor& samples);

}  // namespace eoflow::eval

#endif
