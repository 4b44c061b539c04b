#ifndef EOFLOW_DATASETS_HPP
#define EOFLOW_DATASETS_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eoflow/tensor.hpp"

namespace eoflow::datasets {

// Immutable sample matrix plus provenance. alpha carries the per-sample
// mixing weight of entangled mixtures; labels the class ids of IDX data.
struct Dataset {
    Tensor samples;  // N x D
    std::string name;
    double norm_scale = 1.0;
    double norm_offset = 0.0;
    std::vector<double> alpha;
    std::vector<int64_t> labels;

    int64_t size() const { return samples.rank() == 2 ? samples.rows() : 0; }
    int64_t dim() const { return samples.rank() == 2 ? samples.cols() : 0; }
    Tensor row(int64_t i) const { return samples.row(i); }
};

struct CovarianceSpec {
    Tensor mean;  // D
    Tensor cov;   // D x D, symmetric positive definite

    static CovarianceSpec diagonal(std::vector<double> variances);
    static CovarianceSpec full(Tensor mean, Tensor cov);
};

Dataset gaussian_dataset(int64_t dim, const CovarianceSpec& spec, int64_t n, uint64_t seed);

// x = r (cos phi, sin phi), r ~ N(radius_mean, radius_std), phi uniform.
Dataset ring2d_dataset(int64_t n, double radius_mean, double radius_std, uint64_t seed);

// Per-sample uniform alpha in [0,1] mixing random rows of the two bases;
// alpha is stored in the metadata.
Dataset entangled_mixture(const Dataset& base_a, const Dataset& base_b, int64_t n,
                          uint64_t seed);

// alpha * a + (1 - alpha) * b
Tensor mix_rows(const Tensor& a, const Tensor& b, double alpha);

// IDX container (big-endian): images magic 0x00000803, labels 0x00000801.
// Pixel bytes are scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path = "");

struct NoiseConfig {
    double sigma = 0.0;
    uint64_t seed = 0;

    NoiseConfig() = default;
    NoiseConfig(double sigma_, uint64_t seed_ = 0);
};

// x + sigma * eps with fresh standard normal noise from rng; sigma = 0
// returns the input unchanged. Never mutates the clean batch.
Tensor inflate(const Tensor& batch, const NoiseConfig& cfg, std::mt19937_64& rng);

// Raw little-endian f64 tensor cache: magic "EODS", u32 version, u32 N,
// u32 D (16-byte header), then N*D values.
void save_dataset_cache(const Dataset& dataset, const std::string& path);
Dataset load_dataset_cache(const std::string& path);

}  // namespace eoflow::datasets

#endif
