#ifndef EOFLOW_METRICS_HPP
#define EOFLOW_METRICS_HPP

#include <cstdint>
#include <vector>

#include "eoflow/flow.hpp"
#include "eoflow/index_set.hpp"
#include "eoflow/tensor.hpp"

namespace eoflow::metrics {

struct MeanStdErr {
    double mean = 0.0;
    double std_err = 0.0;
    int64_t n = 0;
};

// Per-dimension manifold entropies with the descending sorting permutation
// and the noise floor. By default entropies and floor drop the 1/2 log 2pi
// constant per dimension (the convention used for spectra plots); set
// subtract_log2pi = false to keep full constants.
struct EntropySpectrum {
    std::vector<double> entropy;   // model order, convention applied
    std::vector<double> std_err;   // model order
    std::vector<int64_t> order;    // order[r] = latent index with rank r
    double noise_floor = 0.0;      // 1/2 + log sigma (convention-consistent)
    double noise_sigma = 0.0;
    int64_t n_samples = 0;
    bool includes_log2pi = false;

    double ranked_entropy(int64_t rank) const {
        return entropy[static_cast<size_t>(order[static_cast<size_t>(rank)])];
    }
};

// Symmetric k x k matrix of pairwise manifold mutual informations over the
// top-k entropy-ordered dimensions; diagonal stored as zero.
struct MPMIMatrix {
    int64_t k = 0;
    std::vector<int64_t> dims;    // latent indices, entropy order
    std::vector<double> values;   // row-major k x k

    double at(int64_t i, int64_t j) const {
        return values[static_cast<size_t>(i * k + j)];
    }
};

// Monte-Carlo mean of the pointwise manifold entropy over given samples
// (rows of `samples` are data points x; pass model samples for model-side
// evaluation).
MeanStdErr manifold_entropy(const flow::FlowModel& model, const Tensor& samples,
                            const IndexSet& S);

EntropySpectrum entropy_spectrum(const flow::FlowModel& model, const Tensor& samples,
                                 double noise_sigma, bool subtract_log2pi = true);

MPMIMatrix mpmi_matrix(const flow::FlowModel& model, const Tensor& samples, int64_t k);

MeanStdErr manifold_total_correlation(const flow::FlowModel& model, const Tensor& samples);

// Decoded latent-prior draws g(z), z ~ N(0, I); one row per sample.
Tensor sample_model(const flow::FlowModel& model, int64_t n, uint64_t seed);

}  // namespace eoflow::metrics

#endif
