#ifndef EOFLOW_LOSSES_HPP
#define EOFLOW_LOSSES_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "eoflow/flow.hpp"
#include "eoflow/index_set.hpp"
#include "eoflow/tensor.hpp"

namespace eoflow::losses {

inline constexpr double kLog2Pi = 1.8378770664093454836;

enum class LossMode { core_detail, total };
enum class TcEstimator { dense, stochastic };

struct MmlWeights {
    double lambda_core = 0.0;    // weight on the core manifold entropy
    double lambda_detail = 0.0;  // weight on the detail manifold entropy
    double lambda_cd = 0.0;      // weight on the core/detail mutual information
    double lambda_tc = 0.0;      // weight on the total correlation
};

// Per-sample loss records plus the composite objective. Vectors are empty in
// modes where the quantity is not computed (e.g. core/detail terms under the
// total split).
struct LossBreakdown {
    std::vector<double> l_ml;
    std::vector<double> l_core;
    std::vector<double> l_detail;
    std::vector<double> l_cd_mmi;
    std::vector<double> l_tc;
    double mean_l_ml = 0.0;
    double tc_estimate = 0.0;  // batch TC (dense mean or stochastic estimate)
    double composite = 0.0;
    MmlWeights weights;
    LossMode mode = LossMode::total;
    TcEstimator estimator = TcEstimator::dense;
};

// Per-sample dimension assignment for the stochastic TC estimator;
// counts[i] = number of samples assigned to latent dimension i.
struct TcAssignment {
    std::vector<int64_t> dim_of_sample;
    std::vector<int64_t> counts;
};

struct MmlOptions {
    LossMode mode = LossMode::total;
    MmlWeights weights;
    int64_t core_dim = 0;  // required for core_detail (1 <= C <= D-1)
    TcEstimator estimator = TcEstimator::dense;
    const TcAssignment* assignment = nullptr;  // required for stochastic
};

// --- pointwise quantities (values) ---------------------------------------

// Negative log-likelihood: 0.5 ||f(x)||^2 + log|J(f(x))| + (D/2) log 2pi.
double nll_ml(const flow::FlowModel& model, const Tensor& x);

// 0.5 ||f_S(x)||^2 + log|J_S(f(x))| + (|S|/2) log 2pi. |J_S| falls back to
// the exact flow log-determinant when S covers all dimensions.
double pointwise_manifold_entropy(const flow::FlowModel& model, const Tensor& x,
                                  const IndexSet& S);

// log|J_S| + log|J_T| - log|J_{ST}| >= 0 for disjoint S, T.
double pointwise_mmi(const flow::FlowModel& model, const Tensor& x, const IndexSet& S,
                     const IndexSet& T);

// sum_i log||J_i|| - log|J| >= 0 (dense reference path, D jvp passes).
double pointwise_total_correlation(const flow::FlowModel& model, const Tensor& x);

// Stochastic estimate of (1/B) sum_j sum_i 0.5 log ||J_i(f(x_j))||^2 using
// one assigned dimension per sample, weighted by B/m_i.
double stochastic_tc_batch(const flow::FlowModel& model, const Tensor& batch,
                           const TcAssignment& assignment);

// Composite MML objective over a batch.
std::pair<double, LossBreakdown> mml_loss(const flow::FlowModel& model, const Tensor& batch,
                                          const MmlOptions& options);

// --- traced building blocks (shared by values and training gradients) ----

struct SampleTrace {
    ad::Var z;
    ad::Var logdet_enc;
};

SampleTrace trace_encode(ad::Tape& tape, const flow::FlowModel& model,
                         const std::vector<ad::Var>& params, const Tensor& x);

// 0.5||z||^2 - logdet_enc + (D/2) log 2pi
ad::Var traced_nll_ml(ad::Tape& tape, const SampleTrace& trace, int64_t dim);

// Decoder Jacobian column J_i(z) with gradients flowing into params and z.
ad::Var traced_jacobian_column(ad::Tape& tape, const flow::FlowModel& model,
                               const std::vector<ad::Var>& params, ad::Var z, int64_t i);

// log ||column||
ad::Var traced_log_column_norm(ad::Var column);

// log|J_S| = 0.5 logdet(G) for the Gram matrix G of the given columns,
// via a Cholesky factorisation recorded on the tape. Throws numeric_error
// on a numerically rank-deficient Gram matrix (degenerate geometry).
ad::Var traced_log_volume(ad::Tape& tape, const std::vector<ad::Var>& columns);

// 0.5 sum_{i in S} z_i^2
ad::Var traced_half_sqnorm_subset(ad::Tape& tape, ad::Var z, const IndexSet& S);

// Per-sample composite used by training; spec.stoch_dim < 0 disables the
// stochastic column term.
struct SampleLossSpec {
    LossMode mode = LossMode::total;
    MmlWeights weights;
    int64_t core_dim = 0;
    TcEstimator estimator = TcEstimator::dense;
    int64_t stoch_dim = -1;
    double stoch_scale = 0.0;  // B / m_i
};

struct SampleLossResult {
    ad::Var composite;
    double l_ml = 0.0;
    double l_core = 0.0;
    double l_detail = 0.0;
    double l_cd_mmi = 0.0;
    double l_tc = 0.0;
    double logdet_enc = 0.0;
    double stoch_weighted_colnorm = 0.0;  // (B/m_i) log||J_i||, stochastic mode
    bool has_core_detail = false;
    bool has_tc = false;
};

SampleLossResult traced_sample_loss(ad::Tape& tape, const flow::FlowModel& model,
                                    const std::vector<ad::Var>& params, const Tensor& x,
                                    const SampleLossSpec& spec);

void validate_mml_options(const MmlOptions& options, int64_t dim, int64_t batch_size);
void validate_assignment(const TcAssignment& assignment, int64_t batch_size, int64_t dim);

}  // namespace eoflow::losses

#endif
