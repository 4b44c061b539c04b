#ifndef EOFLOW_TRAIN_HPP
#define EOFLOW_TRAIN_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eoflow/datasets.hpp"
#include "eoflow/flow.hpp"
#include "eoflow/losses.hpp"

namespace eoflow::training {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

struct AdamState {
    int64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

// Bias-corrected adaptive-moment update with decoupled weight decay.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg);

// Uniform-with-replacement dimension assignment, then a random permutation of
// {0..D-1} written onto a random subset of D batch slots so every dimension
// is sampled at least once. Requires B >= D.
losses::TcAssignment sample_tc_indices(int64_t batch_size, int64_t dim, std::mt19937_64& rng);

struct TrainConfig {
    int64_t batch_size = 128;
    int64_t steps = 1000;
    double learning_rate = 1e-3;
    int64_t warmup_steps = 0;
    double weight_decay = 0.0;
    losses::LossMode mode = losses::LossMode::total;
    losses::MmlWeights weights;
    int64_t core_dim = 0;
    losses::TcEstimator estimator = losses::TcEstimator::dense;
    double noise_sigma = 0.0;  // 0 disables inflation
    uint64_t seed = 0;
    int64_t log_every = 10;
    int64_t checkpoint_every = 0;        // 0 disables periodic checkpoints
    std::string checkpoint_dir;          // empty disables all file output
    double grad_clip = 100.0;
    int64_t start_step = 0;  // resume offset for the step counter
};

struct TrainRecord {
    int64_t step = 0;
    double l_ml = 0.0;
    double l_tc = 0.0;  // TC estimate (total mode) or weighted regulariser sum
    double composite = 0.0;
    double grad_norm = 0.0;
    double ms_per_step = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    void write_csv(const std::string& path, const std::string& provenance = "") const;
};

// Minibatch loop: sample batch -> inflate -> loss -> gradients -> adam.
// Updates the model in place; aborts with numeric_error on a non-finite
// loss or gradient, leaving the last periodic checkpoint on disk.
TrainLog train(flow::FlowModel& model, const datasets::Dataset& data, const TrainConfig& cfg);

}  // namespace eoflow::training

#endif
