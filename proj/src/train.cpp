#include "eoflow/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "eoflow/parallel.hpp"

namespace eoflow::training {

namespace {

namespace fs = std::filesystem;

double global_norm(const std::vector<Tensor>& grads) {
    double acc = 0.0;
    for (const Tensor& g : grads) {
        for (int64_t i = 0; i < g.size(); ++i) acc += g[i] * g[i];
    }
    return std::sqrt(acc);
}

bool all_finite(const std::vector<Tensor>& grads) {
    for (const Tensor& g : grads) {
        if (!g.all_finite()) return false;
    }
    return true;
}

}  // namespace

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg) {
    if (grads.size() != params.size()) {
        throw config_error("adam_step: gradient/parameter count mismatch");
    }
    if (state.m.empty()) {
        for (const Tensor& p : params) {
            state.m.push_back(Tensor::zeros(p.shape()));
            state.v.push_back(Tensor::zeros(p.shape()));
        }
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        const Tensor& g = grads[k];
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (int64_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            p[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p[i]);
        }
    }
}

losses::TcAssignment sample_tc_indices(int64_t batch_size, int64_t dim, std::mt19937_64& rng) {
    if (batch_size < dim) {
        throw config_error("sample_tc_indices: requires B >= D, got B=" +
                           std::to_string(batch_size) + ", D=" + std::to_string(dim));
    }
    losses::TcAssignment a;
    a.dim_of_sample.resize(static_cast<size_t>(batch_size));
    std::uniform_int_distribution<int64_t> uniform(0, dim - 1);
    for (int64_t j = 0; j < batch_size; ++j) {
        a.dim_of_sample[static_cast<size_t>(j)] = uniform(rng);
    }
    // overwrite a random slot subset with a random permutation for coverage
    std::vector<int64_t> slots(static_cast<size_t>(batch_size));
    for (int64_t j = 0; j < batch_size; ++j) slots[static_cast<size_t>(j)] = j;
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<int64_t> perm(static_cast<size_t>(dim));
    for (int64_t i = 0; i < dim; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int64_t i = 0; i < dim; ++i) {
        a.dim_of_sample[static_cast<size_t>(slots[static_cast<size_t>(i)])] =
            perm[static_cast<size_t>(i)];
    }
    a.counts.assign(static_cast<size_t>(dim), 0);
    for (int64_t e : a.dim_of_sample) a.counts[static_cast<size_t>(e)]++;
    return a;
}

void TrainLog::write_csv(const std::string& path, const std::string& provenance) const {
    std::ofstream out(path);
    if (!out) throw data_error("train log: cannot open '" + path + "' for writing");
    out.precision(12);
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "step,l_ml,l_tc,composite,grad_norm,ms_per_step\n";
    for (const TrainRecord& r : records) {
        out << r.step << ',' << r.l_ml << ',' << r.l_tc << ',' << r.composite << ','
            << r.grad_norm << ',' << r.ms_per_step << "\n";
    }
}

TrainLog train(flow::FlowModel& model, const datasets::Dataset& data, const TrainConfig& cfg) {
    if (cfg.steps < 1) throw config_error("train: steps must be >= 1");
    if (cfg.batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (data.size() < 1) throw config_error("train: empty dataset");
    if (data.dim() != model.dim()) {
        throw config_error("train: dataset dimension " + std::to_string(data.dim()) +
                           " does not match model D=" + std::to_string(model.dim()));
    }
    if (cfg.noise_sigma < 0) throw config_error("train: negative noise sigma");

    {
        // weight/mode validation shared with the loss module
        losses::MmlOptions probe;
        probe.mode = cfg.mode;
        probe.weights = cfg.weights;
        probe.core_dim = cfg.core_dim;
        probe.estimator = losses::TcEstimator::dense;
        losses::validate_mml_options(probe, model.dim(), cfg.batch_size);
    }
    bool stochastic = cfg.mode == losses::LossMode::total &&
                      cfg.estimator == losses::TcEstimator::stochastic &&
                      cfg.weights.lambda_tc != 0.0;
    if (stochastic && cfg.batch_size < model.dim()) {
        throw config_error("train: stochastic estimator requires batch_size >= D");
    }

    std::mt19937_64 batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::mt19937_64 noise_rng(cfg.seed ^ 0x6a09e667f3bcc909ull);
    std::mt19937_64 index_rng(cfg.seed ^ 0xbb67ae8584caa73bull);
    std::uniform_int_distribution<int64_t> pick(0, data.size() - 1);

    bool write_files = !cfg.checkpoint_dir.empty();
    if (write_files) fs::create_directories(cfg.checkpoint_dir);
    std::string last_path = cfg.checkpoint_dir + "/last.eofl";
    std::string final_path = cfg.checkpoint_dir + "/model.eofl";
    std::string log_path = cfg.checkpoint_dir + "/train_log.csv";

    int64_t B = cfg.batch_size;
    int64_t dim = model.dim();
    AdamConfig adam;
    adam.lr = cfg.learning_rate;
    adam.weight_decay = cfg.weight_decay;
    AdamState state;
    TrainLog log;

    for (int64_t t = 0; t < cfg.steps; ++t) {
        auto tic = std::chrono::steady_clock::now();
        int64_t step_index = cfg.start_step + t;

        Tensor batch = Tensor::zeros({B, dim});
        for (int64_t j = 0; j < B; ++j) {
            Tensor row = data.row(pick(batch_rng));
            for (int64_t k = 0; k < dim; ++k) batch.at(j, k) = row[k];
        }
        if (cfg.noise_sigma > 0) {
            batch = datasets::inflate(batch, datasets::NoiseConfig(cfg.noise_sigma), noise_rng);
        }

        losses::TcAssignment assignment;
        if (stochastic) assignment = sample_tc_indices(B, dim, index_rng);

        struct SampleOut {
            std::vector<Tensor> grads;
            double composite = 0.0;
            double l_ml = 0.0;
            double tc_term = 0.0;
        };
        std::vector<SampleOut> outs(static_cast<size_t>(B));
        parallel_for(B, [&](int64_t j) {
            ad::Tape tape;
            auto params = model.bind_params(tape, true);
            losses::SampleLossSpec spec;
            spec.mode = cfg.mode;
            spec.weights = cfg.weights;
            spec.core_dim = cfg.core_dim;
            spec.estimator = cfg.estimator;
            if (stochastic) {
                int64_t dim_j = assignment.dim_of_sample[static_cast<size_t>(j)];
                spec.stoch_dim = dim_j;
                spec.stoch_scale =
                    static_cast<double>(B) /
                    static_cast<double>(assignment.counts[static_cast<size_t>(dim_j)]);
            }
            losses::SampleLossResult r =
                losses::traced_sample_loss(tape, model, params, batch.row(j), spec);
            auto adjoints = tape.backward(r.composite);
            SampleOut& out = outs[static_cast<size_t>(j)];
            out.grads.reserve(params.size());
            for (const ad::Var& p : params) {
                out.grads.push_back(ad::Tape::adjoint_or_zeros(adjoints, p));
            }
            out.composite = r.composite.value()[0];
            out.l_ml = r.l_ml;
            if (cfg.mode == losses::LossMode::total) {
                out.tc_term = stochastic ? r.logdet_enc + r.stoch_weighted_colnorm : r.l_tc;
            } else {
                out.tc_term = r.composite.value()[0] - r.l_ml;  // weighted regulariser sum
            }
        });

        // deterministic pairwise reduction over per-sample gradients
        std::vector<std::vector<Tensor>> grad_sets;
        grad_sets.reserve(static_cast<size_t>(B));
        std::vector<double> comp_slots(static_cast<size_t>(B)), ml_slots(static_cast<size_t>(B)),
            tc_slots(static_cast<size_t>(B));
        for (int64_t j = 0; j < B; ++j) {
            grad_sets.push_back(std::move(outs[static_cast<size_t>(j)].grads));
            comp_slots[static_cast<size_t>(j)] = outs[static_cast<size_t>(j)].composite;
            ml_slots[static_cast<size_t>(j)] = outs[static_cast<size_t>(j)].l_ml;
            tc_slots[static_cast<size_t>(j)] = outs[static_cast<size_t>(j)].tc_term;
        }
        std::vector<Tensor> grads = pairwise_reduce<std::vector<Tensor>>(
            std::move(grad_sets), [](std::vector<Tensor>& a, const std::vector<Tensor>& b) {
                for (size_t k = 0; k < a.size(); ++k) {
                    for (int64_t i = 0; i < a[k].size(); ++i) a[k][i] += b[k][i];
                }
            });
        double scale = 1.0 / static_cast<double>(B);
        for (Tensor& g : grads) {
            for (int64_t i = 0; i < g.size(); ++i) g[i] *= scale;
        }

        double composite = pairwise_sum(comp_slots) * scale;
        double l_ml = pairwise_sum(ml_slots) * scale;
        double l_tc = pairwise_sum(tc_slots) * scale;

        if (!std::isfinite(composite) || !all_finite(grads)) {
            if (write_files) log.write_csv(log_path);
            throw numeric_error("train: non-finite loss or gradient at step " +
                                std::to_string(step_index) +
                                "; last checkpoint preserved");
        }

        double norm = global_norm(grads);
        if (cfg.grad_clip > 0 && norm > cfg.grad_clip) {
            double factor = cfg.grad_clip / norm;
            for (Tensor& g : grads) {
                for (int64_t i = 0; i < g.size(); ++i) g[i] *= factor;
            }
        }

        double warm = cfg.warmup_steps > 0
                          ? std::min(1.0, static_cast<double>(t + 1) /
                                              static_cast<double>(cfg.warmup_steps))
                          : 1.0;
        adam.lr = cfg.learning_rate * warm;
        adam_step(model.parameters(), grads, state, adam);

        auto toc = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(toc - tic).count();

        if (cfg.log_every > 0 && (t % cfg.log_every == 0 || t == cfg.steps - 1)) {
            log.records.push_back({step_index, l_ml, l_tc, composite, norm, ms});
        }
        if (write_files && cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0) {
            flow::save_checkpoint(model, last_path);
            log.write_csv(log_path);
        }
    }

    if (write_files) {
        flow::save_checkpoint(model, final_path);
        log.write_csv(log_path);
    }
    return log;
}

}  // namespace eoflow::training
