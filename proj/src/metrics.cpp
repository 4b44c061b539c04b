#include "eoflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eoflow/losses.hpp"
#include "eoflow/parallel.hpp"

namespace eoflow::metrics {

namespace {

void validate_samples(const Tensor& samples, int64_t dim, const char* what) {
    if (samples.rank() != 2 || samples.cols() != dim) {
        throw shape_error(std::string(what) + ": samples shape " + samples.shape_str() +
                          " does not match D=" + std::to_string(dim));
    }
    if (samples.rows() < 2) {
        throw config_error(std::string(what) + ": need at least 2 samples, got " +
                           std::to_string(samples.rows()));
    }
}

MeanStdErr reduce_mean_stderr(const std::vector<double>& slots) {
    int64_t n = static_cast<int64_t>(slots.size());
    double mean = pairwise_sum(slots) / static_cast<double>(n);
    std::vector<double> sq(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) sq[i] = (slots[i] - mean) * (slots[i] - mean);
    double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n)), n};
}

// Per-sample singleton entropies (full constants) plus the pointwise TC.
struct SingletonRow {
    std::vector<double> h;  // D entries
    double tc = 0.0;
};

SingletonRow singleton_entropies(const flow::FlowModel& model, const Tensor& x) {
    int64_t dim = model.dim();
    ad::Tape tape;
    auto params = model.bind_params(tape, false);
    losses::SampleTrace trace = losses::trace_encode(tape, model, params, x);
    SingletonRow row;
    row.h.resize(static_cast<size_t>(dim));
    double colnorm_sum = 0.0;
    for (int64_t i = 0; i < dim; ++i) {
        ad::Var col = losses::traced_jacobian_column(tape, model, params, trace.z, i);
        double log_norm = losses::traced_log_column_norm(col).value()[0];
        double zi = trace.z.value()[i];
        row.h[static_cast<size_t>(i)] = 0.5 * zi * zi + log_norm + 0.5 * losses::kLog2Pi;
        colnorm_sum += log_norm;
    }
    row.tc = colnorm_sum + trace.logdet_enc.value()[0];
    return row;
}

}  // namespace

MeanStdErr manifold_entropy(const flow::FlowModel& model, const Tensor& samples,
                            const IndexSet& S) {
    validate_samples(samples, model.dim(), "manifold_entropy");
    int64_t n = samples.rows();
    std::vector<double> slots(static_cast<size_t>(n));
    parallel_for(n, [&](int64_t i) {
        slots[static_cast<size_t>(i)] =
            losses::pointwise_manifold_entropy(model, samples.row(i), S);
    });
    return reduce_mean_stderr(slots);
}

EntropySpectrum entropy_spectrum(const flow::FlowModel& model, const Tensor& samples,
                                 double noise_sigma, bool subtract_log2pi) {
    validate_samples(samples, model.dim(), "entropy_spectrum");
    if (noise_sigma < 0) throw config_error("entropy_spectrum: negative noise sigma");
    int64_t n = samples.rows();
    int64_t dim = model.dim();

    std::vector<SingletonRow> rows(static_cast<size_t>(n));
    parallel_for(n, [&](int64_t i) {
        rows[static_cast<size_t>(i)] = singleton_entropies(model, samples.row(i));
    });

    EntropySpectrum spec;
    spec.noise_sigma = noise_sigma;
    spec.n_samples = n;
    spec.includes_log2pi = !subtract_log2pi;
    double constant = subtract_log2pi ? 0.5 * losses::kLog2Pi : 0.0;
    spec.entropy.resize(static_cast<size_t>(dim));
    spec.std_err.resize(static_cast<size_t>(dim));
    for (int64_t d = 0; d < dim; ++d) {
        std::vector<double> slots(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i)
            slots[static_cast<size_t>(i)] = rows[static_cast<size_t>(i)].h[static_cast<size_t>(d)];
        MeanStdErr ms = reduce_mean_stderr(slots);
        spec.entropy[static_cast<size_t>(d)] = ms.mean - constant;
        spec.std_err[static_cast<size_t>(d)] = ms.std_err;
    }

    spec.order.resize(static_cast<size_t>(dim));
    std::iota(spec.order.begin(), spec.order.end(), 0);
    std::stable_sort(spec.order.begin(), spec.order.end(), [&](int64_t a, int64_t b) {
        return spec.entropy[static_cast<size_t>(a)] > spec.entropy[static_cast<size_t>(b)];
    });

    if (noise_sigma > 0) {
        spec.noise_floor = 0.5 + std::log(noise_sigma) + (subtract_log2pi ? 0.0 : 0.5 * losses::kLog2Pi);
    } else {
        spec.noise_floor = -std::numeric_limits<double>::infinity();
    }
    return spec;
}

MPMIMatrix mpmi_matrix(const flow::FlowModel& model, const Tensor& samples, int64_t k) {
    validate_samples(samples, model.dim(), "mpmi_matrix");
    int64_t dim = model.dim();
    if (k < 2 || k > dim) {
        throw config_error("mpmi_matrix: k must satisfy 2 <= k <= D, got " + std::to_string(k));
    }
    EntropySpectrum spec = entropy_spectrum(model, samples, 0.0);
    std::vector<int64_t> dims(spec.order.begin(), spec.order.begin() + k);

    int64_t n = samples.rows();
    int64_t n_pairs = k * (k - 1) / 2;
    std::vector<std::vector<double>> pair_slots(
        static_cast<size_t>(n_pairs), std::vector<double>(static_cast<size_t>(n)));

    parallel_for(n, [&](int64_t s) {
        ad::Tape tape;
        auto params = model.bind_params(tape, false);
        losses::SampleTrace trace = losses::trace_encode(tape, model, params, samples.row(s));
        std::vector<Tensor> cols(static_cast<size_t>(k));
        std::vector<double> log_norms(static_cast<size_t>(k));
        for (int64_t a = 0; a < k; ++a) {
            ad::Var col = losses::traced_jacobian_column(tape, model, params, trace.z,
                                                         dims[static_cast<size_t>(a)]);
            cols[static_cast<size_t>(a)] = col.value();
            log_norms[static_cast<size_t>(a)] =
                losses::traced_log_column_norm(col).value()[0];
        }
        int64_t p = 0;
        for (int64_t a = 0; a < k; ++a) {
            for (int64_t b = a + 1; b < k; ++b, ++p) {
                const Tensor& ca = cols[static_cast<size_t>(a)];
                const Tensor& cb = cols[static_cast<size_t>(b)];
                double gaa = 0, gbb = 0, gab = 0;
                for (int64_t r = 0; r < dim; ++r) {
                    gaa += ca[r] * ca[r];
                    gbb += cb[r] * cb[r];
                    gab += ca[r] * cb[r];
                }
                double det = gaa * gbb - gab * gab;
                if (det <= 0 || !std::isfinite(det)) {
                    throw numeric_error("mpmi_matrix: degenerate column pair");
                }
                // log|J_a| + log|J_b| - log|J_{ab}|
                pair_slots[static_cast<size_t>(p)][static_cast<size_t>(s)] =
                    log_norms[static_cast<size_t>(a)] + log_norms[static_cast<size_t>(b)] -
                    0.5 * std::log(det);
            }
        }
    });

    MPMIMatrix out;
    out.k = k;
    out.dims = dims;
    out.values.assign(static_cast<size_t>(k * k), 0.0);
    int64_t p = 0;
    for (int64_t a = 0; a < k; ++a) {
        for (int64_t b = a + 1; b < k; ++b, ++p) {
            double mean =
                pairwise_sum(pair_slots[static_cast<size_t>(p)]) / static_cast<double>(n);
            out.values[static_cast<size_t>(a * k + b)] = mean;
            out.values[static_cast<size_t>(b * k + a)] = mean;
        }
    }
    return out;
}

MeanStdErr manifold_total_correlation(const flow::FlowModel& model, const Tensor& samples) {
    validate_samples(samples, model.dim(), "manifold_total_correlation");
    int64_t n = samples.rows();
    std::vector<double> slots(static_cast<size_t>(n));
    parallel_for(n, [&](int64_t i) {
        slots[static_cast<size_t>(i)] = singleton_entropies(model, samples.row(i)).tc;
    });
    return reduce_mean_stderr(slots);
}

Tensor sample_model(const flow::FlowModel& model, int64_t n, uint64_t seed) {
    if (n < 1) throw config_error("sample_model: need n >= 1");
    int64_t dim = model.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor latents = Tensor::zeros({n, dim});
    for (int64_t i = 0; i < latents.size(); ++i) latents[i] = dist(rng);
    Tensor out = Tensor::zeros({n, dim});
    parallel_for(n, [&](int64_t i) {
        Tensor x = model.decode(latents.row(i)).value;
        for (int64_t j = 0; j < dim; ++j) out.at(i, j) = x[j];
    });
    return out;
}

}  // namespace eoflow::metrics
