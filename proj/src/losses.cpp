#include "eoflow/losses.hpp"

#include <cmath>

#include "eoflow/parallel.hpp"

namespace eoflow::losses {

namespace {

Tensor unit_vector(int64_t dim, int64_t i) {
    Tensor e = Tensor::zeros({dim});
    e[i] = 1.0;
    return e;
}

// log|J_S| for a subset, reusing precomputed columns. Falls back to the
// exact flow log-determinant for the full index set.
ad::Var traced_log_volume_subset(ad::Tape& tape, const std::vector<ad::Var>& all_columns,
                                 const IndexSet& S, ad::Var logdet_enc, int64_t dim) {
    if (S.size() == dim) return ad::neg(logdet_enc);
    if (S.size() == 1) return traced_log_column_norm(all_columns[static_cast<size_t>(S.indices()[0])]);
    std::vector<ad::Var> cols;
    cols.reserve(static_cast<size_t>(S.size()));
    for (int64_t i : S.indices()) cols.push_back(all_columns[static_cast<size_t>(i)]);
    return traced_log_volume(tape, cols);
}

std::vector<ad::Var> traced_all_columns(ad::Tape& tape, const flow::FlowModel& model,
                                        const std::vector<ad::Var>& params, ad::Var z) {
    std::vector<ad::Var> cols;
    int64_t dim = model.dim();
    cols.reserve(static_cast<size_t>(dim));
    for (int64_t i = 0; i < dim; ++i) {
        cols.push_back(traced_jacobian_column(tape, model, params, z, i));
    }
    return cols;
}

void validate_point(const Tensor& x, int64_t dim, const char* what) {
    if (x.rank() != 1 || x.extent(0) != dim) {
        throw shape_error(std::string(what) + ": point shape " + x.shape_str() +
                          " does not match D=" + std::to_string(dim));
    }
    if (!x.all_finite()) throw numeric_error(std::string(what) + ": non-finite input point");
}

void validate_subset(const IndexSet& S, int64_t dim, const char* what) {
    if (S.empty()) throw config_error(std::string(what) + ": empty index set");
    if (S.max_index() >= dim) {
        throw config_error(std::string(what) + ": index set " + S.str() +
                           " out of range for D=" + std::to_string(dim));
    }
}

}  // namespace

SampleTrace trace_encode(ad::Tape& tape, const flow::FlowModel& model,
                         const std::vector<ad::Var>& params, const Tensor& x) {
    ad::Var xv = tape.constant(x);
    auto enc = model.encode_traced<ad::Var>(tape, params, xv);
    return {enc.value, enc.logdet};
}

ad::Var traced_nll_ml(ad::Tape& tape, const SampleTrace& trace, int64_t dim) {
    ad::Var half_sq = ad::scale(ad::squared_norm(trace.z), 0.5);
    ad::Var constant = tape.constant(Tensor::scalar(0.5 * static_cast<double>(dim) * kLog2Pi));
    return ad::add(ad::sub(half_sq, trace.logdet_enc), constant);
}

ad::Var traced_jacobian_column(ad::Tape& tape, const flow::FlowModel& model,
                               const std::vector<ad::Var>& params, ad::Var z, int64_t i) {
    ad::DualVar dual_z(z, tape.constant(unit_vector(model.dim(), i)));
    auto out = model.decode_traced<ad::DualVar>(tape, params, dual_z);
    if (!out.value.tangent) {
        throw numeric_error("jacobian column: decoder produced no tangent");
    }
    return *out.value.tangent;
}

ad::Var traced_log_column_norm(ad::Var column) {
    return ad::scale(ad::log(ad::squared_norm(column)), 0.5);
}

ad::Var traced_log_volume(ad::Tape& tape, const std::vector<ad::Var>& columns) {
    size_t k = columns.size();
    // Gram matrix entries as scalar vars
    std::vector<std::vector<ad::Var>> gram(k, std::vector<ad::Var>(k));
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            gram[i][j] = ad::dot(columns[i], columns[j]);
        }
    }
    // Cholesky on the tape; log|J_S| = sum_i log L_ii
    std::vector<std::vector<ad::Var>> chol(k, std::vector<ad::Var>(k));
    ad::Var acc = tape.constant(Tensor::scalar(0.0));
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            ad::Var s = gram[i][j];
            for (size_t m = 0; m < j; ++m) s = ad::sub(s, ad::mul(chol[i][m], chol[j][m]));
            if (i == j) {
                if (s.value()[0] <= 0.0 || !std::isfinite(s.value()[0])) {
                    throw numeric_error(
                        "degenerate geometry: sub-Jacobian Gram matrix is numerically "
                        "rank-deficient (pivot " +
                        std::to_string(s.value()[0]) + " at index " + std::to_string(i) + ")");
                }
                chol[i][i] = ad::sqrt(s);
                acc = ad::add(acc, ad::log(chol[i][i]));
            } else {
                chol[i][j] = ad::div(s, chol[j][j]);
            }
        }
    }
    return acc;
}

ad::Var traced_half_sqnorm_subset(ad::Tape& tape, ad::Var z, const IndexSet& S) {
    if (S.contiguous()) {
        int64_t lo = S.indices().front();
        return ad::scale(ad::squared_norm(ad::slice(z, lo, lo + S.size())), 0.5);
    }
    ad::Var acc = tape.constant(Tensor::scalar(0.0));
    for (int64_t i : S.indices()) {
        acc = ad::add(acc, ad::squared_norm(ad::slice(z, i, i + 1)));
    }
    return ad::scale(acc, 0.5);
}

namespace {

// Pointwise manifold entropy assembled from precomputed pieces.
ad::Var traced_subset_entropy(ad::Tape& tape, const SampleTrace& trace,
                              const std::vector<ad::Var>& columns, const IndexSet& S,
                              int64_t dim) {
    ad::Var half_sq = traced_half_sqnorm_subset(tape, trace.z, S);
    ad::Var log_vol = traced_log_volume_subset(tape, columns, S, trace.logdet_enc, dim);
    ad::Var constant =
        tape.constant(Tensor::scalar(0.5 * static_cast<double>(S.size()) * kLog2Pi));
    return ad::add(ad::add(half_sq, log_vol), constant);
}

}  // namespace

double nll_ml(const flow::FlowModel& model, const Tensor& x) {
    validate_point(x, model.dim(), "nll_ml");
    ad::Tape tape;
    auto params = model.bind_params(tape, false);
    SampleTrace trace = trace_encode(tape, model, params, x);
    return traced_nll_ml(tape, trace, model.dim()).value()[0];
}

double pointwise_manifold_entropy(const flow::FlowModel& model, const Tensor& x,
                                  const IndexSet& S) {
    validate_point(x, model.dim(), "pointwise_manifold_entropy");
    validate_subset(S, model.dim(), "pointwise_manifold_entropy");
    ad::Tape tape;
    auto params = model.bind_params(tape, false);
    SampleTrace trace = trace_encode(tape, model, params, x);

    ad::Var half_sq = traced_half_sqnorm_subset(tape, trace.z, S);
    ad::Var log_vol = [&] {
        if (S.size() == model.dim()) return ad::neg(trace.logdet_enc);
        if (S.size() == 1) {
            ad::Var col = traced_jacobian_column(tape, model, params, trace.z, S.indices()[0]);
            return traced_log_column_norm(col);
        }
        std::vector<ad::Var> cols;
        for (int64_t i : S.indices())
            cols.push_back(traced_jacobian_column(tape, model, params, trace.z, i));
        return traced_log_volume(tape, cols);
    }();
    double constant = 0.5 * static_cast<double>(S.size()) * kLog2Pi;
    return half_sq.value()[0] + log_vol.value()[0] + constant;
}

double pointwise_mmi(const flow::FlowModel& model, const Tensor& x, const IndexSet& S,
                     const IndexSet& T) {
    validate_point(x, model.dim(), "pointwise_mmi");
    validate_subset(S, model.dim(), "pointwise_mmi");
    validate_subset(T, model.dim(), "pointwise_mmi");
    if (!S.disjoint_with(T)) {
        throw config_error("pointwise_mmi: index sets " + S.str() + " and " + T.str() +
                           " overlap");
    }
    ad::Tape tape;
    auto params = model.bind_params(tape, false);
    SampleTrace trace = trace_encode(tape, model, params, x);
    IndexSet ST = S.unite(T);

    // compute all needed columns once
    std::vector<ad::Var> columns(static_cast<size_t>(model.dim()));
    for (int64_t i : ST.indices()) {
        columns[static_cast<size_t>(i)] =
            traced_jacobian_column(tape, model, params, trace.z, i);
    }
    ad::Var vol_s = traced_log_volume_subset(tape, columns, S, trace.logdet_enc, model.dim());
    ad::Var vol_t = traced_log_volume_subset(tape, columns, T, trace.logdet_enc, model.dim());
    ad::Var vol_st = traced_log_volume_subset(tape, columns, ST, trace.logdet_enc, model.dim());
    return vol_s.value()[0] + vol_t.value()[0] - vol_st.value()[0];
}

double pointwise_total_correlation(const flow::FlowModel& model, const Tensor& x) {
    validate_point(x, model.dim(), "pointwise_total_correlation");
    ad::Tape tape;
    auto params = model.bind_params(tape, false);
    SampleTrace trace = trace_encode(tape, model, params, x);
    double acc = trace.logdet_enc.value()[0];  // -log|J|
    for (int64_t i = 0; i < model.dim(); ++i) {
        ad::Var col = traced_jacobian_column(tape, model, params, trace.z, i);
        acc += traced_log_column_norm(col).value()[0];
    }
    return acc;
}

void validate_assignment(const TcAssignment& assignment, int64_t batch_size, int64_t dim) {
    if (batch_size < dim) {
        throw config_error("stochastic TC estimator requires B >= D, got B=" +
                           std::to_string(batch_size) + ", D=" + std::to_string(dim));
    }
    if (static_cast<int64_t>(assignment.dim_of_sample.size()) != batch_size) {
        throw config_error("TC assignment length does not match batch size");
    }
    if (static_cast<int64_t>(assignment.counts.size()) != dim) {
        throw config_error("TC assignment counts length does not match D");
    }
    int64_t total = 0;
    for (int64_t i = 0; i < dim; ++i) {
        if (assignment.counts[static_cast<size_t>(i)] < 1) {
            throw config_error("TC assignment: dimension " + std::to_string(i) +
                               " was never sampled (m_i = 0)");
        }
        total += assignment.counts[static_cast<size_t>(i)];
    }
    if (total != batch_size) throw config_error("TC assignment counts do not sum to B");
    for (int64_t e : assignment.dim_of_sample) {
        if (e < 0 || e >= dim) throw config_error("TC assignment dimension out of range");
    }
}

double stochastic_tc_batch(const flow::FlowModel& model, const Tensor& batch,
                           const TcAssignment& assignment) {
    if (batch.rank() != 2 || batch.cols() != model.dim()) {
        throw shape_error("stochastic_tc_batch: batch shape " + batch.shape_str() +
                          " does not match D=" + std::to_string(model.dim()));
    }
    int64_t B = batch.rows();
    validate_assignment(assignment, B, model.dim());

    std::vector<double> contrib(static_cast<size_t>(B));
    parallel_for(B, [&](int64_t j) {
        ad::Tape tape;
        auto params = model.bind_params(tape, false);
        SampleTrace trace = trace_encode(tape, model, params, batch.row(j));
        int64_t dim_j = assignment.dim_of_sample[static_cast<size_t>(j)];
        ad::Var col = traced_jacobian_column(tape, model, params, trace.z, dim_j);
        double m_i = static_cast<double>(assignment.counts[static_cast<size_t>(dim_j)]);
        contrib[static_cast<size_t>(j)] =
            traced_log_column_norm(col).value()[0] / m_i;
    });
    return pairwise_sum(contrib);
}

SampleLossResult traced_sample_loss(ad::Tape& tape, const flow::FlowModel& model,
                                    const std::vector<ad::Var>& params, const Tensor& x,
                                    const SampleLossSpec& spec) {
    int64_t dim = model.dim();
    SampleTrace trace = trace_encode(tape, model, params, x);
    ad::Var nll = traced_nll_ml(tape, trace, dim);

    SampleLossResult out;
    out.l_ml = nll.value()[0];
    out.logdet_enc = trace.logdet_enc.value()[0];
    out.composite = nll;

    if (spec.mode == LossMode::core_detail) {
        IndexSet core = IndexSet::range(0, spec.core_dim);
        IndexSet detail = IndexSet::range(spec.core_dim, dim);
        std::vector<ad::Var> columns = traced_all_columns(tape, model, params, trace.z);

        ad::Var l_core = traced_subset_entropy(tape, trace, columns, core, dim);
        ad::Var l_detail = traced_subset_entropy(tape, trace, columns, detail, dim);
        ad::Var vol_c = traced_log_volume_subset(tape, columns, core, trace.logdet_enc, dim);
        ad::Var vol_d = traced_log_volume_subset(tape, columns, detail, trace.logdet_enc, dim);
        // log|J_CD| = -logdet_enc
        ad::Var l_cd = ad::add(ad::add(vol_c, vol_d), trace.logdet_enc);

        out.l_core = l_core.value()[0];
        out.l_detail = l_detail.value()[0];
        out.l_cd_mmi = l_cd.value()[0];
        out.has_core_detail = true;

        // total correlation comes for free from the same columns
        ad::Var tc = trace.logdet_enc;
        for (int64_t i = 0; i < dim; ++i)
            tc = ad::add(tc, traced_log_column_norm(columns[static_cast<size_t>(i)]));
        out.l_tc = tc.value()[0];
        out.has_tc = true;

        ad::Var composite = nll;
        if (spec.weights.lambda_core != 0.0)
            composite = ad::add(composite, ad::scale(l_core, spec.weights.lambda_core));
        if (spec.weights.lambda_detail != 0.0)
            composite = ad::add(composite, ad::scale(l_detail, spec.weights.lambda_detail));
        if (spec.weights.lambda_cd != 0.0)
            composite = ad::add(composite, ad::scale(l_cd, spec.weights.lambda_cd));
        out.composite = composite;
        return out;
    }

    // total split
    if (spec.weights.lambda_tc == 0.0) return out;

    if (spec.estimator == TcEstimator::dense) {
        std::vector<ad::Var> columns = traced_all_columns(tape, model, params, trace.z);
        ad::Var tc = trace.logdet_enc;
        for (int64_t i = 0; i < dim; ++i)
            tc = ad::add(tc, traced_log_column_norm(columns[static_cast<size_t>(i)]));
        out.l_tc = tc.value()[0];
        out.has_tc = true;
        out.composite = ad::add(nll, ad::scale(tc, spec.weights.lambda_tc));
        return out;
    }

    // stochastic: lambda * (logdet_enc + (B/m_i) * log||J_{e_j}||) per sample
    if (spec.stoch_dim < 0 || spec.stoch_dim >= dim) {
        throw config_error("traced_sample_loss: stochastic estimator needs a valid assigned dim");
    }
    ad::Var col = traced_jacobian_column(tape, model, params, trace.z, spec.stoch_dim);
    ad::Var weighted = ad::scale(traced_log_column_norm(col), spec.stoch_scale);
    ad::Var tc_part = ad::add(trace.logdet_enc, weighted);
    out.stoch_weighted_colnorm = weighted.value()[0];
    out.composite = ad::add(nll, ad::scale(tc_part, spec.weights.lambda_tc));
    return out;
}

void validate_mml_options(const MmlOptions& options, int64_t dim, int64_t batch_size) {
    const MmlWeights& w = options.weights;
    if (w.lambda_core < 0 || w.lambda_detail < 0 || w.lambda_cd < 0 || w.lambda_tc < 0) {
        throw config_error("mml_loss: negative loss weights are rejected");
    }
    if (options.mode == LossMode::core_detail) {
        if (w.lambda_tc != 0.0) {
            throw config_error("mml_loss: lambda_tc is not a core-detail weight");
        }
        if (options.core_dim < 1 || options.core_dim >= dim) {
            throw config_error("mml_loss: core_dim must satisfy 1 <= C <= D-1, got " +
                               std::to_string(options.core_dim));
        }
        if (options.estimator == TcEstimator::stochastic) {
            throw config_error("mml_loss: stochastic estimator applies to the total split only");
        }
    } else {
        if (w.lambda_core != 0.0 || w.lambda_detail != 0.0 || w.lambda_cd != 0.0) {
            throw config_error("mml_loss: core-detail weights require core_detail mode");
        }
        if (options.estimator == TcEstimator::stochastic && w.lambda_tc != 0.0) {
            if (options.assignment == nullptr) {
                throw config_error("mml_loss: stochastic estimator needs an index assignment");
            }
            validate_assignment(*options.assignment, batch_size, dim);
        }
    }
}

std::pair<double, LossBreakdown> mml_loss(const flow::FlowModel& model, const Tensor& batch,
                                          const MmlOptions& options) {
    if (batch.rank() != 2 || batch.cols() != model.dim()) {
        throw shape_error("mml_loss: batch shape " + batch.shape_str() + " does not match D=" +
                          std::to_string(model.dim()));
    }
    int64_t B = batch.rows();
    if (B < 1) throw config_error("mml_loss: empty batch");
    validate_mml_options(options, model.dim(), B);

    bool stochastic = options.mode == LossMode::total &&
                      options.estimator == TcEstimator::stochastic &&
                      options.weights.lambda_tc != 0.0;

    // plain-value copy of a per-sample result; the tape dies with each task
    struct SampleValues {
        double composite, l_ml, l_core, l_detail, l_cd_mmi, l_tc, logdet_enc, stoch_colnorm;
        bool has_core_detail, has_tc;
    };
    std::vector<SampleValues> results(static_cast<size_t>(B));
    parallel_for(B, [&](int64_t j) {
        ad::Tape tape;
        auto params = model.bind_params(tape, false);
        SampleLossSpec spec;
        spec.mode = options.mode;
        spec.weights = options.weights;
        spec.core_dim = options.core_dim;
        spec.estimator = options.estimator;
        if (stochastic) {
            int64_t dim_j = options.assignment->dim_of_sample[static_cast<size_t>(j)];
            spec.stoch_dim = dim_j;
            spec.stoch_scale = static_cast<double>(B) /
                               static_cast<double>(
                                   options.assignment->counts[static_cast<size_t>(dim_j)]);
        }
        SampleLossResult r = traced_sample_loss(tape, model, params, batch.row(j), spec);
        results[static_cast<size_t>(j)] = {r.composite.value()[0], r.l_ml,
                                           r.l_core,               r.l_detail,
                                           r.l_cd_mmi,             r.l_tc,
                                           r.logdet_enc,           r.stoch_weighted_colnorm,
                                           r.has_core_detail,      r.has_tc};
    });

    LossBreakdown breakdown;
    breakdown.weights = options.weights;
    breakdown.mode = options.mode;
    breakdown.estimator = options.estimator;

    std::vector<double> composite_slots(static_cast<size_t>(B));
    std::vector<double> ml_slots(static_cast<size_t>(B));
    std::vector<double> logdet_slots(static_cast<size_t>(B));
    for (int64_t j = 0; j < B; ++j) {
        const SampleValues& r = results[static_cast<size_t>(j)];
        composite_slots[static_cast<size_t>(j)] = r.composite;
        ml_slots[static_cast<size_t>(j)] = r.l_ml;
        logdet_slots[static_cast<size_t>(j)] = r.logdet_enc;
        breakdown.l_ml.push_back(r.l_ml);
        if (r.has_core_detail) {
            breakdown.l_core.push_back(r.l_core);
            breakdown.l_detail.push_back(r.l_detail);
            breakdown.l_cd_mmi.push_back(r.l_cd_mmi);
        }
        if (r.has_tc) breakdown.l_tc.push_back(r.l_tc);
    }

    double bn = static_cast<double>(B);
    breakdown.mean_l_ml = pairwise_sum(ml_slots) / bn;
    breakdown.composite = pairwise_sum(composite_slots) / bn;

    if (options.mode == LossMode::total && options.weights.lambda_tc != 0.0) {
        if (stochastic) {
            // est + mean logdet_enc, with est = (1/B) sum_j (B/m_i) log||J_i||
            std::vector<double> weighted(static_cast<size_t>(B));
            for (int64_t j = 0; j < B; ++j)
                weighted[static_cast<size_t>(j)] =
                    results[static_cast<size_t>(j)].stoch_colnorm;
            double est = pairwise_sum(weighted) / bn;
            breakdown.tc_estimate = est + pairwise_sum(logdet_slots) / bn;
        } else {
            breakdown.tc_estimate = pairwise_sum(breakdown.l_tc) / bn;
        }
    } else if (!breakdown.l_tc.empty()) {
        breakdown.tc_estimate = pairwise_sum(breakdown.l_tc) / bn;
    }

    return {breakdown.composite, breakdown};
}

}  // namespace eoflow::losses
