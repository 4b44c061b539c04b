#include "eoflow/linear.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "eoflow/linalg.hpp"
#include "eoflow/losses.hpp"

namespace eoflow::linear {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EMatrix to_eigen(const Tensor& t) {
    return Eigen::Map<const EMatrix>(t.data(), t.rows(), t.cols());
}

Tensor from_eigen(const EMatrix& m) {
    Tensor out = Tensor::zeros({m.rows(), m.cols()});
    Eigen::Map<EMatrix>(out.data(), m.rows(), m.cols()) = m;
    return out;
}

void fix_eigvec_signs(EMatrix& q) {
    for (int64_t j = 0; j < q.cols(); ++j) {
        int64_t arg = 0;
        double best = 0.0;
        for (int64_t i = 0; i < q.rows(); ++i) {
            if (std::abs(q(i, j)) > best) {
                best = std::abs(q(i, j));
                arg = i;
            }
        }
        if (q(arg, j) < 0) q.col(j) = -q.col(j);
    }
}

}  // namespace

PCAResult pca_fit(const Tensor& data) {
    if (data.rank() != 2) throw shape_error("pca_fit: expected N x D data, got " + data.shape_str());
    int64_t n = data.rows(), dim = data.cols();
    if (n < 2) throw config_error("pca_fit: need at least 2 samples");

    EMatrix x = to_eigen(data);
    Eigen::RowVectorXd mean = x.colwise().mean();
    EMatrix centered = x.rowwise() - mean;
    EMatrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<EMatrix> solver(cov);
    if (solver.info() != Eigen::Success) throw numeric_error("pca_fit: eigensolver failed");

    // ascending from Eigen; reorder descending
    Eigen::VectorXd evals = solver.eigenvalues();
    EMatrix evecs = solver.eigenvectors();
    EMatrix q(dim, dim);
    Eigen::VectorXd lam(dim);
    for (int64_t j = 0; j < dim; ++j) {
        lam(j) = evals(dim - 1 - j);
        q.col(j) = evecs.col(dim - 1 - j);
    }
    for (int64_t j = 0; j < dim; ++j) {
        if (lam(j) <= 0.0) {
            throw numeric_error("pca_fit: covariance is not positive definite (eigenvalue " +
                                std::to_string(j) + " = " + std::to_string(lam(j)) + ")");
        }
    }
    fix_eigvec_signs(q);

    PCAResult out;
    out.mean = Tensor::zeros({dim});
    for (int64_t i = 0; i < dim; ++i) out.mean[i] = mean(i);
    out.eigvecs = from_eigen(q);
    out.eigvals = Tensor::zeros({dim});
    for (int64_t i = 0; i < dim; ++i) out.eigvals[i] = lam(i);
    return out;
}

Tensor LinearFlow::encode(const Tensor& x) const {
    Tensor shifted = Tensor::zeros({x.size()});
    for (int64_t i = 0; i < x.size(); ++i) shifted[i] = x[i] - b[i];
    return linalg::matvec(A_inv, shifted);
}

Tensor LinearFlow::decode(const Tensor& z) const {
    Tensor out = linalg::matvec(A, z);
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

LinearFlow make_linear_flow(Tensor A, Tensor b) {
    if (A.rank() != 2 || A.rows() != A.cols()) {
        throw config_error("make_linear_flow: A must be square, got " + A.shape_str());
    }
    if (b.rank() != 1 || b.extent(0) != A.rows()) {
        throw config_error("make_linear_flow: b shape " + b.shape_str() + " does not match A");
    }
    int64_t dim = A.rows();
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(A), Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(dim - 1) <= 0.0) {
        throw numeric_error("make_linear_flow: A is singular");
    }
    LinearFlow lf;
    lf.A = std::move(A);
    lf.b = std::move(b);
    lf.U = from_eigen(svd.matrixU());
    lf.V = from_eigen(svd.matrixV());
    lf.S = Tensor::zeros({dim});
    for (int64_t i = 0; i < dim; ++i) lf.S[i] = svd.singularValues()(i);
    lf.A_inv = linalg::inverse(lf.A);
    return lf;
}

LinearFlow linear_flow_from_pca(const PCAResult& pca) {
    int64_t dim = pca.eigvals.size();
    Tensor A = Tensor::zeros({dim, dim});
    for (int64_t i = 0; i < dim; ++i) {
        for (int64_t j = 0; j < dim; ++j) {
            A.at(i, j) = pca.eigvecs.at(i, j) * std::sqrt(pca.eigvals[j]);
        }
    }
    return make_linear_flow(std::move(A), pca.mean);
}

double linear_ml_loss(const Tensor& A, const Tensor& b, const Tensor& mu, const Tensor& Sigma) {
    int64_t dim = A.rows();
    EMatrix a = to_eigen(A);
    EMatrix cov_model = a * a.transpose();
    Eigen::PartialPivLU<EMatrix> lu(cov_model);
    EMatrix cov_inv = lu.inverse();
    Eigen::VectorXd diff(dim);
    for (int64_t i = 0; i < dim; ++i) diff(i) = mu[i] - b[i];
    double quad = diff.transpose() * cov_inv * diff;
    double trace = (cov_inv * to_eigen(Sigma)).trace();
    double logdet_a = linalg::log_abs_det(A);
    return 0.5 * (trace + quad + 2.0 * logdet_a +
                  static_cast<double>(dim) * losses::kLog2Pi);
}

double linear_tc_loss(const Tensor& A) {
    int64_t dim = A.rows();
    Eigen::JacobiSVD<EMatrix> svd(to_eigen(A), Eigen::ComputeFullV);
    Eigen::VectorXd s = svd.singularValues();
    if (s(dim - 1) <= 0.0) throw numeric_error("linear_tc_loss: A is singular");
    EMatrix v = svd.matrixV();
    double acc = 0.0;
    for (int64_t i = 0; i < dim; ++i) {
        double row = 0.0;
        for (int64_t j = 0; j < dim; ++j) row += v(i, j) * v(i, j) * s(j) * s(j);
        acc += std::log(row) - 2.0 * std::log(s(i));
    }
    return 0.5 * acc;
}

double linear_subspace_entropy(const Tensor& A, const IndexSet& S) {
    int64_t dim = A.rows();
    if (S.empty()) throw config_error("linear_subspace_entropy: empty index set");
    if (S.max_index() >= dim) {
        throw config_error("linear_subspace_entropy: index set " + S.str() +
                           " out of range for D=" + std::to_string(dim));
    }
    int64_t k = S.size();
    // Gram of the selected columns: A_S^T A_S == U_S^T Lambda U_S
    EMatrix a = to_eigen(A);
    EMatrix cols(dim, k);
    int64_t c = 0;
    for (int64_t j : S.indices()) cols.col(c++) = a.col(j);
    EMatrix gram = cols.transpose() * cols;
    Eigen::LLT<EMatrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw numeric_error("linear_subspace_entropy: rank-deficient column subset " + S.str());
    }
    double half_logdet = 0.0;
    EMatrix l = llt.matrixL();
    for (int64_t i = 0; i < k; ++i) half_logdet += std::log(l(i, i));
    double kd = static_cast<double>(k);
    return 0.5 * kd + half_logdet + 0.5 * kd * losses::kLog2Pi;
}

double linear_nested_compression_loss(const Tensor& A, const std::vector<double>& tail_weights) {
    int64_t dim = A.rows();
    if (static_cast<int64_t>(tail_weights.size()) != dim - 1) {
        throw config_error("linear_nested_compression_loss: expected D-1 tail weights");
    }
    double acc = 0.0;
    for (int64_t c = 1; c <= dim - 1; ++c) {
        double w = tail_weights[static_cast<size_t>(c - 1)];
        if (w <= 0) throw config_error("linear_nested_compression_loss: weights must be positive");
        acc += w * linear_subspace_entropy(A, IndexSet::range(c, dim));
    }
    return acc;
}

CompressionReconReport verify_compression_equals_reconstruction(double sigma, int64_t dim,
                                                                int64_t core_dim, uint64_t seed,
                                                                int64_t n_points,
                                                                double tolerance) {
    if (sigma <= 0) throw config_error("verify_compression: sigma must be positive");
    if (core_dim < 1 || core_dim >= dim) {
        throw config_error("verify_compression: need 1 <= core_dim < D");
    }
    std::mt19937_64 rng(seed);
    int64_t detail_dim = dim - core_dim;

    // decoder g(z) = M z_C + m + sigma * U_D z_D with U_D semi-orthonormal
    Tensor ortho = linalg::random_orthogonal(dim, rng);
    Tensor M = linalg::gaussian({dim, core_dim}, rng);
    Tensor m = linalg::gaussian({dim}, rng);
    Tensor A = Tensor::zeros({dim, dim});
    for (int64_t i = 0; i < dim; ++i) {
        for (int64_t j = 0; j < core_dim; ++j) A.at(i, j) = M.at(i, j);
        for (int64_t j = 0; j < detail_dim; ++j) {
            A.at(i, core_dim + j) = sigma * ortho.at(i, core_dim + j);
        }
    }
    flow::FlowModel model = flow::make_affine_model(A, m);
    IndexSet detail = IndexSet::range(core_dim, dim);

    CompressionReconReport report;
    report.n_points = n_points;
    report.tolerance = tolerance;
    double worst = 0.0;
    for (int64_t p = 0; p < n_points; ++p) {
        Tensor x = linalg::gaussian({dim}, rng, 2.0);
        double l_detail = losses::pointwise_manifold_entropy(model, x, detail);

        // reconstruction through the zeroed-detail bottleneck
        auto enc = model.encode(x);
        Tensor z = enc.value;
        for (int64_t i = core_dim; i < dim; ++i) z[i] = 0.0;
        Tensor recon = model.decode(z).value;
        double sq = 0.0;
        for (int64_t i = 0; i < dim; ++i) sq += (x[i] - recon[i]) * (x[i] - recon[i]);
        double rhs = sq / (2.0 * sigma * sigma) +
                     static_cast<double>(detail_dim) * std::log(sigma) +
                     0.5 * static_cast<double>(detail_dim) * losses::kLog2Pi;
        worst = std::max(worst, std::abs(l_detail - rhs));
    }
    report.max_abs_residual = worst;
    report.passed = worst < tolerance;
    return report;
}

flow::FlowModel wrap_linear_flow(const LinearFlow& lf) {
    return flow::make_affine_model(lf.A, lf.b);
}

}  // namespace eoflow::linear
