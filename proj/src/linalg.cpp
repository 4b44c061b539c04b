#include "eoflow/linalg.hpp"

#include <Eigen/Dense>

#include "eoflow/errors.hpp"

namespace eoflow::linalg {

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
}  // namespace

Tensor random_orthogonal(int64_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    EMatrix m(dim, dim);
    for (int64_t i = 0; i < dim; ++i)
        for (int64_t j = 0; j < dim; ++j) m(i, j) = dist(rng);
    Eigen::HouseholderQR<EMatrix> qr(m);
    EMatrix q = qr.householderQ();
    EMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int64_t j = 0; j < dim; ++j) {
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return from_eigen(q);
}

Tensor gaussian(std::vector<int64_t> shape, std::mt19937_64& rng, double scl) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, scl);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) { return from_eigen(to_eigen(a) * to_eigen(b)); }

Tensor matvec(const Tensor& a, const Tensor& x) {
    if (a.cols() != x.size()) {
        throw shape_error("matvec: " + a.shape_str() + " vs " + x.shape_str());
    }
    Tensor out = Tensor::zeros({a.rows()});
    Eigen::Map<Eigen::VectorXd>(out.data(), a.rows()) =
        to_eigen(a) * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    return out;
}

Tensor transpose(const Tensor& a) { return from_eigen(to_eigen(a).transpose()); }

Tensor inverse(const Tensor& a) {
    Eigen::PartialPivLU<EMatrix> lu(to_eigen(a));
    double det = lu.determinant();
    if (det == 0.0 || !std::isfinite(det)) throw numeric_error("inverse: singular matrix");
    return from_eigen(lu.inverse());
}

double log_abs_det(const Tensor& a) {
    Eigen::PartialPivLU<EMatrix> lu(to_eigen(a));
    double acc = 0.0;
    for (int64_t i = 0; i < a.rows(); ++i) {
        double u = lu.matrixLU()(i, i);
        if (u == 0.0 || !std::isfinite(u)) throw numeric_error("log_abs_det: singular matrix");
        acc += std::log(std::abs(u));
    }
    return acc;
}

Tensor cholesky(const Tensor& a) {
    Eigen::LLT<EMatrix> llt(to_eigen(a));
    if (llt.info() != Eigen::Success) {
        throw numeric_error("cholesky: matrix is not positive definite");
    }
    return from_eigen(EMatrix(llt.matrixL()));
}

}  // namespace eoflow::linalg
