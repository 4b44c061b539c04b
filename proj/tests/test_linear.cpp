#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "eoflow/linalg.hpp"
#include "eoflow/linear.hpp"
#include "eoflow/losses.hpp"
#include "oracles.hpp"

using namespace eoflow;
using namespace eoflow::linear;

namespace {

constexpr double kLog2 = 0.6931471805599453;
using losses::kLog2Pi;

Tensor rotation2d(double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return Tensor::matrix(2, 2, {c, -s, s, c});
}

Tensor gaussian_samples(const Tensor& mean, const Tensor& cov, int64_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    int64_t dim = mean.size();
    Tensor chol = linalg::cholesky(cov);
    Tensor out = Tensor::zeros({n, dim});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int64_t i = 0; i < n; ++i) {
        Tensor z = Tensor::zeros({dim});
        for (int64_t j = 0; j < dim; ++j) z[j] = dist(rng);
        Tensor x = linalg::matvec(chol, z);
        for (int64_t j = 0; j < dim; ++j) out.at(i, j) = x[j] + mean[j];
    }
    return out;
}

}  // namespace

TEST_CASE("pca_fit recovers a diagonal covariance within sampling error") {
    Tensor cov = Tensor::matrix(2, 2, {4, 0, 0, 1});
    Tensor data = gaussian_samples(Tensor::zeros({2}), cov, 100000, 1);
    PCAResult pca = pca_fit(data);
    // eigenvalue std err ~ lambda*sqrt(2/N)
    CHECK(std::abs(pca.eigvals[0] - 4.0) < 3.0 * 4.0 * std::sqrt(2.0 / 100000));
    CHECK(std::abs(pca.eigvals[1] - 1.0) < 3.0 * 1.0 * std::sqrt(2.0 / 100000));
    // eigenvectors close to axes up to sign (sign convention: positive pivot)
    CHECK(std::abs(std::abs(pca.eigvecs.at(0, 0)) - 1.0) < 0.01);
    CHECK(pca.eigvecs.at(0, 0) > 0);
    // zero-mean check
    CHECK(std::abs(pca.mean[0]) < 0.05);
    CHECK(std::abs(pca.mean[1]) < 0.05);
}

TEST_CASE("pca_fit on pre-whitened data gives unit eigenvalues; determinism") {
    Tensor data = gaussian_samples(Tensor::zeros({3}), Tensor::identity(3), 60000, 2);
    PCAResult pca = pca_fit(data);
    for (int64_t i = 0; i < 3; ++i) CHECK(std::abs(pca.eigvals[i] - 1.0) < 0.05);

    PCAResult again = pca_fit(data);
    CHECK(again.eigvals.values() == pca.eigvals.values());
    CHECK(again.eigvecs.values() == pca.eigvecs.values());
}

TEST_CASE("pca_fit recovers a constructed rotated eigenbasis up to sign") {
    // Sigma = R(30 deg) diag(4,1) R^T, built exactly; feed synthetic samples
    Tensor rot = rotation2d(M_PI / 6);
    Tensor lam = Tensor::matrix(2, 2, {4, 0, 0, 1});
    Tensor cov = linalg::matmul(linalg::matmul(rot, lam), linalg::transpose(rot));
    Tensor data = gaussian_samples(Tensor::zeros({2}), cov, 200000, 3);
    PCAResult pca = pca_fit(data);
    for (int64_t j = 0; j < 2; ++j) {
        double dot = 0;
        for (int64_t i = 0; i < 2; ++i) dot += pca.eigvecs.at(i, j) * rot.at(i, j);
        CHECK(std::abs(std::abs(dot) - 1.0) < 0.01);
    }
}

TEST_CASE("pca_fit rejects degenerate covariance") {
    // rank-deficient data: second column constant
    Tensor data = Tensor::zeros({100, 2});
    std::mt19937_64 rng(4);
    std::normal_distribution<double> dist;
    for (int64_t i = 0; i < 100; ++i) data.at(i, 0) = dist(rng);
    CHECK_THROWS_WITH_AS(pca_fit(data), doctest::Contains("eigenvalue"), numeric_error);
}

TEST_CASE("linear_flow_from_pca: AA^T reconstructs covariance; encoder whitens") {
    Tensor cov = Tensor::matrix(2, 2, {4, 0, 0, 1});
    PCAResult pca;
    pca.mean = Tensor::vector({1.0, -2.0});
    pca.eigvecs = Tensor::identity(2);
    pca.eigvals = Tensor::vector({4.0, 1.0});
    LinearFlow lf = linear_flow_from_pca(pca);
    CHECK(lf.A.at(0, 0) == doctest::Approx(2.0));
    CHECK(lf.A.at(1, 1) == doctest::Approx(1.0));

    Tensor aat = linalg::matmul(lf.A, linalg::transpose(lf.A));
    for (int64_t i = 0; i < 4; ++i) CHECK(std::abs(aat[i] - cov[i]) < 1e-8);

    // encoder equals the whitening transform Lambda^{-1/2} Q^T (x - mu)
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor x = oracle::random_tensor({2}, rng, 3.0);
        Tensor z = lf.encode(x);
        CHECK(std::abs(z[0] - (x[0] - 1.0) / 2.0) < 1e-10);
        CHECK(std::abs(z[1] - (x[1] + 2.0) / 1.0) < 1e-10);
        // round trip
        Tensor back = lf.decode(z);
        CHECK(std::abs(back[0] - x[0]) < 1e-10);
        CHECK(std::abs(back[1] - x[1]) < 1e-10);
    }
}

TEST_CASE("linear_ml_loss: optimum value and local optimality probe") {
    // D=1 identity: 0.5 (1 + log 2pi)
    CHECK(linear_ml_loss(Tensor::identity(1), Tensor::zeros({1}), Tensor::zeros({1}),
                         Tensor::identity(1)) ==
          doctest::Approx(0.5 * (1.0 + kLog2Pi)).epsilon(1e-12));

    std::mt19937_64 rng(6);
    Tensor rot = rotation2d(0.37);
    Tensor lam = Tensor::matrix(2, 2, {3, 0, 0, 0.5});
    Tensor cov = linalg::matmul(linalg::matmul(rot, lam), linalg::transpose(rot));
    Tensor mu = Tensor::vector({0.3, -0.8});

    // optimum A with AA^T = Sigma
    Tensor chol = linalg::cholesky(cov);
    double opt = linear_ml_loss(chol, mu, mu, cov);
    double want = 0.5 * (2.0 + std::log(3.0 * 0.5) + 2.0 * kLog2Pi);
    CHECK(opt == doctest::Approx(want).epsilon(1e-10));

    // perturbing A (or b) off the optimum strictly increases the loss
    for (int rep = 0; rep < 100; ++rep) {
        Tensor pa = chol;
        Tensor pb = mu;
        Tensor na = oracle::random_tensor({2, 2}, rng, 0.05);
        Tensor nb = oracle::random_tensor({2}, rng, 0.05);
        for (int64_t i = 0; i < 4; ++i) pa[i] += na[i];
        for (int64_t i = 0; i < 2; ++i) pb[i] += nb[i];
        CHECK(linear_ml_loss(pa, pb, mu, cov) > opt - 1e-12);
    }
}

TEST_CASE("linear_tc_loss: PCA solution zero, rotated solution closed form, invariances") {
    Tensor lam_sqrt = Tensor::matrix(2, 2, {2, 0, 0, 1});
    Tensor q = rotation2d(0.71);
    Tensor a_pca = linalg::matmul(q, lam_sqrt);
    CHECK(std::abs(linear_tc_loss(a_pca)) < 1e-12);

    // A = Q Lambda^{1/2} R(45 deg), Lambda = diag(4, 1)
    Tensor a_rot = linalg::matmul(a_pca, rotation2d(M_PI / 4));
    double want = 0.5 * (std::log(5.0 / 8.0) + std::log(5.0 / 2.0));
    CHECK(linear_tc_loss(a_rot) == doctest::Approx(want).epsilon(1e-10));
    CHECK(want == doctest::Approx(0.223144).epsilon(1e-5));

    // invariance under left-multiplication by any orthogonal matrix
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor o = linalg::random_orthogonal(2, rng);
        CHECK(linear_tc_loss(linalg::matmul(o, a_rot)) ==
              doctest::Approx(linear_tc_loss(a_rot)).epsilon(1e-10));
    }

    // nonnegative with equality iff signed permutation (Jensen-gap probe)
    for (int rep = 0; rep < 20; ++rep) {
        Tensor r = linalg::random_orthogonal(3, rng);
        Tensor s = Tensor::matrix(3, 3, {1.7, 0, 0, 0, 0.9, 0, 0, 0, 0.4});
        double tc = linear_tc_loss(linalg::matmul(s, r));
        CHECK(tc >= -1e-12);
    }
    // signed permutation: zero
    Tensor sp = Tensor::matrix(3, 3, {0, -3, 0, 2, 0, 0, 0, 0, 0.5});
    CHECK(std::abs(linear_tc_loss(sp)) < 1e-12);
}

TEST_CASE("linear_subspace_entropy: extrema over random rotations and full-set value") {
    std::mt19937_64 rng(8);
    Tensor lam_sqrt = Tensor::matrix(3, 3, {2, 0, 0, 0, std::sqrt(2.0), 0, 0, 0, 1});
    Tensor q = linalg::random_orthogonal(3, rng);
    Tensor base = linalg::matmul(q, lam_sqrt);  // A = Q Lambda^{1/2}, R = I

    IndexSet detail = IndexSet::range(1, 3);  // tail of size 2
    IndexSet core = IndexSet::range(0, 1);
    double aligned_detail = linear_subspace_entropy(base, detail);
    double aligned_core = linear_subspace_entropy(base, core);
    for (int rep = 0; rep < 1000; ++rep) {
        Tensor r = linalg::random_orthogonal(3, rng);
        Tensor a = linalg::matmul(base, r);
        CHECK(linear_subspace_entropy(a, detail) >= aligned_detail - 1e-9);
        CHECK(linear_subspace_entropy(a, core) <= aligned_core + 1e-9);
    }

    // S = everything: 0.5 log|Lambda| + D/2 + (D/2) log 2pi
    double full = linear_subspace_entropy(base, IndexSet::full(3));
    CHECK(full == doctest::Approx(0.5 * std::log(4.0 * 2.0 * 1.0) + 1.5 + 1.5 * kLog2Pi)
                      .epsilon(1e-10));
}

TEST_CASE("nested compression: descending order wins all 6 permutations at D=3") {
    std::mt19937_64 rng(9);
    Tensor q = linalg::random_orthogonal(3, rng);
    Tensor lam_sqrt = Tensor::matrix(3, 3, {2, 0, 0, 0, std::sqrt(2.0), 0, 0, 0, 1});
    Tensor base = linalg::matmul(q, lam_sqrt);

    std::vector<std::vector<int64_t>> perms = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                               {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    std::vector<double> weights = {1.0, 1.0};
    double best = 1e300;
    size_t best_idx = 99;
    std::vector<double> values;
    for (size_t p = 0; p < perms.size(); ++p) {
        Tensor pm = Tensor::zeros({3, 3});
        for (int64_t i = 0; i < 3; ++i) pm.at(perms[p][static_cast<size_t>(i)], i) = 1.0;
        double v = linear_nested_compression_loss(linalg::matmul(base, pm), weights);
        values.push_back(v);
        if (v < best) {
            best = v;
            best_idx = p;
        }
    }
    CHECK(best_idx == 0);  // identity = descending eigenvalue order

    // weight rescaling preserves the argmin
    std::vector<double> scaled = {7.0, 7.0};
    for (size_t p = 1; p < perms.size(); ++p) {
        Tensor pm = Tensor::zeros({3, 3});
        for (int64_t i = 0; i < 3; ++i) pm.at(perms[p][static_cast<size_t>(i)], i) = 1.0;
        Tensor a = linalg::matmul(base, pm);
        Tensor id = linalg::matmul(base, Tensor::identity(3));
        CHECK(linear_nested_compression_loss(a, scaled) >=
              linear_nested_compression_loss(id, scaled) - 1e-9);
    }

    // equal eigenvalues: permutation invariant
    Tensor iso = linalg::matmul(q, Tensor::matrix(3, 3, {1.3, 0, 0, 0, 1.3, 0, 0, 0, 1.3}));
    double ref = linear_nested_compression_loss(iso, weights);
    for (size_t p = 1; p < perms.size(); ++p) {
        Tensor pm = Tensor::zeros({3, 3});
        for (int64_t i = 0; i < 3; ++i) pm.at(perms[p][static_cast<size_t>(i)], i) = 1.0;
        CHECK(linear_nested_compression_loss(linalg::matmul(iso, pm), weights) ==
              doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("appendix-B witness: compression loss equals scaled reconstruction loss") {
    auto report = verify_compression_equals_reconstruction(0.5, 6, 2, 42, 200, 1e-8);
    CHECK(report.passed);
    CHECK(report.max_abs_residual < 1e-8);

    // sigma = 1, x on the manifold (z_D = 0): L_D equals the additive constant
    std::mt19937_64 rng(10);
    Tensor ortho = linalg::random_orthogonal(4, rng);
    Tensor A = Tensor::zeros({4, 4});
    Tensor M = linalg::gaussian({4, 2}, rng);
    for (int64_t i = 0; i < 4; ++i) {
        A.at(i, 0) = M.at(i, 0);
        A.at(i, 1) = M.at(i, 1);
        A.at(i, 2) = ortho.at(i, 2);
        A.at(i, 3) = ortho.at(i, 3);
    }
    flow::FlowModel model = flow::make_affine_model(A, Tensor::zeros({4}));
    Tensor z = Tensor::vector({0.7, -0.4, 0.0, 0.0});
    Tensor x_on = model.decode(z).value;
    double l_detail = losses::pointwise_manifold_entropy(model, x_on, IndexSet::range(2, 4));
    CHECK(l_detail == doctest::Approx(kLog2Pi).epsilon(1e-8));  // 0 + (2/2) log 2pi

    // quadratic homogeneity: doubling the detail residual quadruples the
    // quadratic part of L_D (here sigma = 1, so L_D - const = 0.5||r||^2)
    auto residual_sq = [&](double t) {
        Tensor zz = Tensor::vector({0.7, -0.4, t, 2 * t});
        Tensor x = model.decode(zz).value;
        auto enc = model.encode(x);
        Tensor zc = enc.value;
        zc[2] = zc[3] = 0.0;
        Tensor rec = model.decode(zc).value;
        double sq = 0;
        for (int64_t i = 0; i < 4; ++i) sq += (x[i] - rec[i]) * (x[i] - rec[i]);
        return sq;
    };
    CHECK(residual_sq(0.6) == doctest::Approx(4.0 * residual_sq(0.3)).epsilon(1e-9));
}

TEST_CASE("cross-module oracle: nonlinear losses on wrapped linear flows match closed forms") {
    std::mt19937_64 rng(11);
    Tensor q = linalg::random_orthogonal(3, rng);
    Tensor lam_sqrt = Tensor::matrix(3, 3, {2, 0, 0, 0, std::sqrt(2.0), 0, 0, 0, 1});
    Tensor r = linalg::random_orthogonal(3, rng);
    Tensor A = linalg::matmul(linalg::matmul(q, lam_sqrt), r);
    Tensor b = Tensor::vector({0.4, -1.2, 0.9});
    flow::FlowModel wrapped = flow::make_affine_model(A, b);

    // TC: pointwise TC is x-independent for affine decoders and equals the
    // closed form exactly
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = oracle::random_tensor({3}, rng, 2.0);
        CHECK(std::abs(losses::pointwise_total_correlation(wrapped, x) - linear_tc_loss(A)) <
              1e-8);
    }

    // ML: pointwise nll equals the closed-form Gaussian N(b, AA^T) density
    Tensor cov_model = linalg::matmul(A, linalg::transpose(A));
    Tensor cov_inv = linalg::inverse(cov_model);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = oracle::random_tensor({3}, rng, 2.0);
        Tensor d = Tensor::zeros({3});
        for (int64_t i = 0; i < 3; ++i) d[i] = x[i] - b[i];
        double quad = 0;
        for (int64_t i = 0; i < 3; ++i)
            for (int64_t j = 0; j < 3; ++j) quad += d[i] * cov_inv.at(i, j) * d[j];
        double want = 0.5 * quad + 0.5 * linalg::log_abs_det(cov_model) + 1.5 * kLog2Pi;
        CHECK(std::abs(losses::nll_ml(wrapped, x) - want) < 1e-8);
    }

    // subspace entropy: the x-independent part matches linear_subspace_entropy
    for (const IndexSet& S : {IndexSet::single(1), IndexSet::range(0, 2), IndexSet::full(3)}) {
        Tensor x = oracle::random_tensor({3}, rng, 2.0);
        double pointwise = losses::pointwise_manifold_entropy(wrapped, x, S);
        Tensor z = wrapped.encode(x).value;
        double half_sq = 0;
        for (int64_t i : S.indices()) half_sq += 0.5 * z[i] * z[i];
        double jac_part = pointwise - half_sq;  // log|J_S| + const
        double closed = linear_subspace_entropy(A, S);
        CHECK(std::abs((jac_part + 0.5 * static_cast<double>(S.size())) - closed) < 1e-8);
    }

    // expectation check: MC mean of nll over covariance-matched samples
    // approaches linear_ml_loss
    Tensor data = gaussian_samples(b, cov_model, 20000, 12);
    double mc = 0;
    for (int64_t i = 0; i < 2000; ++i) mc += losses::nll_ml(wrapped, data.row(i));
    mc /= 2000;
    double closed_ml = linear_ml_loss(A, b, b, cov_model);
    CHECK(std::abs(mc - closed_ml) < 0.1);
}

TEST_CASE("gradient descent on closed-form ML + TC reaches a signed-permutation PCA solution") {
    // D=2 probe of theorems D.3.1 + D.4.1 using finite-difference gradients
    // on the closed forms (independent of the autodiff machinery).
    Tensor lam = Tensor::matrix(2, 2, {4, 0, 0, 1});
    Tensor q = rotation2d(0.6);
    Tensor cov = linalg::matmul(linalg::matmul(q, lam), linalg::transpose(q));
    Tensor mu = Tensor::vector({0.5, -0.25});

    std::mt19937_64 rng(13);
    std::vector<double> theta;  // A flattened + b
    {
        Tensor a0 = Tensor::identity(2);
        Tensor n0 = oracle::random_tensor({2, 2}, rng, 0.3);
        for (int64_t i = 0; i < 4; ++i) theta.push_back(a0[i] + n0[i]);
        theta.push_back(0.0);
        theta.push_back(0.0);
    }
    auto loss = [&](const std::vector<double>& v) {
        Tensor A({2, 2}, {v[0], v[1], v[2], v[3]});
        Tensor b = Tensor::vector({v[4], v[5]});
        return linear_ml_loss(A, b, mu, cov) + 1.0 * linear_tc_loss(A);
    };
    // plain adam on numeric gradients
    std::vector<double> m(6, 0.0), v2(6, 0.0);
    double lr = 0.02;
    for (int step = 1; step <= 4000; ++step) {
        auto g = oracle::fd_gradient(loss, theta, 1e-6);
        for (size_t i = 0; i < 6; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v2[i] = 0.999 * v2[i] + 0.001 * g[i] * g[i];
            double mh = m[i] / (1 - std::pow(0.9, step));
            double vh = v2[i] / (1 - std::pow(0.999, step));
            theta[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    Tensor A({2, 2}, {theta[0], theta[1], theta[2], theta[3]});
    // covariance matching: AA^T ~= Sigma
    Tensor aat = linalg::matmul(A, linalg::transpose(A));
    for (int64_t i = 0; i < 4; ++i) CHECK(std::abs(aat[i] - cov[i]) < 0.01);
    CHECK(std::abs(theta[4] - mu[0]) < 0.01);
    CHECK(std::abs(theta[5] - mu[1]) < 0.01);

    // columns align with scaled eigenvectors up to sign/permutation
    Tensor expected = linalg::matmul(q, Tensor::matrix(2, 2, {2, 0, 0, 1}));
    std::vector<int64_t> used;
    for (int64_t col = 0; col < 2; ++col) {
        double best_cos = 0;
        int64_t best_j = -1;
        for (int64_t j = 0; j < 2; ++j) {
            if (std::find(used.begin(), used.end(), j) != used.end()) continue;
            double dot = 0, na = 0, ne = 0;
            for (int64_t i = 0; i < 2; ++i) {
                dot += A.at(i, col) * expected.at(i, j);
                na += A.at(i, col) * A.at(i, col);
                ne += expected.at(i, j) * expected.at(i, j);
            }
            double c = std::abs(dot) / std::sqrt(na * ne);
            if (c > best_cos) {
                best_cos = c;
                best_j = j;
            }
        }
        used.push_back(best_j);
        CHECK(best_cos > 0.99);
    }
}
