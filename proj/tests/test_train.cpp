#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "eoflow/linalg.hpp"
#include "eoflow/metrics.hpp"
#include "eoflow/train.hpp"
#include "test_helpers.hpp"

using namespace eoflow;
using namespace eoflow::training;
using eoflow::testing::random_model;

TEST_CASE("adam_step: zero grad leaves params unchanged up to weight decay") {
    std::vector<Tensor> params = {Tensor::vector({1.0, -2.0})};
    std::vector<Tensor> grads = {Tensor::zeros({2})};
    AdamState state;
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    adam_step(params, grads, state, cfg);
    CHECK(params[0][0] == doctest::Approx(1.0));
    CHECK(params[0][1] == doctest::Approx(-2.0));

    cfg.weight_decay = 0.01;
    adam_step(params, grads, state, cfg);
    CHECK(params[0][0] == doctest::Approx(1.0 * (1 - 0.1 * 0.01)));
}

TEST_CASE("adam_step: first step with constant grad moves by about lr*sign(g)") {
    std::vector<Tensor> params = {Tensor::vector({0.0, 0.0})};
    std::vector<Tensor> grads = {Tensor::vector({0.5, -3.0})};
    AdamState state;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(params, grads, state, cfg);
    CHECK(params[0][0] == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(params[0][1] == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("sample_tc_indices: exact permutation at B=D, coverage, statistics") {
    std::mt19937_64 rng(1);
    auto a = sample_tc_indices(5, 5, rng);
    std::vector<bool> seen(5, false);
    for (int64_t e : a.dim_of_sample) seen[static_cast<size_t>(e)] = true;
    for (bool s : seen) CHECK(s);
    for (int64_t m : a.counts) CHECK(m == 1);

    CHECK_THROWS_AS(sample_tc_indices(3, 5, rng), config_error);

    // B = 2D: E[m_i] = 2; check the empirical mean over many draws
    int64_t draws = 10000;
    std::vector<double> mean_counts(4, 0.0);
    for (int64_t k = 0; k < draws; ++k) {
        auto s = sample_tc_indices(8, 4, rng);
        int64_t total = 0;
        for (int64_t i = 0; i < 4; ++i) {
            mean_counts[static_cast<size_t>(i)] += static_cast<double>(s.counts[static_cast<size_t>(i)]);
            CHECK(s.counts[static_cast<size_t>(i)] >= 1);
            total += s.counts[static_cast<size_t>(i)];
        }
        CHECK(total == 8);
    }
    for (double& m : mean_counts) m /= static_cast<double>(draws);
    // std err of the mean count is below 0.02; use 3 sigma
    for (double m : mean_counts) CHECK(std::abs(m - 2.0) < 0.06);
}

TEST_CASE("train: lambda=0 composite equals the L_ML trace; dense == stochastic") {
    auto data = datasets::ring2d_dataset(512, 1.0, 0.1, 3);
    flow::ModelConfig mc;
    mc.dim = 2;
    mc.n_blocks = 2;
    mc.mlp_width = 8;
    mc.mlp_depth = 1;
    mc.seed = 5;

    TrainConfig tc;
    tc.batch_size = 16;
    tc.steps = 12;
    tc.learning_rate = 1e-3;
    tc.seed = 7;
    tc.log_every = 1;

    flow::FlowModel dense_model = flow::build_model(mc);
    tc.estimator = losses::TcEstimator::dense;
    TrainLog dense_log = train(dense_model, data, tc);

    flow::FlowModel stoch_model = flow::build_model(mc);
    tc.estimator = losses::TcEstimator::stochastic;
    TrainLog stoch_log = train(stoch_model, data, tc);

    REQUIRE(dense_log.records.size() == stoch_log.records.size());
    for (size_t i = 0; i < dense_log.records.size(); ++i) {
        CHECK(dense_log.records[i].composite == dense_log.records[i].l_ml);
        CHECK(dense_log.records[i].composite == stoch_log.records[i].composite);
        CHECK(dense_log.records[i].l_ml == stoch_log.records[i].l_ml);
    }
    // parameters evolved identically
    for (size_t k = 0; k < dense_model.parameters().size(); ++k) {
        CHECK(dense_model.parameters()[k].values() == stoch_model.parameters()[k].values());
    }
}

TEST_CASE("train: bit-reproducible across runs with the same seed and config") {
    auto data = datasets::ring2d_dataset(256, 1.0, 0.1, 11);
    flow::ModelConfig mc;
    mc.dim = 2;
    mc.n_blocks = 1;
    mc.mlp_width = 8;
    mc.mlp_depth = 1;
    mc.seed = 2;

    TrainConfig tc;
    tc.batch_size = 8;
    tc.steps = 10;
    tc.weights.lambda_tc = 0.5;
    tc.seed = 13;

    flow::FlowModel a = flow::build_model(mc);
    train(a, data, tc);
    flow::FlowModel b = flow::build_model(mc);
    train(b, data, tc);
    for (size_t k = 0; k < a.parameters().size(); ++k) {
        CHECK(a.parameters()[k].values() == b.parameters()[k].values());
    }
}

TEST_CASE("train: start_step offsets the logged step counter") {
    auto data = datasets::ring2d_dataset(64, 1.0, 0.1, 17);
    flow::ModelConfig mc;
    mc.dim = 2;
    mc.n_blocks = 1;
    mc.mlp_width = 6;
    mc.mlp_depth = 1;
    flow::FlowModel model = flow::build_model(mc);
    TrainConfig tc;
    tc.batch_size = 4;
    tc.steps = 5;
    tc.log_every = 1;
    tc.start_step = 100;
    TrainLog log = train(model, data, tc);
    REQUIRE(!log.records.empty());
    CHECK(log.records.front().step == 100);
    CHECK(log.records.back().step == 104);
}

TEST_CASE("train: aborts on non-finite loss") {
    datasets::Dataset bad;
    bad.samples = Tensor::matrix(2, 2, {1e308, 1e308, 1e308, 1e308});
    flow::FlowModel model = flow::make_affine_model(Tensor::identity(2), Tensor::zeros({2}));
    TrainConfig tc;
    tc.batch_size = 2;
    tc.steps = 3;
    CHECK_THROWS_AS(train(model, bad, tc), numeric_error);
}

TEST_CASE("train: single affine layer with TC reaches the PCA solution (short run)") {
    // compact version of the appendix-D training oracle
    Tensor rot = Tensor::matrix(2, 2, {std::cos(0.5), -std::sin(0.5), std::sin(0.5), std::cos(0.5)});
    Tensor lam = Tensor::matrix(2, 2, {4, 0, 0, 1});
    Tensor cov = linalg::matmul(linalg::matmul(rot, lam), linalg::transpose(rot));
    auto spec = datasets::CovarianceSpec::full(Tensor::zeros({2}), cov);
    auto data = datasets::gaussian_dataset(2, spec, 8192, 19);

    flow::FlowModel model = flow::build_affine_model(2, 23);
    TrainConfig tc;
    tc.batch_size = 64;
    tc.steps = 1500;
    tc.learning_rate = 0.02;
    tc.weights.lambda_tc = 1.0;
    tc.seed = 29;
    tc.log_every = 100;
    TrainLog log = train(model, data, tc);

    const Tensor& A = model.parameters()[0];
    Tensor aat = linalg::matmul(A, linalg::transpose(A));
    for (int64_t i = 0; i < 4; ++i) {
        CHECK(std::abs(aat[i] - cov[i]) < 0.25);  // covariance matched loosely
    }
    // TC of the learned decoder is near zero (columns near orthogonal)
    Tensor samples = metrics::sample_model(model, 256, 31);
    auto tc_metric = metrics::manifold_total_correlation(model, samples);
    CHECK(tc_metric.mean < 0.02);
}

TEST_CASE("train: stochastic-TC wall-time overhead vs pure ML stays under 6x") {
    auto data = datasets::gaussian_dataset(
        8, datasets::CovarianceSpec::diagonal({4, 3, 2.5, 2, 1.5, 1, 0.7, 0.5}), 1024, 37);
    flow::ModelConfig mc;
    mc.dim = 8;
    mc.n_blocks = 2;
    mc.mlp_width = 16;
    mc.mlp_depth = 1;
    mc.seed = 41;

    TrainConfig base;
    base.batch_size = 32;
    base.steps = 40;
    base.log_every = 1;
    base.seed = 43;

    flow::FlowModel ml_model = flow::build_model(mc);
    TrainLog ml_log = train(ml_model, data, base);

    TrainConfig stoch = base;
    stoch.weights.lambda_tc = 1.0;
    stoch.estimator = losses::TcEstimator::stochastic;
    flow::FlowModel st_model = flow::build_model(mc);
    TrainLog st_log = train(st_model, data, stoch);

    auto mean_ms = [](const TrainLog& log) {
        double acc = 0;
        // skip the first few records (allocator warm-up)
        size_t skip = 5;
        for (size_t i = skip; i < log.records.size(); ++i) acc += log.records[i].ms_per_step;
        return acc / static_cast<double>(log.records.size() - skip);
    };
    double ratio = mean_ms(st_log) / mean_ms(ml_log);
    MESSAGE("stochastic-TC overhead ratio: ", ratio);
    CHECK(ratio < 6.0);
}
