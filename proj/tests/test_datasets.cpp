#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "eoflow/datasets.hpp"

using namespace eoflow;
using namespace eoflow::datasets;

namespace {

void write_idx_fixture(const std::string& images, const std::string& labels) {
    // two 2x2 images
    std::ofstream img(images, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
    img.write(reinterpret_cast<const char*>(header), sizeof(header));
    const unsigned char pixels[] = {0, 51, 102, 255, 255, 204, 153, 0};
    img.write(reinterpret_cast<const char*>(pixels), sizeof(pixels));
    img.close();

    std::ofstream lab(labels, std::ios::binary);
    const unsigned char lheader[] = {0, 0, 8, 1, 0, 0, 0, 2};
    lab.write(reinterpret_cast<const char*>(lheader), sizeof(lheader));
    const unsigned char values[] = {7, 3};
    lab.write(reinterpret_cast<const char*>(values), sizeof(values));
}

}  // namespace

TEST_CASE("gaussian_dataset: sample statistics and determinism") {
    auto spec = CovarianceSpec::diagonal({4.0, 1.0});
    Dataset data = gaussian_dataset(2, spec, 100000, 5);
    REQUIRE(data.size() == 100000);

    double mean0 = 0, mean1 = 0;
    for (int64_t i = 0; i < data.size(); ++i) {
        mean0 += data.samples.at(i, 0);
        mean1 += data.samples.at(i, 1);
    }
    mean0 /= data.size();
    mean1 /= data.size();
    CHECK(std::abs(mean0) < 3.0 * std::sqrt(4.0 / 100000));
    CHECK(std::abs(mean1) < 3.0 * std::sqrt(1.0 / 100000));

    double var0 = 0, var1 = 0;
    for (int64_t i = 0; i < data.size(); ++i) {
        var0 += data.samples.at(i, 0) * data.samples.at(i, 0);
        var1 += data.samples.at(i, 1) * data.samples.at(i, 1);
    }
    var0 /= data.size();
    var1 /= data.size();
    // var of sample variance ~ 2 sigma^4 / N
    CHECK(std::abs(var0 - 4.0) < 3.0 * 4.0 * std::sqrt(2.0 / 100000));
    CHECK(std::abs(var1 - 1.0) < 3.0 * 1.0 * std::sqrt(2.0 / 100000));

    Dataset again = gaussian_dataset(2, spec, 100000, 5);
    CHECK(again.samples.values() == data.samples.values());
}

TEST_CASE("ring2d_dataset: radius statistic and rotational symmetry") {
    Dataset ring = ring2d_dataset(50000, 1.0, 0.1, 9);
    double mean_r = 0, cross = 0;
    for (int64_t i = 0; i < ring.size(); ++i) {
        double x = ring.samples.at(i, 0), y = ring.samples.at(i, 1);
        mean_r += std::sqrt(x * x + y * y);
        cross += x * y;
    }
    mean_r /= ring.size();
    cross /= ring.size();
    CHECK(std::abs(mean_r - 1.0) < 0.005);
    CHECK(std::abs(cross) < 0.01);  // covariance off-diagonal vanishes by symmetry

    CHECK_THROWS_AS(ring2d_dataset(0, 1.0, 0.1, 1), config_error);
}

TEST_CASE("entangled_mixture: endpoints, alpha metadata, mean") {
    Dataset proto_a;
    proto_a.samples = Tensor::matrix(1, 3, {1.0, 2.0, 3.0});
    Dataset proto_b;
    proto_b.samples = Tensor::matrix(1, 3, {-1.0, 0.0, 5.0});

    // endpoints of the mixing kernel
    Tensor at0 = mix_rows(proto_a.row(0), proto_b.row(0), 0.0);
    CHECK(at0.values() == proto_b.row(0).values());
    Tensor at1 = mix_rows(proto_a.row(0), proto_b.row(0), 1.0);
    CHECK(at1.values() == proto_a.row(0).values());

    Dataset mixed = entangled_mixture(proto_a, proto_b, 20000, 11);
    REQUIRE(mixed.alpha.size() == 20000);
    // every sample reconstructs from its stored alpha
    for (int64_t i = 0; i < 50; ++i) {
        Tensor want = mix_rows(proto_a.row(0), proto_b.row(0), mixed.alpha[static_cast<size_t>(i)]);
        for (int64_t j = 0; j < 3; ++j) CHECK(mixed.samples.at(i, j) == doctest::Approx(want[j]));
    }
    double mean_alpha = 0;
    for (double a : mixed.alpha) mean_alpha += a;
    mean_alpha /= 20000;
    // mean of U[0,1] = 0.5, std err = 1/sqrt(12 N)
    CHECK(std::abs(mean_alpha - 0.5) < 3.0 / std::sqrt(12.0 * 20000));
}

TEST_CASE("load_idx: fixture round trip, scaling, errors") {
    std::string img = "/tmp/eoflow_idx_images";
    std::string lab = "/tmp/eoflow_idx_labels";
    write_idx_fixture(img, lab);

    Dataset data = load_idx(img, lab);
    CHECK(data.size() == 2);
    CHECK(data.dim() == 4);
    CHECK(data.samples.at(0, 0) == doctest::Approx(0.0));
    CHECK(data.samples.at(0, 3) == doctest::Approx(1.0));  // pixel 255 -> 1.0
    CHECK(data.samples.at(0, 1) == doctest::Approx(51.0 / 255.0));
    REQUIRE(data.labels.size() == 2);
    CHECK(data.labels[0] == 7);
    CHECK(data.labels[1] == 3);

    // wrong magic
    {
        std::fstream f(img, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(3);
        f.put(static_cast<char>(9));
    }
    CHECK_THROWS_WITH_AS(load_idx(img), doctest::Contains("magic"), data_error);

    // truncated payload
    write_idx_fixture(img, lab);
    {
        std::ifstream f(img, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(f)), {});
        std::ofstream g(img, std::ios::binary | std::ios::trunc);
        g.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    }
    CHECK_THROWS_AS(load_idx(img), data_error);

    // count mismatch
    write_idx_fixture(img, lab);
    {
        std::fstream f(lab, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(7);
        f.put(static_cast<char>(1));  // label count = 1
    }
    CHECK_THROWS_WITH_AS(load_idx(img, lab), doctest::Contains("mismatch"), data_error);

    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("inflate: zero-sigma identity, noise statistics, fresh draws, no mutation") {
    Tensor batch = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    std::mt19937_64 rng(13);

    Tensor same = inflate(batch, NoiseConfig(0.0), rng);
    CHECK(same.values() == batch.values());

    Tensor big = Tensor::zeros({2000, 4});
    NoiseConfig cfg(0.3);
    Tensor noisy = inflate(big, cfg, rng);
    double var = 0;
    for (int64_t i = 0; i < noisy.size(); ++i) var += noisy[i] * noisy[i];
    var /= noisy.size();
    CHECK(std::abs(var - 0.09) < 3.0 * 0.09 * std::sqrt(2.0 / 8000));

    // per-call re-inflation produces distinct batches; clean data unchanged
    Tensor noisy2 = inflate(big, cfg, rng);
    CHECK(noisy.values() != noisy2.values());
    for (int64_t i = 0; i < big.size(); ++i) CHECK(big[i] == 0.0);

    CHECK_THROWS_AS(NoiseConfig(-0.1), config_error);
}

TEST_CASE("dataset cache: round trip and format guards") {
    Dataset data = ring2d_dataset(64, 1.0, 0.05, 17);
    std::string path = "/tmp/eoflow_cache.eods";
    save_dataset_cache(data, path);
    Dataset loaded = load_dataset_cache(path);
    CHECK(loaded.samples.values() == data.samples.values());
    CHECK(loaded.dim() == 2);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('Z');
    }
    CHECK_THROWS_WITH_AS(load_dataset_cache(path), doctest::Contains("magic"), data_error);
    std::remove(path.c_str());
}
