#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "eoflow/image.hpp"

using namespace eoflow;
using namespace eoflow::image;

TEST_CASE("psnr: identical capped at 99 dB, known mse gives 20 dB, symmetric") {
    Tensor a = Tensor::vector({0.1, 0.5, 0.9, 0.3});
    CHECK(psnr(a, a) == doctest::Approx(99.0));

    // MSE = 0.01 on [0,1] -> 20 dB
    CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0));

    Tensor b = Tensor::vector({0.2, 0.4, 0.8, 0.35});
    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)));
}

TEST_CASE("ssim: identical images 1.0, inverted checkerboard far below") {
    int64_t rows = 16, cols = 16;
    Tensor a = Tensor::zeros({rows * cols});
    for (int64_t y = 0; y < rows; ++y)
        for (int64_t x = 0; x < cols; ++x) a[y * cols + x] = ((x + y) % 2) ? 1.0 : 0.0;
    CHECK(ssim(a, a, rows, cols) == doctest::Approx(1.0));

    Tensor inv = Tensor::zeros({rows * cols});
    for (int64_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - a[i];
    CHECK(ssim(a, inv, rows, cols) < 0.1);

    // small images: window shrinks instead of failing
    Tensor tiny = Tensor::vector({0.1, 0.9, 0.4, 0.6});
    CHECK(ssim(tiny, tiny, 2, 2) == doctest::Approx(1.0));
}

TEST_CASE("pgm export: header and payload round trip") {
    Tensor img = Tensor::vector({0.0, 0.25, 0.5, 1.0});
    std::string path = "/tmp/eoflow_test.pgm";
    write_pgm(path, img, 2, 2, false);

    std::ifstream in(path, std::ios::binary);
    std::string magic, dims, maxval;
    std::getline(in, magic);
    std::getline(in, dims);
    std::getline(in, maxval);
    CHECK(magic == "P5");
    CHECK(dims == "2 2");
    CHECK(maxval == "255");
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    CHECK(bytes[0] == 0);
    CHECK(bytes[1] == 64);
    CHECK(bytes[2] == 128);
    CHECK(bytes[3] == 255);
    std::remove(path.c_str());
}

TEST_CASE("pgm export: per-image normalization maps min/max to 0/255") {
    Tensor img = Tensor::vector({-2.0, 0.0, 2.0, 6.0});
    std::string path = "/tmp/eoflow_test_norm.pgm";
    write_pgm(path, img, 2, 2, true);
    std::ifstream in(path, std::ios::binary);
    std::string line;
    for (int i = 0; i < 3; ++i) std::getline(in, line);
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    CHECK(bytes[0] == 0);
    CHECK(bytes[3] == 255);
    std::remove(path.c_str());
}

TEST_CASE("shape validation") {
    Tensor img = Tensor::vector({0.1, 0.2, 0.3});
    CHECK_THROWS_AS(write_pgm("/tmp/x.pgm", img, 2, 2, false), shape_error);
    CHECK_THROWS_AS(ssim(img, img, 2, 2), shape_error);
    CHECK_THROWS_AS(mse(img, Tensor::vector({1, 2})), shape_error);
}
