#ifndef EOFLOW_IMAGE_HPP
#define EOFLOW_IMAGE_HPP

#include <cstdint>
#include <string>

#include "eoflow/tensor.hpp"

namespace eoflow::image {

double mse(const Tensor& a, const Tensor& b);

// 10 log10(peak^2 / mse), capped at 99 dB (identical inputs hit the cap).
double psnr_from_mse(double mse_value, double peak = 1.0);
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Structural similarity with a Gaussian window (7x7, sigma 1.5, K1=0.01,
// K2=0.03, dynamic range 1), averaged over valid window positions. The
// window shrinks to fit images smaller than 7 pixels per side.
double ssim(const Tensor& a, const Tensor& b, int64_t rows, int64_t cols);

// 8-bit binary PGM (grayscale) / PPM (3-channel) export. With normalize the
// values are affinely mapped from [min,max] to [0,255] per image; otherwise
// they are clamped to [0,1] and scaled.
void write_pgm(const std::string& path, const Tensor& img, int64_t rows, int64_t cols,
               bool normalize);
void write_ppm(const std::string& path, const Tensor& img, int64_t rows, int64_t cols,
               bool normalize);

}  // namespace eoflow::image

#endif
