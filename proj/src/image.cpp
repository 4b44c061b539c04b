#include "eoflow/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "eoflow/errors.hpp"

namespace eoflow::image {

namespace {

constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_window(int64_t w, double sigma) {
    std::vector<double> k(static_cast<size_t>(w * w));
    double c = (static_cast<double>(w) - 1.0) / 2.0;
    double total = 0.0;
    for (int64_t i = 0; i < w; ++i) {
        for (int64_t j = 0; j < w; ++j) {
            double dy = static_cast<double>(i) - c;
            double dx = static_cast<double>(j) - c;
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[static_cast<size_t>(i * w + j)] = v;
            total += v;
        }
    }
    for (double& v : k) v /= total;
    return k;
}

void check_image(const Tensor& img, int64_t rows, int64_t cols, int64_t channels,
                 const char* what) {
    if (img.size() != rows * cols * channels) {
        throw shape_error(std::string(what) + ": image size " + std::to_string(img.size()) +
                          " does not match " + std::to_string(rows) + "x" +
                          std::to_string(cols) +
                          (channels == 3 ? "x3" : ""));
    }
}

void write_pnm(const std::string& path, const Tensor& img, int64_t rows, int64_t cols,
               int64_t channels, bool normalize) {
    check_image(img, rows, cols, channels, channels == 3 ? "write_ppm" : "write_pgm");
    double lo = 0.0, hi = 1.0;
    if (normalize) {
        lo = img[0];
        hi = img[0];
        for (int64_t i = 0; i < img.size(); ++i) {
            lo = std::min(lo, img[i]);
            hi = std::max(hi, img[i]);
        }
        if (hi <= lo) hi = lo + 1.0;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("image export: cannot open '" + path + "'");
    out << (channels == 3 ? "P6" : "P5") << "\n" << cols << " " << rows << "\n255\n";
    for (int64_t i = 0; i < img.size(); ++i) {
        double v = (img[i] - lo) / (hi - lo);
        v = std::clamp(v, 0.0, 1.0);
        out.put(static_cast<char>(std::lround(v * 255.0)));
    }
    if (!out) throw data_error("image export: write failed for '" + path + "'");
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw shape_error("mse: shapes " + a.shape_str() + " vs " + b.shape_str());
    }
    double acc = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value, double peak) {
    if (mse_value < 0) throw config_error("psnr: negative mse");
    if (mse_value == 0.0) return 99.0;
    double db = 10.0 * std::log10(peak * peak / mse_value);
    return std::min(db, 99.0);
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
    return psnr_from_mse(mse(a, b), peak);
}

double ssim(const Tensor& a, const Tensor& b, int64_t rows, int64_t cols) {
    check_image(a, rows, cols, 1, "ssim");
    check_image(b, rows, cols, 1, "ssim");
    int64_t w = std::min<int64_t>(7, std::min(rows, cols));
    if (w % 2 == 0) w -= 1;
    if (w < 1) w = 1;
    std::vector<double> kernel = gaussian_window(w, 1.5);

    const double c1 = kK1 * kK1;
    const double c2 = kK2 * kK2;
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t y = 0; y + w <= rows; ++y) {
        for (int64_t x = 0; x + w <= cols; ++x) {
            double ma = 0, mb = 0;
            for (int64_t i = 0; i < w; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    double k = kernel[static_cast<size_t>(i * w + j)];
                    ma += k * a[(y + i) * cols + (x + j)];
                    mb += k * b[(y + i) * cols + (x + j)];
                }
            }
            double va = 0, vb = 0, cab = 0;
            for (int64_t i = 0; i < w; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    double k = kernel[static_cast<size_t>(i * w + j)];
                    double da = a[(y + i) * cols + (x + j)] - ma;
                    double db = b[(y + i) * cols + (x + j)] - mb;
                    va += k * da * da;
                    vb += k * db * db;
                    cab += k * da * db;
                }
            }
            double num = (2 * ma * mb + c1) * (2 * cab + c2);
            double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

void write_pgm(const std::string& path, const Tensor& img, int64_t rows, int64_t cols,
               bool normalize) {
    write_pnm(path, img, rows, cols, 1, normalize);
}

void write_ppm(const std::string& path, const Tensor& img, int64_t rows, int64_t cols,
               bool normalize) {
    write_pnm(path, img, rows, cols, 3, normalize);
}

}  // namespace eoflow::image
