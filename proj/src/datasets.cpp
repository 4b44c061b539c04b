#include "eoflow/datasets.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "eoflow/binio.hpp"
#include "eoflow/linalg.hpp"

namespace eoflow::datasets {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

uint32_t read_be_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw data_error(std::string(what) + ": truncated header");
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace

CovarianceSpec CovarianceSpec::diagonal(std::vector<double> variances) {
    int64_t dim = static_cast<int64_t>(variances.size());
    CovarianceSpec spec;
    spec.mean = Tensor::zeros({dim});
    spec.cov = Tensor::zeros({dim, dim});
    for (int64_t i = 0; i < dim; ++i) {
        if (variances[static_cast<size_t>(i)] <= 0) {
            throw config_error("CovarianceSpec: variances must be positive");
        }
        spec.cov.at(i, i) = variances[static_cast<size_t>(i)];
    }
    return spec;
}

CovarianceSpec CovarianceSpec::full(Tensor mean, Tensor cov) {
    if (cov.rank() != 2 || cov.rows() != cov.cols() || mean.rank() != 1 ||
        mean.size() != cov.rows()) {
        throw config_error("CovarianceSpec: mean " + mean.shape_str() + " vs cov " +
                           cov.shape_str());
    }
    CovarianceSpec spec;
    spec.mean = std::move(mean);
    spec.cov = std::move(cov);
    return spec;
}

Dataset gaussian_dataset(int64_t dim, const CovarianceSpec& spec, int64_t n, uint64_t seed) {
    if (n < 1) throw config_error("gaussian_dataset: empty dataset requested");
    if (spec.cov.rows() != dim) {
        throw config_error("gaussian_dataset: covariance dimension mismatch");
    }
    Tensor chol = linalg::cholesky(spec.cov);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);

    Dataset out;
    out.name = "gaussian";
    out.samples = Tensor::zeros({n, dim});
    Tensor z = Tensor::zeros({dim});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < dim; ++j) z[j] = dist(rng);
        Tensor x = linalg::matvec(chol, z);
        for (int64_t j = 0; j < dim; ++j) out.samples.at(i, j) = x[j] + spec.mean[j];
    }
    return out;
}

Dataset ring2d_dataset(int64_t n, double radius_mean, double radius_std, uint64_t seed) {
    if (n < 1) throw config_error("ring2d_dataset: empty dataset requested");
    if (radius_std < 0) throw config_error("ring2d_dataset: negative radius std");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> radial(radius_mean, radius_std);
    std::uniform_real_distribution<double> angular(0.0, kTwoPi);

    Dataset out;
    out.name = "ring2d";
    out.samples = Tensor::zeros({n, 2});
    for (int64_t i = 0; i < n; ++i) {
        double r = radial(rng);
        double phi = angular(rng);
        out.samples.at(i, 0) = r * std::cos(phi);
        out.samples.at(i, 1) = r * std::sin(phi);
    }
    return out;
}

Tensor mix_rows(const Tensor& a, const Tensor& b, double alpha) {
    if (!a.same_shape(b)) {
        throw shape_error("mix_rows: shapes " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + (1.0 - alpha) * b[i];
    return out;
}

Dataset entangled_mixture(const Dataset& base_a, const Dataset& base_b, int64_t n,
                          uint64_t seed) {
    if (n < 1) throw config_error("entangled_mixture: empty dataset requested");
    if (base_a.size() < 1 || base_b.size() < 1) {
        throw config_error("entangled_mixture: empty base dataset");
    }
    if (base_a.dim() != base_b.dim()) {
        throw config_error("entangled_mixture: base dimensions differ");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int64_t> pick_a(0, base_a.size() - 1);
    std::uniform_int_distribution<int64_t> pick_b(0, base_b.size() - 1);

    int64_t dim = base_a.dim();
    Dataset out;
    out.name = "entangled_mixture";
    out.samples = Tensor::zeros({n, dim});
    out.alpha.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double alpha = unit(rng);
        Tensor mixed = mix_rows(base_a.row(pick_a(rng)), base_b.row(pick_b(rng)), alpha);
        for (int64_t j = 0; j < dim; ++j) out.samples.at(i, j) = mixed[j];
        out.alpha[static_cast<size_t>(i)] = alpha;
    }
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw data_error("load_idx: cannot open '" + images_path + "'");
    uint32_t magic = read_be_u32(in, "load_idx");
    if (magic != 0x00000803u) {
        throw data_error("load_idx: bad magic in '" + images_path +
                         "' (expected 0x00000803 images)");
    }
    int64_t count = read_be_u32(in, "load_idx");
    int64_t rows = read_be_u32(in, "load_idx");
    int64_t cols = read_be_u32(in, "load_idx");
    int64_t dim = rows * cols;
    if (count < 1 || dim < 1) throw data_error("load_idx: empty image file");

    std::vector<unsigned char> bytes(static_cast<size_t>(count * dim));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw data_error("load_idx: truncated image payload in '" + images_path + "'");

    Dataset out;
    out.name = "idx";
    out.norm_scale = 255.0;
    out.samples = Tensor::zeros({count, dim});
    for (int64_t i = 0; i < count * dim; ++i) {
        out.samples[i] = static_cast<double>(bytes[static_cast<size_t>(i)]) / 255.0;
    }

    if (!labels_path.empty()) {
        std::ifstream lin(labels_path, std::ios::binary);
        if (!lin) throw data_error("load_idx: cannot open '" + labels_path + "'");
        uint32_t lmagic = read_be_u32(lin, "load_idx");
        if (lmagic != 0x00000801u) {
            throw data_error("load_idx: bad magic in '" + labels_path +
                             "' (expected 0x00000801 labels)");
        }
        int64_t lcount = read_be_u32(lin, "load_idx");
        if (lcount != count) {
            throw data_error("load_idx: image/label count mismatch (" + std::to_string(count) +
                             " vs " + std::to_string(lcount) + ")");
        }
        std::vector<unsigned char> lbytes(static_cast<size_t>(lcount));
        lin.read(reinterpret_cast<char*>(lbytes.data()),
                 static_cast<std::streamsize>(lbytes.size()));
        if (!lin) throw data_error("load_idx: truncated label payload");
        out.labels.assign(lbytes.begin(), lbytes.end());
    }
    return out;
}

NoiseConfig::NoiseConfig(double sigma_, uint64_t seed_) : sigma(sigma_), seed(seed_) {
    if (sigma < 0) throw config_error("NoiseConfig: sigma must be non-negative");
}

Tensor inflate(const Tensor& batch, const NoiseConfig& cfg, std::mt19937_64& rng) {
    if (cfg.sigma < 0) throw config_error("inflate: sigma must be non-negative");
    Tensor out = batch;
    if (cfg.sigma == 0.0) return out;
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int64_t i = 0; i < out.size(); ++i) out[i] += cfg.sigma * dist(rng);
    return out;
}

void save_dataset_cache(const Dataset& dataset, const std::string& path) {
    if (dataset.samples.rank() != 2) {
        throw config_error("save_dataset_cache: samples must be N x D");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("dataset cache: cannot open '" + path + "' for writing");
    out.write("EODS", 4);
    binio::put_u32(out, 1);  // version
    binio::put_u32(out, static_cast<uint32_t>(dataset.samples.rows()));
    binio::put_u32(out, static_cast<uint32_t>(dataset.samples.cols()));
    binio::put_tensor_payload(out, dataset.samples);
    if (!out) throw data_error("dataset cache: write failed for '" + path + "'");
}

Dataset load_dataset_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("dataset cache: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EODS", 4) != 0) {
        throw data_error("dataset cache: bad magic in '" + path + "'");
    }
    uint32_t version = binio::get_u32(in, "dataset cache");
    if (version != 1) {
        throw data_error("dataset cache: unsupported version " + std::to_string(version));
    }
    int64_t n = binio::get_u32(in, "dataset cache");
    int64_t dim = binio::get_u32(in, "dataset cache");
    Dataset out;
    out.name = "cache";
    out.samples = binio::get_tensor_payload(in, {n, dim}, "dataset cache");
    return out;
}

}  // namespace eoflow::datasets
