// Command-line surface for training, evaluating and exporting entropy-ordered
// flows: train, pca, spectrum, reconstruct, rate-distortion, denoise,
// archetypes, mpmi. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numeric failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "eoflow/config.hpp"
#include "eoflow/datasets.hpp"
#include "eoflow/eval.hpp"
#include "eoflow/flow.hpp"
#include "eoflow/image.hpp"
#include "eoflow/linear.hpp"
#include "eoflow/losses.hpp"
#include "eoflow/metrics.hpp"
#include "eoflow/train.hpp"

namespace fs = std::filesystem;
using namespace eoflow;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "model.kind", "model.dim", "model.blocks", "model.width", "model.depth", "model.clamp",
        "model.seed",
        "data.kind", "data.n", "data.seed", "data.variances", "data.mean", "data.radius_mean",
        "data.radius_std", "data.dim", "data.prototype_scale", "data.images", "data.labels",
        "data.path",
        "train.batch", "train.steps", "train.lr", "train.warmup", "train.weight_decay",
        "train.mode", "train.lambda_tc", "train.lambda_core", "train.lambda_detail",
        "train.lambda_cd", "train.core_dim", "train.estimator", "train.noise_sigma",
        "train.seed", "train.log_every", "train.checkpoint_every", "train.grad_clip",
        "eval.n_samples", "eval.seed", "eval.rows", "eval.cols", "eval.magnitude",
        "eval.include_log2pi", "eval.k", "eval.c_grid", "eval.detail_mode", "eval.noise_sigma",
        "eval.grid_count", "eval.model_samples",
    };
    return keys;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string checkpoint;
    std::string data_path;
    int64_t seed = -1;  // -1: keep config value
};

config::RunConfig load_config(const CommonArgs& args) {
    config::RunConfig cfg;
    if (!args.config_path.empty()) cfg = config::RunConfig::from_file(args.config_path);
    cfg.require_known(known_keys());
    if (args.seed >= 0) {
        cfg.set("train.seed", std::to_string(args.seed));
        cfg.set("eval.seed", std::to_string(args.seed));
        cfg.set("data.seed", std::to_string(args.seed));
    }
    return cfg;
}

void prepare_out(const CommonArgs& args, const config::RunConfig& cfg) {
    if (args.out_dir.empty()) throw config_error("--out directory is required");
    fs::create_directories(args.out_dir);
    cfg.write_file(args.out_dir + "/resolved_config.ini");
}

std::ofstream open_csv(const std::string& path, const config::RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out.precision(12);
    out << "# config_hash=" << cfg.hash_hex() << "\n";
    return out;
}

datasets::Dataset resolve_dataset(const config::RunConfig& cfg, const CommonArgs& args) {
    if (!args.data_path.empty()) return datasets::load_dataset_cache(args.data_path);
    std::string kind = cfg.get_str("data.kind", "");
    if (kind.empty()) {
        throw config_error("no dataset: pass --data CACHE or a [data] config section");
    }
    int64_t n = cfg.get_int("data.n", 1024);
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("data.seed", 0));
    if (kind == "gaussian") {
        auto vars = config::parse_number_list(cfg.get_str("data.variances", ""));
        if (vars.empty()) throw config_error("data.variances required for gaussian data");
        auto spec = datasets::CovarianceSpec::diagonal(vars);
        auto means = config::parse_number_list(cfg.get_str("data.mean", ""));
        if (!means.empty()) {
            if (means.size() != vars.size()) throw config_error("data.mean length mismatch");
            for (size_t i = 0; i < means.size(); ++i) spec.mean[static_cast<int64_t>(i)] = means[i];
        }
        return datasets::gaussian_dataset(static_cast<int64_t>(vars.size()), spec, n, seed);
    }
    if (kind == "ring2d") {
        return datasets::ring2d_dataset(n, cfg.get_num("data.radius_mean", 1.0),
                                        cfg.get_num("data.radius_std", 0.1), seed);
    }
    if (kind == "mixture") {
        int64_t dim = cfg.get_int("data.dim", 8);
        double scl = cfg.get_num("data.prototype_scale", 1.0);
        std::mt19937_64 rng(seed ^ 0xa5a5a5a5ull);
        std::normal_distribution<double> dist(0.0, scl);
        datasets::Dataset proto_a, proto_b;
        proto_a.samples = Tensor::zeros({1, dim});
        proto_b.samples = Tensor::zeros({1, dim});
        for (int64_t j = 0; j < dim; ++j) {
            double v = dist(rng);
            proto_a.samples.at(0, j) = v;
            proto_b.samples.at(0, j) = -v + 0.2 * dist(rng);
        }
        return datasets::entangled_mixture(proto_a, proto_b, n, seed);
    }
    if (kind == "idx") {
        std::string images = cfg.get_str("data.images", "");
        if (images.empty()) throw config_error("data.images required for idx data");
        return datasets::load_idx(images, cfg.get_str("data.labels", ""));
    }
    if (kind == "cache") {
        std::string path = cfg.get_str("data.path", "");
        if (path.empty()) throw config_error("data.path required for cache data");
        return datasets::load_dataset_cache(path);
    }
    throw config_error("unknown data.kind '" + kind + "'");
}

flow::FlowModel require_checkpoint(const CommonArgs& args) {
    if (args.checkpoint.empty()) throw config_error("--checkpoint is required");
    return flow::load_checkpoint(args.checkpoint);
}

// samples used by the entropy ordering and metric commands; either encoded
// data samples (default) or model samples per eval.model_samples
Tensor eval_samples(const flow::FlowModel& model, const config::RunConfig& cfg,
                    const datasets::Dataset& data) {
    int64_t want = cfg.get_int("eval.n_samples", 1024);
    if (cfg.get_bool("eval.model_samples", false)) {
        return metrics::sample_model(model, want, static_cast<uint64_t>(cfg.get_int("eval.seed", 0)));
    }
    int64_t n = std::min<int64_t>(want, data.size());
    if (n == data.size()) return data.samples;
    Tensor out = Tensor::zeros({n, data.dim()});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < data.dim(); ++j) out.at(i, j) = data.samples.at(i, j);
    }
    return out;
}

std::pair<int64_t, int64_t> image_shape(const config::RunConfig& cfg, int64_t dim) {
    int64_t rows = cfg.get_int("eval.rows", 1);
    int64_t cols = cfg.get_int("eval.cols", rows == 1 ? dim : 0);
    if (rows * cols != dim) {
        throw config_error("eval.rows * eval.cols must equal D=" + std::to_string(dim));
    }
    return {rows, cols};
}

int64_t read_last_step(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) return -1;
    std::string line;
    int64_t last = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 's') continue;
        std::istringstream row(line);
        std::string cell;
        if (std::getline(row, cell, ',')) {
            try {
                last = std::stoll(cell);
            } catch (const std::exception&) {
            }
        }
    }
    return last;
}

// --- commands -------------------------------------------------------------

int cmd_train(const CommonArgs& args, const std::string& resume_path) {
    config::RunConfig cfg = load_config(args);

    flow::FlowModel model;
    int64_t start_step = 0;
    if (!resume_path.empty()) {
        model = flow::load_checkpoint(resume_path);
        start_step = read_last_step(args.out_dir + "/train_log.csv") + 1;
        if (start_step < 0) start_step = 0;
    } else {
        std::string kind = cfg.get_str("model.kind", "coupling");
        int64_t dim = cfg.get_int("model.dim", 0);
        if (dim <= 0) throw config_error("model.dim is required");
        uint64_t seed = static_cast<uint64_t>(cfg.get_int("model.seed", 0));
        if (kind == "affine") {
            model = flow::build_affine_model(dim, seed);
        } else if (kind == "coupling") {
            flow::ModelConfig mc;
            mc.dim = dim;
            mc.n_blocks = static_cast<int32_t>(cfg.get_int("model.blocks", 4));
            mc.mlp_width = static_cast<int32_t>(cfg.get_int("model.width", 32));
            mc.mlp_depth = static_cast<int32_t>(cfg.get_int("model.depth", 2));
            mc.clamp = cfg.get_num("model.clamp", 2.0);
            mc.seed = seed;
            model = flow::build_model(mc);
        } else {
            throw config_error("model.kind must be 'coupling' or 'affine', got '" + kind + "'");
        }
    }

    datasets::Dataset data = resolve_dataset(cfg, args);

    training::TrainConfig tc;
    tc.batch_size = cfg.get_int("train.batch", 128);
    tc.steps = cfg.get_int("train.steps", 1000);
    tc.learning_rate = cfg.get_num("train.lr", 1e-3);
    tc.warmup_steps = cfg.get_int("train.warmup", 0);
    tc.weight_decay = cfg.get_num("train.weight_decay", 0.0);
    std::string mode = cfg.get_str("train.mode", "total");
    if (mode == "total") {
        tc.mode = losses::LossMode::total;
    } else if (mode == "core_detail") {
        tc.mode = losses::LossMode::core_detail;
    } else {
        throw config_error("train.mode must be 'total' or 'core_detail', got '" + mode + "'");
    }
    tc.weights.lambda_tc = cfg.get_num("train.lambda_tc", 0.0);
    tc.weights.lambda_core = cfg.get_num("train.lambda_core", 0.0);
    tc.weights.lambda_detail = cfg.get_num("train.lambda_detail", 0.0);
    tc.weights.lambda_cd = cfg.get_num("train.lambda_cd", 0.0);
    tc.core_dim = cfg.get_int("train.core_dim", 0);
    std::string estimator = cfg.get_str("train.estimator", "dense");
    if (estimator == "dense") {
        tc.estimator = losses::TcEstimator::dense;
    } else if (estimator == "stochastic") {
        tc.estimator = losses::TcEstimator::stochastic;
    } else {
        throw config_error("train.estimator must be 'dense' or 'stochastic'");
    }
    tc.noise_sigma = cfg.get_num("train.noise_sigma", 0.0);
    tc.seed = static_cast<uint64_t>(cfg.get_int("train.seed", 0));
    tc.log_every = cfg.get_int("train.log_every", 10);
    tc.checkpoint_every = cfg.get_int("train.checkpoint_every", 0);
    tc.grad_clip = cfg.get_num("train.grad_clip", 100.0);
    tc.checkpoint_dir = args.out_dir;
    tc.start_step = start_step;

    prepare_out(args, cfg);
    training::TrainLog log = training::train(model, data, tc);
    log.write_csv(args.out_dir + "/train_log.csv", "config_hash=" + cfg.hash_hex());
    std::cout << "trained " << tc.steps << " steps; final composite "
              << (log.records.empty() ? 0.0 : log.records.back().composite) << "\n";
    return 0;
}

int cmd_pca(const CommonArgs& args) {
    config::RunConfig cfg = load_config(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);

    linear::PCAResult pca = linear::pca_fit(data.samples);
    linear::LinearFlow lf = linear::linear_flow_from_pca(pca);
    flow::FlowModel model = linear::wrap_linear_flow(lf);
    flow::save_checkpoint(model, args.out_dir + "/model.eofl");

    auto csv = open_csv(args.out_dir + "/pca_eigenvalues.csv", cfg);
    csv << "rank,eigenvalue\n";
    for (int64_t i = 0; i < pca.eigvals.size(); ++i) csv << i << ',' << pca.eigvals[i] << "\n";
    std::cout << "pca checkpoint written (D=" << model.dim() << ")\n";
    return 0;
}

int cmd_spectrum(const CommonArgs& args, double noise_sigma) {
    config::RunConfig cfg = load_config(args);
    flow::FlowModel model = require_checkpoint(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);

    double sigma = noise_sigma >= 0 ? noise_sigma : cfg.get_num("eval.noise_sigma", 0.0);
    bool include_const = cfg.get_bool("eval.include_log2pi", false);
    Tensor samples = eval_samples(model, cfg, data);
    metrics::EntropySpectrum spec =
        metrics::entropy_spectrum(model, samples, sigma, !include_const);

    auto csv = open_csv(args.out_dir + "/spectrum.csv", cfg);
    csv << "rank,latent_index,entropy,std_err\n";
    for (int64_t r = 0; r < static_cast<int64_t>(spec.order.size()); ++r) {
        int64_t idx = spec.order[static_cast<size_t>(r)];
        csv << r << ',' << idx << ',' << spec.entropy[static_cast<size_t>(idx)] << ','
            << spec.std_err[static_cast<size_t>(idx)] << "\n";
    }
    csv << "floor,-1," << spec.noise_floor << ",0\n";
    std::cout << "spectrum over " << spec.n_samples << " samples; top dim "
              << spec.order.front() << "\n";
    return 0;
}

int cmd_reconstruct(const CommonArgs& args, const std::string& c_grid_flag,
                    const std::string& mode_flag) {
    config::RunConfig cfg = load_config(args);
    flow::FlowModel model = require_checkpoint(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);
    auto [rows, cols] = image_shape(cfg, model.dim());

    std::string mode_str = !mode_flag.empty() ? mode_flag : cfg.get_str("eval.detail_mode", "zero");
    eval::DetailMode mode;
    if (mode_str == "zero") {
        mode = eval::DetailMode::zero;
    } else if (mode_str == "sample") {
        mode = eval::DetailMode::sample;
    } else {
        throw config_error("detail mode must be 'zero' or 'sample', got '" + mode_str + "'");
    }

    std::string grid_text = !c_grid_flag.empty() ? c_grid_flag : cfg.get_str("eval.c_grid", "");
    std::vector<int64_t> keep_grid = config::parse_int_list(grid_text);
    if (keep_grid.empty()) {
        for (int64_t c = 0; c <= model.dim(); ++c) keep_grid.push_back(c);
    }

    Tensor samples = eval_samples(model, cfg, data);
    std::vector<int64_t> order = eval::latent_order(model, samples);
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("eval.seed", 0));
    int64_t grid_count = std::min<int64_t>(cfg.get_int("eval.grid_count", 8), samples.rows());

    auto csv = open_csv(args.out_dir + "/recon_stats.csv", cfg);
    csv << "keep,mse,psnr,ssim\n";
    bool image_like = rows > 1;
    for (int64_t keep : keep_grid) {
        Tensor rec = eval::bottleneck_reconstruct_batch(model, samples, order, keep, mode, seed);
        double m = 0, s = 0;
        for (int64_t i = 0; i < samples.rows(); ++i) {
            m += image::mse(samples.row(i), rec.row(i));
            s += image::ssim(samples.row(i), rec.row(i), rows, cols);
        }
        m /= static_cast<double>(samples.rows());
        s /= static_cast<double>(samples.rows());
        csv << keep << ',' << m << ',' << image::psnr_from_mse(m) << ',' << s << "\n";
        if (image_like) {
            for (int64_t i = 0; i < grid_count; ++i) {
                image::write_pgm(args.out_dir + "/recon_c" + std::to_string(keep) + "_" +
                                     std::to_string(i) + ".pgm",
                                 rec.row(i), rows, cols, false);
            }
        }
    }
    if (image_like) {
        for (int64_t i = 0; i < grid_count; ++i) {
            image::write_pgm(args.out_dir + "/orig_" + std::to_string(i) + ".pgm",
                             samples.row(i), rows, cols, false);
        }
    }
    return 0;
}

int cmd_rate_distortion(const CommonArgs& args, double noise_sigma,
                        const std::string& c_grid_flag) {
    config::RunConfig cfg = load_config(args);
    flow::FlowModel model = require_checkpoint(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);
    auto [rows, cols] = image_shape(cfg, model.dim());

    double sigma = noise_sigma >= 0 ? noise_sigma : cfg.get_num("eval.noise_sigma", 0.0);
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("eval.seed", 0));

    Tensor clean = eval_samples(model, cfg, data);
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dull);
    Tensor noisy = datasets::inflate(clean, datasets::NoiseConfig(sigma), rng);

    std::string grid_text = !c_grid_flag.empty() ? c_grid_flag : cfg.get_str("eval.c_grid", "");
    std::vector<int64_t> keep_grid = config::parse_int_list(grid_text);
    if (keep_grid.empty()) {
        for (int64_t c = 0; c <= model.dim(); ++c) keep_grid.push_back(c);
    }

    std::vector<int64_t> order = eval::latent_order(model, noisy);
    auto points = eval::rate_distortion(model, clean, noisy, order, keep_grid, seed, rows, cols);

    auto csv = open_csv(args.out_dir + "/rate_distortion.csv", cfg);
    csv << "keep,mse_zero,psnr_zero,ssim_zero,mse_sample,psnr_sample,ssim_sample,factor2_ok\n";
    int64_t violations = 0;
    for (const auto& p : points) {
        bool ok = p.mse_sample <= 2.2 * p.mse_zero + 1e-15;
        if (!ok) ++violations;
        csv << p.keep << ',' << p.mse_zero << ',' << p.psnr_zero << ',' << p.ssim_zero << ','
            << p.mse_sample << ',' << p.psnr_sample << ',' << p.ssim_sample << ','
            << (ok ? 1 : 0) << "\n";
    }
    std::cout << "rate-distortion over " << points.size() << " bottlenecks; factor-2 violations: "
              << violations << "\n";
    return 0;
}

int cmd_denoise(const CommonArgs& args, double noise_sigma) {
    config::RunConfig cfg = load_config(args);
    flow::FlowModel model = require_checkpoint(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);

    double sigma = noise_sigma >= 0 ? noise_sigma : cfg.get_num("eval.noise_sigma", 0.0);
    if (sigma <= 0) throw config_error("denoise needs a positive noise sigma");
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("eval.seed", 0));

    Tensor clean = eval_samples(model, cfg, data);
    std::mt19937_64 rng(seed ^ 0x94d049bb133111ebull);
    Tensor noisy = datasets::inflate(clean, datasets::NoiseConfig(sigma), rng);
    Tensor denoised = eval::tweedie_denoise_batch(model, noisy, sigma);

    datasets::Dataset out_data;
    out_data.samples = denoised;
    out_data.name = "denoised";
    datasets::save_dataset_cache(out_data, args.out_dir + "/denoised.eods");

    double mse_noisy = 0, mse_denoised = 0;
    for (int64_t i = 0; i < clean.rows(); ++i) {
        mse_noisy += image::mse(clean.row(i), noisy.row(i));
        mse_denoised += image::mse(clean.row(i), denoised.row(i));
    }
    mse_noisy /= static_cast<double>(clean.rows());
    mse_denoised /= static_cast<double>(clean.rows());

    auto csv = open_csv(args.out_dir + "/denoise_stats.csv", cfg);
    csv << "quantity,mse,psnr\n";
    csv << "noisy," << mse_noisy << ',' << image::psnr_from_mse(mse_noisy) << "\n";
    csv << "denoised," << mse_denoised << ',' << image::psnr_from_mse(mse_denoised) << "\n";
    std::cout << "denoised PSNR " << image::psnr_from_mse(mse_denoised) << " dB vs noisy "
              << image::psnr_from_mse(mse_noisy) << " dB\n";
    return 0;
}

int cmd_archetypes(const CommonArgs& args, const std::string& dims_flag, double magnitude,
                   int64_t top_k) {
    config::RunConfig cfg = load_config(args);
    flow::FlowModel model = require_checkpoint(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);
    auto [rows, cols] = image_shape(cfg, model.dim());

    double mag = magnitude > 0 ? magnitude : cfg.get_num("eval.magnitude", 4.0);
    Tensor samples = eval_samples(model, cfg, data);

    std::vector<int64_t> dims = config::parse_int_list(dims_flag);
    if (dims.empty()) {
        std::vector<int64_t> order = eval::latent_order(model, samples);
        int64_t k = std::min<int64_t>(top_k > 0 ? top_k : cfg.get_int("eval.k", 4), model.dim());
        dims.assign(order.begin(), order.begin() + k);
    }

    auto result = eval::archetypes(model, dims, mag, samples);
    auto csv = open_csv(args.out_dir + "/archetypes.csv", cfg);
    csv << "latent_index,kind";
    for (int64_t j = 0; j < model.dim(); ++j) csv << ",x" << j;
    csv << "\n";
    bool image_like = rows > 1;
    for (const auto& a : result) {
        auto dump = [&](const char* kind, const Tensor& v) {
            csv << a.latent_index << ',' << kind;
            for (int64_t j = 0; j < v.size(); ++j) csv << ',' << v[j];
            csv << "\n";
            if (image_like) {
                image::write_pgm(args.out_dir + "/arch_" + std::to_string(a.latent_index) + "_" +
                                     kind + ".pgm",
                                 v, rows, cols, true);
            }
        };
        dump("plus", a.plus);
        dump("minus", a.minus);
        dump("contrast", a.contrast);
        dump("mean_jacobian", a.mean_jacobian);
    }
    return 0;
}

int cmd_mpmi(const CommonArgs& args, int64_t k_flag) {
    config::RunConfig cfg = load_config(args);
    flow::FlowModel model = require_checkpoint(args);
    datasets::Dataset data = resolve_dataset(cfg, args);
    prepare_out(args, cfg);

    int64_t k = k_flag > 0 ? k_flag : cfg.get_int("eval.k", std::min<int64_t>(model.dim(), 8));
    Tensor samples = eval_samples(model, cfg, data);
    metrics::MPMIMatrix m = metrics::mpmi_matrix(model, samples, k);

    auto csv = open_csv(args.out_dir + "/mpmi.csv", cfg);
    csv << "dim";
    for (int64_t j = 0; j < m.k; ++j) csv << ',' << m.dims[static_cast<size_t>(j)];
    csv << "\n";
    for (int64_t i = 0; i < m.k; ++i) {
        csv << m.dims[static_cast<size_t>(i)];
        for (int64_t j = 0; j < m.k; ++j) csv << ',' << m.at(i, j);
        csv << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy-ordered flows: training, metrics and export pipelines"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string resume_path, c_grid, detail_mode, dims_flag;
    double noise_sigma = -1.0, magnitude = -1.0;
    int64_t k_flag = 0, top_k = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_checkpoint) {
        cmd->add_option("--config", args.config_path, "INI config file");
        cmd->add_option("--out", args.out_dir, "output directory")->required();
        cmd->add_option("--seed", args.seed, "seed override");
        cmd->add_option("--data", args.data_path, "dataset cache file (EODS)");
        if (needs_checkpoint) {
            cmd->add_option("--checkpoint", args.checkpoint, "model checkpoint")->required();
        }
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train a flow per the config");
    add_common(train_cmd, false);
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");

    CLI::App* pca_cmd = app.add_subcommand("pca", "fit PCA and export it as a flow checkpoint");
    add_common(pca_cmd, false);

    CLI::App* spec_cmd = app.add_subcommand("spectrum", "entropy spectrum CSV");
    add_common(spec_cmd, true);
    spec_cmd->add_option("--noise-sigma", noise_sigma, "noise floor sigma");

    CLI::App* recon_cmd = app.add_subcommand("reconstruct", "bottleneck reconstructions");
    add_common(recon_cmd, true);
    recon_cmd->add_option("--c-grid", c_grid, "comma list of bottleneck sizes");
    recon_cmd->add_option("--detail-mode", detail_mode, "zero | sample");

    CLI::App* rate_cmd = app.add_subcommand("rate-distortion", "PSNR/SSIM curves over C");
    add_common(rate_cmd, true);
    rate_cmd->add_option("--noise-sigma", noise_sigma, "inflation sigma");
    rate_cmd->add_option("--c-grid", c_grid, "comma list of bottleneck sizes");

    CLI::App* den_cmd = app.add_subcommand("denoise", "one-step score denoising");
    add_common(den_cmd, true);
    den_cmd->add_option("--noise-sigma", noise_sigma, "inflation sigma");

    CLI::App* arch_cmd = app.add_subcommand("archetypes", "latent traversals and mean Jacobians");
    add_common(arch_cmd, true);
    arch_cmd->add_option("--dims", dims_flag, "comma list of latent dims");
    arch_cmd->add_option("--magnitude", magnitude, "traversal magnitude");
    arch_cmd->add_option("--top-k", top_k, "use the top-k entropy-ordered dims");

    CLI::App* mpmi_cmd = app.add_subcommand("mpmi", "pairwise mutual information matrix");
    add_common(mpmi_cmd, true);
    mpmi_cmd->add_option("-k,--k", k_flag, "matrix size (top-k ordered dims)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(args, resume_path);
        if (pca_cmd->parsed()) return cmd_pca(args);
        if (spec_cmd->parsed()) return cmd_spectrum(args, noise_sigma);
        if (recon_cmd->parsed()) return cmd_reconstruct(args, c_grid, detail_mode);
        if (rate_cmd->parsed()) return cmd_rate_distortion(args, noise_sigma, c_grid);
        if (den_cmd->parsed()) return cmd_denoise(args, noise_sigma);
        if (arch_cmd->parsed()) return cmd_archetypes(args, dims_flag, magnitude, top_k);
        if (mpmi_cmd->parsed()) return cmd_mpmi(args, k_flag);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
