#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eoflow/datasets.hpp"

namespace fs = std::filesystem;
using namespace eoflow;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

std::string binary_path() {
    const char* env = std::getenv("EOFLOW_BIN");
    REQUIRE_MESSAGE(env != nullptr, "EOFLOW_BIN must point at the eoflow binary");
    return env;
}

CliResult run_cli(const std::string& args) {
    std::string out_file = "/tmp/eoflow_cli_out.txt";
    std::string cmd = binary_path() + " " + args + " > " + out_file + " 2>&1";
    int raw = std::system(cmd.c_str());
    CliResult r;
    r.code = WEXITSTATUS(raw);
    std::ifstream in(out_file);
    std::stringstream buf;
    buf << in.rdbuf();
    r.output = buf.str();
    return r;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing csv: ", path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

bool has_provenance(const std::string& path) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    return first.rfind("# config_hash=", 0) == 0;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("cli: train writes checkpoint, log and resolved config; resume continues steps") {
    TempDir dir("eoflow_cli_train");
    write_file(dir.path / "cfg.ini",
               "[model]\ndim = 2\nblocks = 1\nwidth = 6\ndepth = 1\nseed = 1\n"
               "[data]\nkind = ring2d\nn = 64\nseed = 2\n"
               "[train]\nbatch = 8\nsteps = 6\nlr = 1e-3\nlog_every = 1\n");

    auto r = run_cli("train --config " + (dir.path / "cfg.ini").string() + " --out " +
                     dir.str() + "/run");
    CAPTURE(r.output);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir.path / "run/model.eofl"));
    CHECK(fs::exists(dir.path / "run/train_log.csv"));
    CHECK(fs::exists(dir.path / "run/resolved_config.ini"));
    CHECK(has_provenance((dir.path / "run/train_log.csv").string()));

    auto rows = read_csv((dir.path / "run/train_log.csv").string());
    REQUIRE(rows.size() >= 2);
    CHECK(rows[0][0] == "step");
    CHECK(rows[1][0] == "0");
    CHECK(rows.back()[0] == "5");

    // resume continues the step counter
    auto r2 = run_cli("train --config " + (dir.path / "cfg.ini").string() + " --out " +
                      dir.str() + "/run --resume " + dir.str() + "/run/model.eofl");
    CHECK(r2.code == 0);
    auto rows2 = read_csv((dir.path / "run/train_log.csv").string());
    CHECK(rows2[1][0] == "6");
    CHECK(rows2.back()[0] == "11");
}

TEST_CASE("cli: unknown config key exits 2 naming the key") {
    TempDir dir("eoflow_cli_badkey");
    write_file(dir.path / "cfg.ini", "[model]\ndim = 2\nbogus_knob = 1\n");
    auto r = run_cli("train --config " + (dir.path / "cfg.ini").string() + " --out " +
                     dir.str() + "/run");
    CHECK(r.code == 2);
    CHECK(r.output.find("bogus_knob") != std::string::npos);
}

TEST_CASE("cli: missing checkpoint file exits 3") {
    TempDir dir("eoflow_cli_missing");
    auto r = run_cli("spectrum --checkpoint /tmp/definitely_missing.eofl --out " + dir.str() +
                     "/o --data /tmp/also_missing.eods");
    CHECK(r.code == 3);
}

TEST_CASE("cli: pca -> spectrum -> mpmi -> denoise pipeline on gaussian data") {
    TempDir dir("eoflow_cli_pipeline");
    // gaussian dataset cache
    auto data = datasets::gaussian_dataset(
        3, datasets::CovarianceSpec::diagonal({9.0, 4.0, 1.0}), 2048, 5);
    datasets::save_dataset_cache(data, (dir.path / "data.eods").string());

    auto pca = run_cli("pca --data " + (dir.path / "data.eods").string() + " --out " +
                       dir.str() + "/pca");
    CAPTURE(pca.output);
    REQUIRE(pca.code == 0);
    REQUIRE(fs::exists(dir.path / "pca/model.eofl"));

    // spectrum: D+1 rows, floor value for sigma=0.1, entropies descending
    auto spec = run_cli("spectrum --checkpoint " + (dir.path / "pca/model.eofl").string() +
                        " --data " + (dir.path / "data.eods").string() + " --noise-sigma 0.1" +
                        " --out " + dir.str() + "/spec");
    CAPTURE(spec.output);
    REQUIRE(spec.code == 0);
    std::string spec_csv = (dir.path / "spec/spectrum.csv").string();
    CHECK(has_provenance(spec_csv));
    auto rows = read_csv(spec_csv);
    REQUIRE(rows.size() == 5);  // header + 3 dims + floor
    CHECK(rows[0][0] == "rank");
    double h0 = std::stod(rows[1][2]);
    double h1 = std::stod(rows[2][2]);
    double h2 = std::stod(rows[3][2]);
    CHECK(h0 > h1);
    CHECK(h1 > h2);
    CHECK(rows[4][0] == "floor");
    CHECK(std::stod(rows[4][2]) == doctest::Approx(-1.802585).epsilon(1e-4));

    // mpmi on the PCA checkpoint: all off-diagonal entries tiny, symmetric
    auto mp = run_cli("mpmi --checkpoint " + (dir.path / "pca/model.eofl").string() +
                      " --data " + (dir.path / "data.eods").string() + " -k 3 --out " +
                      dir.str() + "/mpmi");
    REQUIRE(mp.code == 0);
    auto mrows = read_csv((dir.path / "mpmi/mpmi.csv").string());
    REQUIRE(mrows.size() == 4);
    for (size_t i = 1; i < 4; ++i) {
        for (size_t j = 1; j < 4; ++j) {
            double v = std::stod(mrows[i][j]);
            CHECK(std::abs(v) < 1e-6);
            double vt = std::stod(mrows[j][i]);
            CHECK(v == doctest::Approx(vt));
        }
    }

    // denoise on the linear Gaussian model improves PSNR
    auto den = run_cli("denoise --checkpoint " + (dir.path / "pca/model.eofl").string() +
                       " --data " + (dir.path / "data.eods").string() +
                       " --noise-sigma 0.5 --out " + dir.str() + "/den");
    CAPTURE(den.output);
    REQUIRE(den.code == 0);
    auto drows = read_csv((dir.path / "den/denoise_stats.csv").string());
    REQUIRE(drows.size() == 3);
    double psnr_noisy = std::stod(drows[1][2]);
    double psnr_denoised = std::stod(drows[2][2]);
    CHECK(psnr_denoised > psnr_noisy);
    CHECK(fs::exists(dir.path / "den/denoised.eods"));
}

TEST_CASE("cli: reconstruct with full bottleneck is exact; C=0 constant") {
    TempDir dir("eoflow_cli_recon");
    auto data = datasets::gaussian_dataset(
        2, datasets::CovarianceSpec::diagonal({4.0, 1.0}), 256, 7);
    datasets::save_dataset_cache(data, (dir.path / "data.eods").string());
    auto pca = run_cli("pca --data " + (dir.path / "data.eods").string() + " --out " +
                       dir.str() + "/pca");
    REQUIRE(pca.code == 0);

    auto rec = run_cli("reconstruct --checkpoint " + (dir.path / "pca/model.eofl").string() +
                       " --data " + (dir.path / "data.eods").string() +
                       " --c-grid 0,1,2 --detail-mode zero --out " + dir.str() + "/rec");
    CAPTURE(rec.output);
    REQUIRE(rec.code == 0);
    auto rows = read_csv((dir.path / "rec/recon_stats.csv").string());
    REQUIRE(rows.size() == 4);
    // C = D: exact reconstruction -> PSNR capped at 99
    CHECK(std::stod(rows[3][2]) == doctest::Approx(99.0));
    // PSNR non-decreasing in C for the zero mode on a linear model
    CHECK(std::stod(rows[1][2]) <= std::stod(rows[2][2]));
    CHECK(std::stod(rows[2][2]) <= std::stod(rows[3][2]));
}

TEST_CASE("cli: rate-distortion emits the factor-2 column and archetypes export") {
    TempDir dir("eoflow_cli_rd");
    auto data = datasets::gaussian_dataset(
        2, datasets::CovarianceSpec::diagonal({4.0, 1.0}), 128, 9);
    datasets::save_dataset_cache(data, (dir.path / "data.eods").string());
    auto pca = run_cli("pca --data " + (dir.path / "data.eods").string() + " --out " +
                       dir.str() + "/pca");
    REQUIRE(pca.code == 0);

    auto rd = run_cli("rate-distortion --checkpoint " + (dir.path / "pca/model.eofl").string() +
                      " --data " + (dir.path / "data.eods").string() +
                      " --noise-sigma 0.1 --out " + dir.str() + "/rd");
    CAPTURE(rd.output);
    REQUIRE(rd.code == 0);
    auto rows = read_csv((dir.path / "rd/rate_distortion.csv").string());
    REQUIRE(rows.size() == 4);  // header + C in {0,1,2}
    CHECK(rows[0][7] == "factor2_ok");

    auto arch = run_cli("archetypes --checkpoint " + (dir.path / "pca/model.eofl").string() +
                        " --data " + (dir.path / "data.eods").string() +
                        " --top-k 2 --magnitude 4 --out " + dir.str() + "/arch");
    CAPTURE(arch.output);
    REQUIRE(arch.code == 0);
    auto arows = read_csv((dir.path / "arch/archetypes.csv").string());
    REQUIRE(arows.size() == 9);  // header + 2 dims x 4 kinds

    // linear model: archetype difference = 2 * magnitude * A_i exactly
    // (plus row minus minus row equals contrast row)
    for (size_t r = 1; r < arows.size(); r += 4) {
        double plus0 = std::stod(arows[r][2]);
        double minus0 = std::stod(arows[r + 1][2]);
        double contrast0 = std::stod(arows[r + 2][2]);
        CHECK(contrast0 == doctest::Approx(plus0 - minus0).epsilon(1e-9));
    }
}
