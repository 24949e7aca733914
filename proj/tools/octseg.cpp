// octseg: segment B-scans, generate phantoms, score boundary files.
//
//   octseg segment <image|dir>... [--config cfg.json] [--out dir] [--overlay] [--jobs n] [--format csv,json]
//   octseg phantom [--spec spec.json] [--seed n] [--out dir] [--name stem]
//   octseg eval <pred.csv> <truth.csv> [--tol px] [--tol-ilm px] [--tol-rnfl px] [--tol-rpe px]
//
// Exit codes: 0 success, 1 processing failure, 2 usage or configuration error.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "octseg/octseg.hpp"

namespace fs = std::filesystem;
using namespace octseg;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::mutex g_err_mutex;

void report(const std::string& line) {
    std::lock_guard lock(g_err_mutex);
    std::cerr << line << '\n';
}

// --config wins over OCTSEG_CONFIG; neither means built-in defaults.
config::RunConfig resolve_config(const std::string& path_flag) {
    std::string path = path_flag;
    if (path.empty())
        if (const char* env = std::getenv("OCTSEG_CONFIG"); env && *env) path = env;
    return path.empty() ? config::RunConfig{} : config::load_run_config(path);
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" || ext == ".png";
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& args) {
    std::vector<fs::path> files;
    for (const auto& a : args) {
        const fs::path p(a);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_regular_file() && is_image_file(entry.path())) found.push_back(entry.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

struct SegmentOptions {
    std::vector<std::string> inputs;
    std::string config_path;
    std::optional<std::string> out_dir;
    bool overlay = false;
    std::optional<int> jobs;
    std::vector<std::string> formats;
};

void segment_one(const fs::path& input, const config::RunConfig& cfg, const fs::path& out_dir) {
    const BScan scan = io::load_grayscale(input);
    const layers::SegmentationResult result = layers::segment_all(scan, cfg.segment);
    const std::string stem = input.stem().string();
    if (cfg.io.wants("csv")) {
        io::write_boundaries(result, out_dir / (stem + ".boundaries.csv"), io::BoundaryFormat::Csv);
        io::write_metrics_csv(result, out_dir / (stem + ".metrics.csv"));
    }
    if (cfg.io.wants("json")) io::write_boundaries(result, out_dir / (stem + ".json"), io::BoundaryFormat::Json);
    if (cfg.io.overlay) io::write_overlay(scan, result, out_dir / (stem + ".overlay.png"));
}

int cmd_segment(const SegmentOptions& opt) {
    config::RunConfig cfg;
    try {
        cfg = resolve_config(opt.config_path);
        if (opt.out_dir) cfg.io.output_dir = *opt.out_dir;
        if (opt.overlay) cfg.io.overlay = true;
        if (opt.jobs) cfg.io.jobs = *opt.jobs;
        if (!opt.formats.empty()) cfg.io.formats = opt.formats;
        cfg.validate();
    } catch (const Error& err) {
        report(std::string("error: ") + err.what());
        return kUsage;
    }

    const std::vector<fs::path> inputs = expand_inputs(opt.inputs);
    if (inputs.empty()) {
        report("error: no input images");
        return kUsage;
    }
    const fs::path out_dir = cfg.io.output_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        report("error: cannot create output directory " + out_dir.string());
        return kFailure;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
            try {
                segment_one(inputs[i], cfg, out_dir);
            } catch (const std::exception& err) {
                ++failures;
                report("error: " + inputs[i].string() + ": " + err.what());
            }
        }
    };
    const auto n_threads = static_cast<std::size_t>(std::min<int>(cfg.io.jobs, static_cast<int>(inputs.size())));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
    }
    return failures == 0 ? kOk : kFailure;
}

struct PhantomOptions {
    std::string spec_path;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string name = "phantom";
};

int cmd_phantom(const PhantomOptions& opt) {
    phantom::Phantom ph;
    try {
        phantom::PhantomSpec spec = opt.spec_path.empty() ? resolve_config(opt.config_path).phantom
                                                          : config::load_phantom_spec(opt.spec_path);
        if (opt.seed) spec.seed = *opt.seed;
        ph = phantom::generate(spec);
    } catch (const Error& err) {
        report(std::string("error: ") + err.what());
        return kUsage;
    }
    try {
        const fs::path out_dir = opt.out_dir;
        fs::create_directories(out_dir);
        io::save_pgm(out_dir / (opt.name + ".pgm"), ph.image.pixels, 65535);
        io::write_boundaries(ph.truth, out_dir / (opt.name + ".truth.csv"));
    } catch (const std::exception& err) {
        report(std::string("error: ") + err.what());
        return kFailure;
    }
    return kOk;
}

struct EvalOptions {
    std::string pred;
    std::string truth;
    double tol = 1.0;
    std::optional<double> tol_ilm, tol_rnfl, tol_rpe;
};

int cmd_eval(const EvalOptions& opt) {
    try {
        const graph::BoundarySet pred = io::read_boundaries_csv(opt.pred);
        const graph::BoundarySet truth = io::read_boundaries_csv(opt.truth);
        const phantom::Tolerances tol{opt.tol_ilm.value_or(opt.tol), opt.tol_rnfl.value_or(opt.tol),
                                      opt.tol_rpe.value_or(opt.tol)};
        const phantom::EvalReport report_data = phantom::evaluate(pred, truth, tol);
        nlohmann::ordered_json j;
        for (const auto& b : report_data.boundaries) {
            nlohmann::ordered_json e;
            e["mae_px"] = b.mae;
            e["max_abs_px"] = b.max_abs;
            e["within_1px"] = b.within_1px;
            e["tolerance_px"] = b.tolerance;
            e["pass"] = b.pass;
            j[b.label] = e;
        }
        j["pass"] = report_data.pass;
        std::cout << j.dump(2) << '\n';
        return report_data.pass ? kOk : kFailure;
    } catch (const Error& err) {
        report(std::string("error: ") + err.what());
        return kUsage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OCT B-scan ILM / RNFL / RPE segmentation"};
    app.require_subcommand(1);

    SegmentOptions seg;
    auto* segment = app.add_subcommand("segment", "Segment images (files or directories of .pgm/.png)");
    segment->add_option("inputs", seg.inputs, "Input images or directories")->required();
    segment->add_option("--config", seg.config_path, "JSON config (falls back to $OCTSEG_CONFIG)");
    segment->add_option("--out", seg.out_dir, "Output directory");
    segment->add_flag("--overlay", seg.overlay, "Also write a PNG overlay per image");
    segment->add_option("--jobs", seg.jobs, "Images processed concurrently")->check(CLI::Range(1, 256));
    segment->add_option("--format", seg.formats, "Output formats: csv,json")
        ->delimiter(',')
        ->check(CLI::IsMember({"csv", "json"}));

    PhantomOptions ph;
    auto* phantom_cmd = app.add_subcommand("phantom", "Write a synthetic B-scan (PGM) and its ground truth (CSV)");
    phantom_cmd->add_option("--spec", ph.spec_path, "Phantom spec JSON (default: built-in spec)");
    phantom_cmd->add_option("--config", ph.config_path, "Run config whose phantom section is used");
    phantom_cmd->add_option("--seed", ph.seed, "Override the spec's noise seed");
    phantom_cmd->add_option("--out", ph.out_dir, "Output directory");
    phantom_cmd->add_option("--name", ph.name, "Output file stem");

    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "Score predicted boundaries against ground truth");
    eval->add_option("pred", ev.pred, "Predicted boundaries CSV")->required();
    eval->add_option("truth", ev.truth, "Ground-truth boundaries CSV")->required();
    eval->add_option("--tol", ev.tol, "MAE tolerance for every boundary (px)")->check(CLI::NonNegativeNumber);
    eval->add_option("--tol-ilm", ev.tol_ilm, "ILM MAE tolerance (px)")->check(CLI::NonNegativeNumber);
    eval->add_option("--tol-rnfl", ev.tol_rnfl, "RNFL MAE tolerance (px)")->check(CLI::NonNegativeNumber);
    eval->add_option("--tol-rpe", ev.tol_rpe, "RPE MAE tolerance (px)")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (segment->parsed()) return cmd_segment(seg);
    if (phantom_cmd->parsed()) return cmd_phantom(ph);
    return cmd_eval(ev);
}
