// hodcnn: pre-process, segment, tune and evaluate the object-detection
// pipeline from the command line.

#include "hodcnn/dataset.hpp"
#include "hodcnn/error.hpp"
#include "hodcnn/pipeline.hpp"
#include "hodcnn/preprocess.hpp"
#include "hodcnn/segmentation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct RunOverrides {
    std::string out_dir;
    double sigma = -1.0;
    int radius = -1;
    std::string background;
    double cn_epsilon = -1.0;
    int seg_levels = -1;
    std::string seg_strategy;
    bool seg_mask_input = false;
    bool seg_dump = false;
};

int cmd_run(const std::string& config_path, const RunOverrides& ov) {
    hodcnn::RunConfig config;
    if (!config_path.empty()) config = hodcnn::parse_run_config(config_path);
    if (!ov.out_dir.empty()) config.out_dir = ov.out_dir;
    if (ov.sigma > 0.0) config.sigma = ov.sigma;
    if (ov.radius >= 0) config.radius = ov.radius;
    if (!ov.background.empty()) config.background_path = ov.background;
    if (ov.cn_epsilon > 0.0) config.cn_epsilon = ov.cn_epsilon;
    if (ov.seg_levels > 0) config.seg_levels = ov.seg_levels;
    if (!ov.seg_strategy.empty())
        config.seg_strategy = ov.seg_strategy == "woa" ? hodcnn::ThresholdStrategy::woa
                                                       : hodcnn::ThresholdStrategy::exhaustive;
    if (ov.seg_mask_input) config.seg_mask_input = true;
    if (ov.seg_dump) config.seg_dump = true;
    hodcnn::run_pipeline(config);
    return 0;
}

int cmd_synth(const std::string& out_dir, const std::string& kind, int n, int size, double noise,
              std::uint64_t seed) {
    hodcnn::Dataset dataset = hodcnn::gen_synthetic(kind, n, size, noise, seed);
    hodcnn::save_dataset_folders(dataset, out_dir);
    std::cout << "wrote " << dataset.size() << " images under " << out_dir << "\n";
    return 0;
}

int cmd_preprocess(const std::string& in_path, const std::string& out_path, double sigma,
                   int radius, const std::string& background, double cn_epsilon, bool rescale) {
    hodcnn::Image img = hodcnn::load_image(in_path);
    hodcnn::GaussianConfig gc =
        radius > 0 ? hodcnn::GaussianConfig(sigma, radius) : hodcnn::GaussianConfig(sigma);
    img = hodcnn::gaussian_filter(img, gc);
    if (!background.empty())
        img = hodcnn::background_subtract(img, hodcnn::load_image(background));
    img = hodcnn::contrast_normalize(img, cn_epsilon);
    if (rescale) {
        // Min-max back to [0, 1] for viewing; otherwise save_image clamps
        // the normalized (mean-zero) pixels.
        double lo = img.pixels[0], hi = img.pixels[0];
        for (double v : img.pixels) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (double& v : img.pixels) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    }
    hodcnn::save_image(img, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_segment(const std::string& in_path, int levels, const std::string& strategy,
                std::uint64_t seed, const std::string& out_path) {
    hodcnn::Image gray = hodcnn::to_grayscale(hodcnn::load_image(in_path));
    hodcnn::ThresholdStrategy strat = strategy == "woa" ? hodcnn::ThresholdStrategy::woa
                                                        : hodcnn::ThresholdStrategy::exhaustive;
    hodcnn::ThresholdSearchOptions opts;
    opts.seed = seed;
    hodcnn::ThresholdResult result =
        hodcnn::optimal_thresholds(hodcnn::histogram(gray), levels, strat, opts);

    std::cout << "thresholds:";
    for (int t : result.thresholds.levels) std::cout << " " << t;
    std::cout << "\nentropy: " << result.objective << "\n";

    if (!out_path.empty()) {
        hodcnn::LabelMap map = hodcnn::segment(gray, result.thresholds);
        hodcnn::Image vis = hodcnn::Image::zeros(map.width, map.height);
        for (std::size_t i = 0; i < vis.pixels.size(); ++i)
            vis.pixels[i] = static_cast<double>(map.labels[i]) / levels;
        hodcnn::save_image(vis, out_path);
        std::cout << "label map: " << out_path << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& out_dir) {
    auto [spec, params] = hodcnn::load_checkpoint(checkpoint);
    hodcnn::Dataset dataset =
        hodcnn::load_folder_dataset(data_dir, params.input_height, params.input_width);
    hodcnn::EvalResult eval = hodcnn::evaluate(spec, params, dataset);

    std::cout << "samples: " << dataset.size() << "\n"
              << "accuracy: " << eval.metrics.accuracy << "\n"
              << "sensitivity: " << eval.metrics.sensitivity << "\n"
              << "specificity: " << eval.metrics.specificity << "\n"
              << "error: " << eval.metrics.error << "\n"
              << "auc: " << eval.auc << "\n";

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(std::filesystem::path(out_dir) / "metrics.csv", std::ios::binary);
        char row[256];
        std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g,0,%.17g\n", eval.metrics.accuracy,
                      eval.metrics.specificity, eval.metrics.sensitivity, eval.metrics.error);
        out << "accuracy,specificity,sensitivity,time_s,error\n" << row;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy-segmented, whale-tuned convolutional object detection pipeline"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "full pipeline run");
    std::string run_config;
    RunOverrides ov;
    run->add_option("--config", run_config, "key=value configuration file");
    run->add_option("--out", ov.out_dir, "output directory (overrides config)");
    run->add_option("--sigma", ov.sigma, "gaussian sigma (overrides config)");
    run->add_option("--radius", ov.radius, "gaussian kernel radius (0 = ceil(3 sigma))");
    run->add_option("--background", ov.background, "background frame to subtract");
    run->add_option("--cn-epsilon", ov.cn_epsilon, "contrast normalization epsilon");
    run->add_option("--seg-levels", ov.seg_levels, "threshold count for segmentation artifacts");
    run->add_option("--seg-strategy", ov.seg_strategy, "exhaustive|woa")
        ->check(CLI::IsMember({"exhaustive", "woa"}));
    run->add_flag("--seg-mask-input", ov.seg_mask_input,
                  "zero the background band of every network input");
    run->add_flag("--seg-dump", ov.seg_dump, "write per-image label maps under out/segments");

    auto* synth = app.add_subcommand("synth", "generate the synthetic square/disc dataset");
    std::string synth_out, synth_kind = "shapes";
    int synth_n = 200, synth_size = 16;
    double synth_noise = 0.05;
    std::uint64_t synth_seed = 42;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--kind", synth_kind, "generator kind (shapes)");
    synth->add_option("--n", synth_n, "samples per class");
    synth->add_option("--size", synth_size, "image size");
    synth->add_option("--noise", synth_noise, "gaussian pixel noise sigma");
    synth->add_option("--seed", synth_seed, "generator seed");

    auto* pre = app.add_subcommand("preprocess", "filter + normalize one image");
    std::string pre_in, pre_out, pre_bg;
    double pre_sigma = 1.0, pre_eps = 1e-8;
    int pre_radius = 0;
    bool pre_rescale = false;
    pre->add_option("--in", pre_in, "input PGM/PPM")->required();
    pre->add_option("--out", pre_out, "output image")->required();
    pre->add_option("--sigma", pre_sigma, "gaussian sigma");
    pre->add_option("--radius", pre_radius, "kernel radius (default ceil(3 sigma))");
    pre->add_option("--background", pre_bg, "background frame to subtract");
    pre->add_option("--cn-epsilon", pre_eps, "contrast normalization epsilon");
    pre->add_flag("--rescale", pre_rescale, "min-max rescale to [0,1] before saving");

    auto* seg = app.add_subcommand("segment", "entropy threshold search on one image");
    std::string seg_in, seg_strategy = "exhaustive", seg_out;
    int seg_levels = 1;
    std::uint64_t seg_seed = 0;
    seg->add_option("--in", seg_in, "input PGM/PPM")->required();
    seg->add_option("--levels", seg_levels, "threshold count (1..4)");
    seg->add_option("--strategy", seg_strategy, "exhaustive|woa")
        ->check(CLI::IsMember({"exhaustive", "woa"}));
    seg->add_option("--seed", seg_seed, "woa strategy seed");
    seg->add_option("--out", seg_out, "write the label map as PGM");

    auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset folder");
    std::string eval_ckpt, eval_data, eval_out;
    ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    ev->add_option("--data", eval_data, "class-per-subdirectory dataset")->required();
    ev->add_option("--out", eval_out, "directory for metrics.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_config, ov);
        if (synth->parsed())
            return cmd_synth(synth_out, synth_kind, synth_n, synth_size, synth_noise, synth_seed);
        if (pre->parsed())
            return cmd_preprocess(pre_in, pre_out, pre_sigma, pre_radius, pre_bg, pre_eps,
                                  pre_rescale);
        if (seg->parsed()) return cmd_segment(seg_in, seg_levels, seg_strategy, seg_seed, seg_out);
        if (ev->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_out);
    } catch (const hodcnn::Error& e) {
        std::cerr << "error [" << hodcnn::error_kind_name(e.kind()) << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
