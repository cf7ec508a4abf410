#include "hodcnn/pipeline.hpp"

#include "hodcnn/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace hodcnn {

namespace {

constexpr double kInfeasiblePenalty = 1e6;

// Inner train/validation pair shared by every fitness evaluation.
struct InnerSplit {
    TrainingSet train;
    TrainingSet val;
};

NetworkSpec spec_from_decoded(const std::vector<double>& decoded, const NetworkSpec& base) {
    NetworkSpec spec = base;
    spec.kernel_size = static_cast<int>(decoded[0]);
    spec.feature_maps = static_cast<int>(decoded[1]);
    spec.pooling = decoded[2] < 0.5 ? Pooling::max : Pooling::average;
    return spec;
}

std::uint64_t spec_tag(const NetworkSpec& spec) {
    return static_cast<std::uint64_t>(spec.kernel_size) * 10000 +
           static_cast<std::uint64_t>(spec.feature_maps) * 10 +
           (spec.pooling == Pooling::max ? 0 : 1);
}

} // namespace

SearchSpace default_network_space() {
    SearchSpace space;
    space.dims.push_back(CategoricalDim{{3, 5, 7}});
    space.dims.push_back(CategoricalDim{{4, 8, 16, 32}});
    space.dims.push_back(CategoricalDim{{0, 1}}); // 0 = max, 1 = average
    return space;
}

TuneResult woa_tune(const Dataset& train_set, const SearchSpace& space, const WoaBudget& budget,
                    const TrainConfig& inner_config, const NetworkSpec& base_spec) {
    SplitSpec inner_spec;
    inner_spec.train_fraction = 0.8;
    inner_spec.seed = derive_seed(budget.seed, 0xfeed);
    auto [inner_train_ds, inner_val_ds] = split(train_set, inner_spec);
    InnerSplit inner{to_training_set(inner_train_ds), to_training_set(inner_val_ds)};

    auto fitness = [&](const std::vector<double>& position) -> double {
        NetworkSpec spec = spec_from_decoded(decode(position, space), base_spec);
        TrainConfig cfg = inner_config;
        cfg.seed = derive_seed(inner_config.seed, spec_tag(spec));
        try {
            auto [params, report] = train(spec, inner.train, nullptr, cfg);
            Tensor probs;
            {
                Tensor batch({inner.val.size(), 1, inner.val.inputs[0].dim(1),
                              inner.val.inputs[0].dim(2)});
                std::size_t len = inner.val.inputs[0].numel();
                for (std::size_t i = 0; i < inner.val.size(); ++i)
                    std::copy(inner.val.inputs[i].data.begin(), inner.val.inputs[i].data.end(),
                              batch.data.begin() + static_cast<std::ptrdiff_t>(i * len));
                probs = network_forward(spec, params, batch);
            }
            return bce_loss(probs, one_hot(inner.val.labels, inner.val.num_classes));
        } catch (const Error& e) {
            // Geometry that cannot pass through the network (e.g. a kernel
            // larger than a block input) scores a finite penalty so the
            // search keeps moving. Anything else is a real failure.
            if (e.kind() == ErrorKind::shape_mismatch) return kInfeasiblePenalty;
            throw;
        }
    };

    WoaConfig config;
    config.population_size = budget.population;
    config.max_iterations = budget.iterations;
    config.seed = budget.seed;
    OptResult opt = optimize(fitness, space, config);
    require(opt.best_fitness < kInfeasiblePenalty, ErrorKind::invalid_argument,
            "no feasible hyperparameters found: every candidate network was too large for " +
                std::to_string(inner.train.inputs[0].dim(1)) + "x" +
                std::to_string(inner.train.inputs[0].dim(2)) + " inputs; raise the WOA budget, "
                "shrink the kernel options or use fewer conv blocks");

    TuneResult result;
    result.spec = spec_from_decoded(decode(opt.best_position, space), base_spec);
    result.opt = std::move(opt);
    return result;
}

EvalResult evaluate(const NetworkSpec& spec, const LayerParams& params, const Dataset& test_set) {
    test_set.validate();
    TrainingSet set = to_training_set(test_set);

    std::vector<int> predicted(set.size());
    Tensor scores({set.size(), static_cast<std::size_t>(spec.num_classes)});
    constexpr std::size_t kEvalBatch = 64;
    for (std::size_t begin = 0; begin < set.size(); begin += kEvalBatch) {
        std::size_t end = std::min(begin + kEvalBatch, set.size());
        Tensor batch({end - begin, 1, set.inputs[0].dim(1), set.inputs[0].dim(2)});
        std::size_t len = set.inputs[0].numel();
        for (std::size_t i = begin; i < end; ++i)
            std::copy(set.inputs[i].data.begin(), set.inputs[i].data.end(),
                      batch.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * len));
        Tensor probs = network_forward(spec, params, batch);
        for (std::size_t i = begin; i < end; ++i) {
            predicted[i] = predict_class(probs, i - begin);
            for (std::size_t c = 0; c < probs.dim(1); ++c)
                scores.at2(i, c) = probs.at2(i - begin, c);
        }
    }

    EvalResult result;
    result.metrics = Metrics::from_predictions(set.labels, predicted, set.num_classes);

    auto curve_for_class = [&](int cls) {
        std::vector<double> s(set.size());
        std::vector<bool> pos(set.size());
        for (std::size_t i = 0; i < set.size(); ++i) {
            s[i] = scores.at2(i, static_cast<std::size_t>(cls));
            pos[i] = set.labels[i] == cls;
        }
        return roc_curve(s, pos);
    };

    if (set.num_classes == 2) {
        result.roc.push_back(curve_for_class(1));
        result.auc = result.roc[0].auc;
    } else {
        double sum = 0.0;
        for (int c = 0; c < set.num_classes; ++c) {
            result.roc.push_back(curve_for_class(c));
            sum += result.roc.back().auc;
        }
        result.auc = sum / set.num_classes;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Run configuration parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail(ErrorKind::invalid_argument, "config key '" + key + "': bad number '" + v + "'");
    }
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        fail(ErrorKind::invalid_argument, "config key '" + key + "': bad integer '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    fail(ErrorKind::invalid_argument, "config key '" + key + "': bad flag '" + v + "'");
}

} // namespace

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::file_not_found, "cannot open config: " + path);

    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        require(eq != std::string::npos, ErrorKind::invalid_argument,
                path + ":" + std::to_string(line_no) + ": expected key=value");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));

        if (key == "data_dir") cfg.data_dir = value;
        else if (key == "synth_kind") cfg.synth_kind = value;
        else if (key == "synth_per_class") cfg.synth_per_class = static_cast<int>(parse_int(value, key));
        else if (key == "synth_size") cfg.synth_size = static_cast<int>(parse_int(value, key));
        else if (key == "synth_noise") cfg.synth_noise = parse_double(value, key);
        else if (key == "synth_seed") cfg.synth_seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "resize") cfg.resize = static_cast<int>(parse_int(value, key));
        else if (key == "sigma") cfg.sigma = parse_double(value, key);
        else if (key == "radius") cfg.radius = static_cast<int>(parse_int(value, key));
        else if (key == "background") cfg.background_path = value;
        else if (key == "cn_epsilon") cfg.cn_epsilon = parse_double(value, key);
        else if (key == "seg_levels") cfg.seg_levels = static_cast<int>(parse_int(value, key));
        else if (key == "seg_strategy") {
            if (value == "exhaustive") cfg.seg_strategy = ThresholdStrategy::exhaustive;
            else if (value == "woa") cfg.seg_strategy = ThresholdStrategy::woa;
            else fail(ErrorKind::invalid_argument, "seg_strategy must be exhaustive or woa");
        }
        else if (key == "seg_dump") cfg.seg_dump = parse_bool(value, key);
        else if (key == "seg_mask_input") cfg.seg_mask_input = parse_bool(value, key);
        else if (key == "seg_seed") cfg.seg_seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "train_fraction") cfg.train_fraction = parse_double(value, key);
        else if (key == "split_seed") cfg.split_seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "woa_population") cfg.woa.population = static_cast<int>(parse_int(value, key));
        else if (key == "woa_iterations") cfg.woa.iterations = static_cast<int>(parse_int(value, key));
        else if (key == "woa_seed") cfg.woa.seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "inner_epochs") cfg.inner_epochs = static_cast<int>(parse_int(value, key));
        else if (key == "final_epochs") cfg.final_epochs = static_cast<int>(parse_int(value, key));
        else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(value, key));
        else if (key == "learning_rate") cfg.learning_rate = parse_double(value, key);
        else if (key == "train_seed") cfg.train_seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "weight_init_scale") cfg.weight_init_scale = parse_double(value, key);
        else if (key == "conv_blocks") cfg.conv_blocks = static_cast<int>(parse_int(value, key));
        else if (key == "dense_units") cfg.dense_units = static_cast<int>(parse_int(value, key));
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "wall_time_in_csv") cfg.wall_time_in_csv = parse_bool(value, key);
        else fail(ErrorKind::invalid_argument,
                  path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// run_pipeline
// ---------------------------------------------------------------------------

namespace {

// Affine rescale to [0, 1] so the entropy histogram is defined on
// contrast-normalized pixels; a constant image maps to all zeros.
Image rescale_unit(const Image& image) {
    double lo = image.pixels[0], hi = image.pixels[0];
    for (double v : image.pixels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Image out = image;
    double span = hi - lo;
    for (double& v : out.pixels) v = span > 0.0 ? (v - lo) / span : 0.0;
    return out;
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    out << body;
    if (!out) fail(ErrorKind::io, "short write to " + path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

RunReport run_pipeline(const RunConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    fs::path out_dir(config.out_dir);
    fs::path metrics_path = out_dir / "metrics.csv";
    fs::path roc_path = out_dir / "roc.csv";
    fs::path trace_path = out_dir / "woa_trace.csv";
    fs::path report_path = out_dir / "train_report.csv";
    fs::path checkpoint_path = out_dir / "checkpoint.bin";
    fs::path segments_dir = out_dir / "segments";

    std::string stage = "ingest";
    try {
        Dataset dataset = config.data_dir.empty()
                              ? gen_synthetic(config.synth_kind, config.synth_per_class,
                                              config.synth_size, config.synth_noise,
                                              config.synth_seed)
                              : load_folder_dataset(config.data_dir, config.resize, config.resize);
        std::cout << "[ingest] " << dataset.size() << " samples, " << dataset.num_classes()
                  << " classes, " << dataset.images[0].width << "x" << dataset.images[0].height
                  << "\n";

        stage = "split";
        SplitSpec split_spec;
        split_spec.train_fraction = config.train_fraction;
        split_spec.seed = config.split_seed;
        auto [train_ds, test_ds] = split(dataset, split_spec);
        std::cout << "[split] train " << train_ds.size() << " / test " << test_ds.size() << "\n";

        stage = "preprocess";
        PreprocessParams pp;
        pp.sigma = config.sigma;
        pp.radius = config.radius;
        pp.cn_epsilon = config.cn_epsilon;
        if (!config.background_path.empty())
            pp.background = to_grayscale(load_image(config.background_path));
        train_ds = preprocess_all(train_ds, pp);
        test_ds = preprocess_all(test_ds, pp);

        stage = "segment";
        if (config.seg_dump || config.seg_mask_input) {
            if (config.seg_dump) fs::create_directories(segments_dir);
            ThresholdSearchOptions seg_opts;
            seg_opts.seed = config.seg_seed;
            std::size_t dumped = 0;
            auto segment_side = [&](Dataset& side, const char* tag) {
                for (std::size_t i = 0; i < side.images.size(); ++i) {
                    Image unit = rescale_unit(side.images[i]);
                    ThresholdResult tr = optimal_thresholds(histogram(unit), config.seg_levels,
                                                            config.seg_strategy, seg_opts);
                    LabelMap map = segment(unit, tr.thresholds);
                    if (config.seg_dump) {
                        Image vis = Image::zeros(map.width, map.height);
                        for (std::size_t p = 0; p < vis.pixels.size(); ++p)
                            vis.pixels[p] = static_cast<double>(map.labels[p]) / config.seg_levels;
                        char name[48];
                        std::snprintf(name, sizeof name, "%s_%05zu.pgm", tag, i);
                        save_image(vis, (segments_dir / name).string());
                        ++dumped;
                    }
                    if (config.seg_mask_input) {
                        // Zero the background band (label 0), keep the rest.
                        for (std::size_t p = 0; p < side.images[i].pixels.size(); ++p)
                            if (map.labels[p] == 0) side.images[i].pixels[p] = 0.0;
                    }
                }
            };
            segment_side(train_ds, "train");
            segment_side(test_ds, "test");
            std::cout << "[segment] levels=" << config.seg_levels
                      << (config.seg_mask_input ? ", masked network inputs" : "")
                      << (config.seg_dump ? ", dumped " + std::to_string(dumped) + " maps" : "")
                      << "\n";
        }

        stage = "tune";
        NetworkSpec base;
        base.conv_blocks = config.conv_blocks;
        base.dense_units = config.dense_units;
        base.num_classes = dataset.num_classes();
        TuneResult tuned = woa_tune(train_ds, default_network_space(), config.woa,
                                    config.inner_train_config(), base);
        std::cout << "[tune] kernel=" << tuned.spec.kernel_size
                  << " feature_maps=" << tuned.spec.feature_maps << " pooling="
                  << (tuned.spec.pooling == Pooling::max ? "max" : "average")
                  << " (validation loss " << tuned.opt.best_fitness << ", "
                  << tuned.opt.evaluations << " evaluations)\n";

        stage = "final-train";
        TrainingSet train_ts = to_training_set(train_ds);
        TrainingSet test_ts = to_training_set(test_ds);
        auto [params, train_report] =
            train(tuned.spec, train_ts, &test_ts, config.final_train_config());
        std::cout << "[final-train] " << train_report.epochs.size() << " epochs, loss "
                  << train_report.epochs.front().train_loss << " -> "
                  << train_report.epochs.back().train_loss << "\n";

        stage = "evaluate";
        EvalResult eval = evaluate(tuned.spec, params, test_ds);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        eval.metrics.wall_time_seconds = wall;

        stage = "write";
        {
            // time_s is pinned to 0 unless wall_time_in_csv is set, keeping
            // repeated runs byte-identical; the measured time always goes
            // to stdout.
            std::ostringstream os;
            os << "accuracy,specificity,sensitivity,time_s,error\n";
            os << format_double(eval.metrics.accuracy) << ","
               << format_double(eval.metrics.specificity) << ","
               << format_double(eval.metrics.sensitivity) << ","
               << format_double(config.wall_time_in_csv ? wall : 0.0) << ","
               << format_double(eval.metrics.error) << "\n";
            write_text_file(metrics_path.string(), os.str());
        }
        {
            std::ostringstream os;
            os << "fpr,tpr\n";
            for (const RocPoint& p : eval.roc[0].points)
                os << format_double(p.fpr) << "," << format_double(p.tpr) << "\n";
            os << "auc," << format_double(eval.auc) << "\n";
            write_text_file(roc_path.string(), os.str());
        }
        write_trace_csv(tuned.opt, trace_path.string());
        {
            std::ostringstream os;
            os << "epoch,loss,val_loss,acc,val_acc\n";
            for (std::size_t e = 0; e < train_report.epochs.size(); ++e) {
                const EpochStats& s = train_report.epochs[e];
                os << (e + 1) << "," << format_double(s.train_loss) << ","
                   << format_double(s.val_loss) << "," << format_double(s.train_accuracy) << ","
                   << format_double(s.val_accuracy) << "\n";
            }
            write_text_file(report_path.string(), os.str());
        }
        save_checkpoint(tuned.spec, params, checkpoint_path.string());

        std::cout << "[evaluate] accuracy " << eval.metrics.accuracy << ", sensitivity "
                  << eval.metrics.sensitivity << ", specificity " << eval.metrics.specificity
                  << ", auc " << eval.auc << ", wall time " << wall << " s\n";

        RunReport report;
        report.spec = tuned.spec;
        report.metrics = eval.metrics;
        report.auc = eval.auc;
        report.wall_seconds = wall;
        return report;
    } catch (const std::exception& e) {
        std::error_code ec;
        for (const fs::path& p :
             {metrics_path, roc_path, trace_path, report_path, checkpoint_path})
            fs::remove(p, ec);
        fs::remove_all(segments_dir, ec);
        if (const auto* err = dynamic_cast<const Error*>(&e))
            throw Error(err->kind(), "stage " + stage + ": " + err->what());
        throw Error(ErrorKind::io, "stage " + stage + ": " + e.what());
    }
}

} // namespace hodcnn
