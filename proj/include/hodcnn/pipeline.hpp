#ifndef HODCNN_PIPELINE_HPP
#define HODCNN_PIPELINE_HPP

#include "hodcnn/dataset.hpp"
#include "hodcnn/metrics.hpp"
#include "hodcnn/micronet.hpp"
#include "hodcnn/segmentation.hpp"
#include "hodcnn/woa.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hodcnn {

/// Whale budget for hyperparameter search.
struct WoaBudget {
    int population = 6;
    int iterations = 5;
    std::uint64_t seed = 7;
};

/// Tuned structural hyperparameters: kernel size in {3,5,7}, feature-map
/// count in {4,8,16,32}, pooling type in {max, average}, in that dimension
/// order.
SearchSpace default_network_space();

struct TuneResult {
    NetworkSpec spec;
    OptResult opt;
};

/// Minimizes the validation BCE loss of candidate networks over the search
/// space. The training split is divided once into an inner stratified
/// 80/20 train/validation pair; each whale decodes to a spec (dimension
/// order of default_network_space), trains under the fixed inner budget
/// with a seed derived from the decoded spec, and reports the validation
/// loss. Candidates that cannot be built for the input geometry score a
/// large finite penalty instead of aborting the search.
TuneResult woa_tune(const Dataset& train_set, const SearchSpace& space, const WoaBudget& budget,
                    const TrainConfig& inner_config, const NetworkSpec& base_spec);

struct EvalResult {
    Metrics metrics;
    std::vector<RocCurve> roc; // one curve for C == 2 (class 1), else one per class
    double auc = 0.0;          // class-1 AUC for C == 2, macro average otherwise
};

/// Scores a trained network on a test set: argmax prediction (ties to the
/// lowest class), micro-averaged one-vs-rest metrics, ROC from the
/// logistic scores.
EvalResult evaluate(const NetworkSpec& spec, const LayerParams& params, const Dataset& test_set);

/// Full run configuration; the defaults reproduce the built-in synthetic
/// square-vs-disc experiment.
struct RunConfig {
    // dataset source: a class-per-subdirectory folder, or synthetic when empty
    std::string data_dir;
    std::string synth_kind = "shapes";
    int synth_per_class = 200;
    int synth_size = 16;
    double synth_noise = 0.05;
    std::uint64_t synth_seed = 42;
    int resize = 16; // ingestion size for folder datasets

    // preprocessing
    double sigma = 0.3;
    int radius = 0; // 0 = default ceil(3 sigma)
    std::string background_path;
    double cn_epsilon = 1e-8;

    // segmentation artifacts
    int seg_levels = 1;
    ThresholdStrategy seg_strategy = ThresholdStrategy::exhaustive;
    bool seg_dump = false;
    bool seg_mask_input = false;
    std::uint64_t seg_seed = 5;

    // split
    double train_fraction = 0.8;
    std::uint64_t split_seed = 11;

    // hyperparameter search
    WoaBudget woa;

    // training
    int inner_epochs = 5;
    int final_epochs = 30;
    int batch_size = 8;
    double learning_rate = 0.3;
    std::uint64_t train_seed = 3;
    double weight_init_scale = 1.0;
    int conv_blocks = 2;
    int dense_units = 32;

    // output
    std::string out_dir = ".";
    bool wall_time_in_csv = false;

    TrainConfig inner_train_config() const {
        return {learning_rate, inner_epochs, batch_size, train_seed, weight_init_scale};
    }
    TrainConfig final_train_config() const {
        return {learning_rate, final_epochs, batch_size, train_seed, weight_init_scale};
    }
};

/// Parses the key=value run-configuration format ('#' comments, blank
/// lines ignored). Unknown keys are rejected.
RunConfig parse_run_config(const std::string& path);

struct RunReport {
    NetworkSpec spec;
    Metrics metrics;
    double auc = 0.0;
    double wall_seconds = 0.0;
};

/// End-to-end run: ingest, split, preprocess, optional segmentation
/// artifacts, WOA tuning, final training, evaluation. Writes metrics.csv,
/// roc.csv, woa_trace.csv, train_report.csv and checkpoint.bin into
/// config.out_dir; on failure the partial outputs are removed and the
/// error is re-tagged with the failing stage.
RunReport run_pipeline(const RunConfig& config);

} // namespace hodcnn

#endif
