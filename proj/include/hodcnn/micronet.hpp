#ifndef HODCNN_MICRONET_HPP
#define HODCNN_MICRONET_HPP

#include "hodcnn/rng.hpp"
#include "hodcnn/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hodcnn {

enum class Pooling { max, average };
enum class Mode { train, eval };

/// Structural hyperparameters of the classifier. Stride is fixed at 1 and
/// the pooling window at 2x2.
struct NetworkSpec {
    int kernel_size = 3;  // odd, >= 3
    int feature_maps = 8; // output channels of every conv block
    Pooling pooling = Pooling::max;
    int conv_blocks = 2;
    int dense_units = 32;
    int num_classes = 2;

    void validate() const;
};

/// One conv block: convolution weights/bias plus batch-norm state.
struct ConvBlockParams {
    Tensor weights;      // (out_ch, in_ch, k, k)
    Tensor bias;         // (out_ch)
    Tensor gamma;        // (out_ch)
    Tensor beta;         // (out_ch)
    Tensor running_mean; // (out_ch)
    Tensor running_var;  // (out_ch)
};

/// All learnable state plus the input geometry it was sized for.
/// Checkpoint declaration order: per block weights, bias, gamma, beta,
/// running_mean, running_var; then fc1_w, fc1_b, fc2_w, fc2_b.
struct LayerParams {
    int input_height = 0;
    int input_width = 0;
    std::vector<ConvBlockParams> blocks;
    Tensor fc1_w, fc1_b; // hidden dense layer (dense_units, flat), (dense_units)
    Tensor fc2_w, fc2_b; // logistic output layer (C, dense_units), (C)
};

/// Gradients for every learnable tensor (running stats excluded).
struct Gradients {
    struct Block {
        Tensor weights, bias, gamma, beta;
    };
    std::vector<Block> blocks;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;

    double max_abs() const;
};

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 10;
    int batch_size = 16;
    std::uint64_t seed = 1;
    double weight_init_scale = 1.0;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double wall_seconds = 0.0;
};

/// Classifier inputs as tensors: one (C, H, W) sample per entry.
struct TrainingSet {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    int num_classes = 2;

    std::size_t size() const { return inputs.size(); }
};

// ---------------------------------------------------------------------------
// Layer operations. All tensors are (N, C, H, W) unless noted.
// ---------------------------------------------------------------------------

/// Valid (no padding) stride-1 cross-correlation plus bias, passed through
/// the rectifier. Output is (N, out_ch, H-k+1, W-k+1).
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Non-overlapping pooling with stride equal to the window; trailing rows
/// and columns that do not fill a window are dropped. Output spatial size
/// is (floor(H/win_h), floor(W/win_w)); channel count is preserved.
Tensor pool_forward(const Tensor& input, int win_h, int win_w, Pooling type);

/// Flat source index of each pooled element under max pooling — the first
/// window maximum in row-major window order, which is where the backward
/// pass routes the gradient (ties go to the first occurrence).
std::vector<std::size_t> pool_max_sources(const Tensor& input, int win_h, int win_w);

/// Elementwise max(0, x).
Tensor mrelu(const Tensor& x);

/// Per-channel batch normalization. Accepts (N, C, H, W) or (N, C); train
/// mode normalizes by batch statistics with the variance floored at 1e-5,
/// then updates the running statistics with momentum 0.9. Eval mode uses
/// the running statistics. Train mode requires N >= 2.
Tensor batchnorm_forward(const Tensor& x, ConvBlockParams& params, Mode mode);

/// Affine map plus elementwise logistic; x is (N, F), weights (C, F),
/// bias (C). Output entries are strictly in (0, 1).
Tensor dense_logistic_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// Mean over samples of the summed per-class binary cross-entropy,
/// -(1/N) sum_n sum_c [t ln p + (1-t) ln(1-p)], with probabilities clipped
/// to [1e-12, 1-1e-12] before the logs. Always >= 0.
double bce_loss(const Tensor& predictions, const Tensor& targets);

// ---------------------------------------------------------------------------
// Whole-network operations.
// ---------------------------------------------------------------------------

/// conv_blocks x (conv2d_forward -> batchnorm -> mrelu -> 2x2 pool), then
/// flatten -> dense(dense_units) -> mrelu -> dense_logistic. Train mode
/// updates the running batch-norm statistics in params.
Tensor network_forward(const NetworkSpec& spec, LayerParams& params, const Tensor& batch,
                       Mode mode);

/// Eval-mode forward; pure function of (params, batch).
Tensor network_forward(const NetworkSpec& spec, const LayerParams& params, const Tensor& batch);

struct BackwardResult {
    Gradients grads;
    double loss = 0.0;
    Tensor probs;
};

/// Exact gradients of bce_loss under train-mode statistics. Max pooling
/// routes gradient to the first window maximum; the rectifier passes
/// gradient only where its pre-activation was positive. Running statistics
/// in params are not advanced.
BackwardResult network_backward(const NetworkSpec& spec, const LayerParams& params,
                                const Tensor& batch, const Tensor& targets);

/// Seeded parameter initialization for the given input geometry. Weights
/// are uniform in +-scale/sqrt(fan_in), drawn block by block (conv weights
/// row-major, then fc1_w, then fc2_w); biases start at 0, gamma at 1, and
/// the running statistics at (0, 1). Throws if the geometry cannot pass
/// through the network (kernel larger than a block input).
LayerParams init_params(const NetworkSpec& spec, int input_height, int input_width, Rng& rng,
                        double weight_init_scale = 1.0);

/// Mini-batch gradient descent for config.epochs epochs. Per-epoch sample
/// order is a seeded shuffle; a trailing batch of one sample is merged into
/// its predecessor so batch normalization always sees N >= 2. If val is
/// non-null the report carries eval-mode validation loss/accuracy per
/// epoch. Deterministic given config.seed.
std::pair<LayerParams, TrainReport> train(const NetworkSpec& spec, const TrainingSet& data,
                                          const TrainingSet* val, const TrainConfig& config);

/// Binary checkpoint: "HODC" magic, u32 version, i32 spec fields
/// (kernel_size, feature_maps, pooling, conv_blocks, dense_units,
/// num_classes, input_height, input_width), then every parameter tensor in
/// declaration order as raw little-endian 64-bit floats. Round-trips
/// bitwise.
void save_checkpoint(const NetworkSpec& spec, const LayerParams& params, const std::string& path);
std::pair<NetworkSpec, LayerParams> load_checkpoint(const std::string& path);

/// Argmax class with ties resolved to the lowest index.
int predict_class(const Tensor& probs, std::size_t row);

/// One-hot (N, C) target tensor.
Tensor one_hot(const std::vector<int>& labels, int num_classes);

} // namespace hodcnn

#endif
