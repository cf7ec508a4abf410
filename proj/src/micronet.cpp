#include "hodcnn/micronet.hpp"

#include "hodcnn/error.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace hodcnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; add byte swapping for this platform");

namespace {

constexpr double kBnVarianceFloor = 1e-5;
constexpr double kBnMomentum = 0.9;
constexpr double kProbClip = 1e-12;
constexpr int kPoolWindow = 2;

void check_4d(const Tensor& t, const char* what) {
    require(t.shape.size() == 4, ErrorKind::shape_mismatch,
            std::string(what) + " must be a 4-D (N, C, H, W) tensor");
}

} // namespace

void NetworkSpec::validate() const {
    require(kernel_size >= 3 && kernel_size % 2 == 1, ErrorKind::invalid_argument,
            "kernel_size must be odd and >= 3");
    require(feature_maps >= 1, ErrorKind::invalid_argument, "feature_maps must be >= 1");
    require(conv_blocks >= 1, ErrorKind::invalid_argument, "conv_blocks must be >= 1");
    require(dense_units >= 1, ErrorKind::invalid_argument, "dense_units must be >= 1");
    require(num_classes >= 2, ErrorKind::invalid_argument, "num_classes must be >= 2");
}

double Gradients::max_abs() const {
    double m = 0.0;
    auto scan = [&m](const Tensor& t) {
        for (double v : t.data) m = std::max(m, std::abs(v));
    };
    for (const Block& b : blocks) {
        scan(b.weights);
        scan(b.bias);
        scan(b.gamma);
        scan(b.beta);
    }
    scan(fc1_w);
    scan(fc1_b);
    scan(fc2_w);
    scan(fc2_b);
    return m;
}

// ---------------------------------------------------------------------------
// Elementwise and layer primitives
// ---------------------------------------------------------------------------

Tensor mrelu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

namespace {

// Cross-correlation + bias without the activation; shared by the public op
// and the cached forward pass.
Tensor conv2d_linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    check_4d(input, "conv input");
    require(weights.shape.size() == 4, ErrorKind::shape_mismatch,
            "conv weights must be (out_ch, in_ch, kh, kw)");
    std::size_t n_batch = input.dim(0), in_ch = input.dim(1);
    std::size_t in_h = input.dim(2), in_w = input.dim(3);
    std::size_t out_ch = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    require(weights.dim(1) == in_ch, ErrorKind::shape_mismatch,
            "conv weights channel count does not match input");
    require(bias.numel() == out_ch, ErrorKind::shape_mismatch, "conv bias length mismatch");
    require(kh <= in_h && kw <= in_w, ErrorKind::shape_mismatch,
            "kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " exceeds input " +
                std::to_string(in_h) + "x" + std::to_string(in_w));

    std::size_t out_h = in_h - kh + 1, out_w = in_w - kw + 1;
    Tensor out({n_batch, out_ch, out_h, out_w});
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t o = 0; o < out_ch; ++o)
            for (std::size_t y = 0; y < out_h; ++y)
                for (std::size_t x = 0; x < out_w; ++x) {
                    double acc = bias[o];
                    for (std::size_t i = 0; i < in_ch; ++i) {
                        const double* in_row = &input.data[((n * in_ch + i) * in_h + y) * in_w + x];
                        const double* w_row = &weights.data[((o * in_ch + i) * kh) * kw];
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            for (std::size_t kx = 0; kx < kw; ++kx)
                                acc += in_row[kx] * w_row[kx];
                            in_row += in_w;
                            w_row += kw;
                        }
                    }
                    out.at4(n, o, y, x) = acc;
                }
    return out;
}

// Pooling with optional argmax capture (max pooling only).
Tensor pool_core(const Tensor& input, int win_h, int win_w, Pooling type,
                 std::vector<std::size_t>* argmax) {
    check_4d(input, "pool input");
    require(win_h >= 1 && win_w >= 1, ErrorKind::invalid_argument, "pool window must be >= 1");
    std::size_t n_batch = input.dim(0), ch = input.dim(1);
    std::size_t in_h = input.dim(2), in_w = input.dim(3);
    require(static_cast<std::size_t>(win_h) <= in_h && static_cast<std::size_t>(win_w) <= in_w,
            ErrorKind::shape_mismatch, "pool window exceeds input");

    std::size_t out_h = in_h / win_h, out_w = in_w / win_w;
    Tensor out({n_batch, ch, out_h, out_w});
    if (argmax) argmax->assign(out.numel(), 0);

    double scale = 1.0 / (static_cast<double>(win_h) * win_w);
    std::size_t flat = 0;
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t y = 0; y < out_h; ++y)
                for (std::size_t x = 0; x < out_w; ++x, ++flat) {
                    if (type == Pooling::max) {
                        double best = -std::numeric_limits<double>::infinity();
                        std::size_t best_idx = 0;
                        for (int dy = 0; dy < win_h; ++dy)
                            for (int dx = 0; dx < win_w; ++dx) {
                                std::size_t idx = ((n * ch + c) * in_h + y * win_h + dy) * in_w +
                                                  x * win_w + dx;
                                if (input.data[idx] > best) { // first max wins ties
                                    best = input.data[idx];
                                    best_idx = idx;
                                }
                            }
                        out.data[flat] = best;
                        if (argmax) (*argmax)[flat] = best_idx;
                    } else {
                        double acc = 0.0;
                        for (int dy = 0; dy < win_h; ++dy)
                            for (int dx = 0; dx < win_w; ++dx)
                                acc += input.at4(n, c, y * win_h + dy, x * win_w + dx);
                        out.data[flat] = acc * scale;
                    }
                }
    return out;
}

struct BnCache {
    Tensor xhat;
    std::vector<double> inv_s; // 1 / sqrt(floored variance), per channel
    std::vector<bool> floored;
};

// Channel geometry for (N, C, ...) tensors: stats reduce over every axis
// except axis 1.
struct ChannelView {
    std::size_t n_batch, channels, spatial;
};

ChannelView channel_view(const Tensor& x) {
    require(x.shape.size() == 4 || x.shape.size() == 2, ErrorKind::shape_mismatch,
            "batch norm expects a (N, C, H, W) or (N, C) tensor");
    ChannelView v{x.dim(0), x.dim(1), 1};
    if (x.shape.size() == 4) v.spatial = x.dim(2) * x.dim(3);
    return v;
}

Tensor batchnorm_core(const Tensor& x, const ConvBlockParams& params, Mode mode, BnCache* cache,
                      ConvBlockParams* stats_sink) {
    ChannelView v = channel_view(x);
    require(params.gamma.numel() == v.channels, ErrorKind::shape_mismatch,
            "batch-norm parameter length does not match channel count");
    if (mode == Mode::train)
        require(v.n_batch >= 2, ErrorKind::invalid_argument,
                "train-mode batch norm needs a batch of at least 2");

    Tensor out = x;
    if (cache) {
        cache->xhat = Tensor(x.shape);
        cache->inv_s.assign(v.channels, 0.0);
        cache->floored.assign(v.channels, false);
    }

    double m_count = static_cast<double>(v.n_batch * v.spatial);
    for (std::size_t c = 0; c < v.channels; ++c) {
        double mean, var;
        bool floored = false;
        if (mode == Mode::train) {
            double sum = 0.0;
            for (std::size_t n = 0; n < v.n_batch; ++n) {
                const double* p = &x.data[(n * v.channels + c) * v.spatial];
                for (std::size_t s = 0; s < v.spatial; ++s) sum += p[s];
            }
            mean = sum / m_count;
            double sq = 0.0;
            for (std::size_t n = 0; n < v.n_batch; ++n) {
                const double* p = &x.data[(n * v.channels + c) * v.spatial];
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    double d = p[s] - mean;
                    sq += d * d;
                }
            }
            var = sq / m_count;
            if (stats_sink) {
                stats_sink->running_mean[c] =
                    kBnMomentum * stats_sink->running_mean[c] + (1.0 - kBnMomentum) * mean;
                stats_sink->running_var[c] =
                    kBnMomentum * stats_sink->running_var[c] + (1.0 - kBnMomentum) * var;
            }
        } else {
            mean = params.running_mean[c];
            var = params.running_var[c];
        }
        if (var < kBnVarianceFloor) {
            var = kBnVarianceFloor;
            floored = true;
        }
        double inv_s = 1.0 / std::sqrt(var);
        double g = params.gamma[c], b = params.beta[c];
        for (std::size_t n = 0; n < v.n_batch; ++n) {
            std::size_t base = (n * v.channels + c) * v.spatial;
            for (std::size_t s = 0; s < v.spatial; ++s) {
                double xhat = (x.data[base + s] - mean) * inv_s;
                if (cache) cache->xhat.data[base + s] = xhat;
                out.data[base + s] = g * xhat + b;
            }
        }
        if (cache) {
            cache->inv_s[c] = inv_s;
            cache->floored[c] = floored;
        }
    }
    return out;
}

Tensor dense_linear(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    require(x.shape.size() == 2, ErrorKind::shape_mismatch, "dense input must be (N, F)");
    require(weights.shape.size() == 2 && weights.dim(1) == x.dim(1), ErrorKind::shape_mismatch,
            "dense weight shape does not match input width " + std::to_string(x.dim(1)));
    require(bias.numel() == weights.dim(0), ErrorKind::shape_mismatch, "dense bias length mismatch");

    std::size_t n_batch = x.dim(0), out_n = weights.dim(0), in_n = x.dim(1);
    Tensor out({n_batch, out_n});
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t o = 0; o < out_n; ++o) {
            double acc = bias[o];
            const double* xr = &x.data[n * in_n];
            const double* wr = &weights.data[o * in_n];
            for (std::size_t i = 0; i < in_n; ++i) acc += xr[i] * wr[i];
            out.at2(n, o) = acc;
        }
    return out;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    return mrelu(conv2d_linear(input, weights, bias));
}

Tensor pool_forward(const Tensor& input, int win_h, int win_w, Pooling type) {
    return pool_core(input, win_h, win_w, type, nullptr);
}

std::vector<std::size_t> pool_max_sources(const Tensor& input, int win_h, int win_w) {
    std::vector<std::size_t> argmax;
    pool_core(input, win_h, win_w, Pooling::max, &argmax);
    return argmax;
}

Tensor batchnorm_forward(const Tensor& x, ConvBlockParams& params, Mode mode) {
    return batchnorm_core(x, params, mode, nullptr, mode == Mode::train ? &params : nullptr);
}

Tensor dense_logistic_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    Tensor out = dense_linear(x, weights, bias);
    for (double& v : out.data) v = logistic(v);
    return out;
}

double bce_loss(const Tensor& predictions, const Tensor& targets) {
    require(predictions.same_shape(targets), ErrorKind::shape_mismatch,
            "predictions and targets differ in shape");
    require(predictions.shape.size() == 2 && predictions.dim(0) >= 1, ErrorKind::invalid_argument,
            "loss expects a (N, C) tensor with N >= 1");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.numel(); ++i) {
        double t = targets[i];
        require(t == 0.0 || t == 1.0, ErrorKind::invalid_argument, "targets must be 0/1");
        double p = std::clamp(predictions[i], kProbClip, 1.0 - kProbClip);
        total += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return -total / static_cast<double>(predictions.dim(0));
}

// ---------------------------------------------------------------------------
// Whole-network forward/backward
// ---------------------------------------------------------------------------

namespace {

struct BlockGeom {
    std::size_t in_ch, in_h, in_w;   // block input
    std::size_t conv_h, conv_w;      // after valid conv
    std::size_t pool_h, pool_w;      // after 2x2 pool
};

std::vector<BlockGeom> network_geometry(const NetworkSpec& spec, std::size_t in_h,
                                        std::size_t in_w) {
    spec.validate();
    std::vector<BlockGeom> geom;
    std::size_t ch = 1, h = in_h, w = in_w;
    std::size_t k = static_cast<std::size_t>(spec.kernel_size);
    for (int b = 0; b < spec.conv_blocks; ++b) {
        require(h >= k && w >= k, ErrorKind::shape_mismatch,
                "conv block " + std::to_string(b) + ": kernel " + std::to_string(k) +
                    " exceeds input " + std::to_string(h) + "x" + std::to_string(w));
        BlockGeom g;
        g.in_ch = ch;
        g.in_h = h;
        g.in_w = w;
        g.conv_h = h - k + 1;
        g.conv_w = w - k + 1;
        g.pool_h = g.conv_h / kPoolWindow;
        g.pool_w = g.conv_w / kPoolWindow;
        require(g.pool_h >= 1 && g.pool_w >= 1, ErrorKind::shape_mismatch,
                "conv block " + std::to_string(b) + ": pooled output would be empty");
        geom.push_back(g);
        ch = static_cast<std::size_t>(spec.feature_maps);
        h = g.pool_h;
        w = g.pool_w;
    }
    return geom;
}

std::size_t flat_features(const NetworkSpec& spec, const std::vector<BlockGeom>& geom) {
    const BlockGeom& last = geom.back();
    return static_cast<std::size_t>(spec.feature_maps) * last.pool_h * last.pool_w;
}

struct BlockCache {
    Tensor conv_pre; // before the conv rectifier
    Tensor conv_out;
    BnCache bn;
    Tensor bn_out;
    Tensor relu_out;
    Tensor pool_out;
    std::vector<std::size_t> pool_src;
};

struct NetCache {
    Tensor flat;
    std::vector<BlockCache> blocks;
    Tensor fc1_pre, fc1_out;
    Tensor probs;
};

void check_batch(const NetworkSpec& spec, const LayerParams& params, const Tensor& batch) {
    check_4d(batch, "network input");
    require(batch.dim(1) == 1, ErrorKind::shape_mismatch, "network input must be single-channel");
    require(batch.dim(2) == static_cast<std::size_t>(params.input_height) &&
                batch.dim(3) == static_cast<std::size_t>(params.input_width),
            ErrorKind::shape_mismatch,
            "network input is " + std::to_string(batch.dim(2)) + "x" +
                std::to_string(batch.dim(3)) + " but parameters were built for " +
                std::to_string(params.input_height) + "x" + std::to_string(params.input_width));
    require(params.blocks.size() == static_cast<std::size_t>(spec.conv_blocks),
            ErrorKind::shape_mismatch, "parameter block count does not match spec");
}

// Single forward path for every mode. `cache` may be null (inference);
// `stats_sink` receives updated running statistics in train mode.
Tensor forward_pass(const NetworkSpec& spec, const LayerParams& params, const Tensor& batch,
                    Mode mode, NetCache* cache, LayerParams* stats_sink) {
    check_batch(spec, params, batch);
    std::size_t n_batch = batch.dim(0);

    Tensor x = batch;
    if (cache) cache->blocks.resize(params.blocks.size());
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        const ConvBlockParams& bp = params.blocks[b];
        BlockCache* bc = cache ? &cache->blocks[b] : nullptr;

        try {
            Tensor conv_pre = conv2d_linear(x, bp.weights, bp.bias);
            Tensor conv_out = mrelu(conv_pre);
            Tensor bn_out = batchnorm_core(conv_out, bp, mode, bc ? &bc->bn : nullptr,
                                           stats_sink ? &stats_sink->blocks[b] : nullptr);
            Tensor relu_out = mrelu(bn_out);
            Tensor pool_out = pool_core(
                relu_out, kPoolWindow, kPoolWindow, spec.pooling,
                bc && spec.pooling == Pooling::max ? &bc->pool_src : nullptr);
            if (bc) {
                bc->conv_pre = std::move(conv_pre);
                bc->conv_out = std::move(conv_out);
                bc->bn_out = std::move(bn_out);
                bc->relu_out = std::move(relu_out);
                bc->pool_out = pool_out;
            }
            x = std::move(pool_out);
        } catch (const Error& e) {
            fail(e.kind(), "conv block " + std::to_string(b) + ": " + e.what());
        }
    }

    // Flatten: per-sample blocks are contiguous in row-major (N, C, H, W).
    std::size_t features = x.numel() / n_batch;
    Tensor flat({n_batch, features});
    flat.data = x.data;
    require(flat.dim(1) == params.fc1_w.dim(1), ErrorKind::shape_mismatch,
            "flattened feature count does not match dense weights");

    Tensor fc1_pre = dense_linear(flat, params.fc1_w, params.fc1_b);
    Tensor fc1_out = mrelu(fc1_pre);
    Tensor probs = dense_logistic_forward(fc1_out, params.fc2_w, params.fc2_b);
    if (cache) {
        cache->flat = std::move(flat);
        cache->fc1_pre = std::move(fc1_pre);
        cache->fc1_out = std::move(fc1_out);
        cache->probs = probs;
    }
    return probs;
}

Gradients zero_gradients(const LayerParams& params) {
    Gradients g;
    g.blocks.resize(params.blocks.size());
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        g.blocks[b].weights = Tensor(params.blocks[b].weights.shape);
        g.blocks[b].bias = Tensor(params.blocks[b].bias.shape);
        g.blocks[b].gamma = Tensor(params.blocks[b].gamma.shape);
        g.blocks[b].beta = Tensor(params.blocks[b].beta.shape);
    }
    g.fc1_w = Tensor(params.fc1_w.shape);
    g.fc1_b = Tensor(params.fc1_b.shape);
    g.fc2_w = Tensor(params.fc2_w.shape);
    g.fc2_b = Tensor(params.fc2_b.shape);
    return g;
}

// Batch-norm backward. dx_i = (gamma * inv_s) * (dy_i - mean(dy)
// - xhat_i * mean(dy * xhat)); the last term drops where the variance
// floor was active (the floored denominator is a constant there).
Tensor batchnorm_backward(const Tensor& d_out, const Tensor& xhat, const ConvBlockParams& bp,
                          const BnCache& bn, Tensor& d_gamma, Tensor& d_beta) {
    ChannelView v = channel_view(d_out);
    Tensor d_in(d_out.shape);
    double m_count = static_cast<double>(v.n_batch * v.spatial);
    for (std::size_t c = 0; c < v.channels; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < v.n_batch; ++n) {
            std::size_t base = (n * v.channels + c) * v.spatial;
            for (std::size_t s = 0; s < v.spatial; ++s) {
                sum_dy += d_out.data[base + s];
                sum_dy_xhat += d_out.data[base + s] * xhat.data[base + s];
            }
        }
        d_gamma[c] += sum_dy_xhat;
        d_beta[c] += sum_dy;

        double g_inv_s = bp.gamma[c] * bn.inv_s[c];
        double mean_dy = sum_dy / m_count;
        double mean_dy_xhat = bn.floored[c] ? 0.0 : sum_dy_xhat / m_count;
        for (std::size_t n = 0; n < v.n_batch; ++n) {
            std::size_t base = (n * v.channels + c) * v.spatial;
            for (std::size_t s = 0; s < v.spatial; ++s)
                d_in.data[base + s] = g_inv_s * (d_out.data[base + s] - mean_dy -
                                                 xhat.data[base + s] * mean_dy_xhat);
        }
    }
    return d_in;
}

Tensor pool_backward(const Tensor& d_out, const BlockCache& bc, Pooling type) {
    const Tensor& in = bc.relu_out;
    Tensor d_in(in.shape);
    if (type == Pooling::max) {
        for (std::size_t i = 0; i < d_out.numel(); ++i) d_in.data[bc.pool_src[i]] += d_out.data[i];
        return d_in;
    }
    std::size_t n_batch = in.dim(0), ch = in.dim(1), in_h = in.dim(2), in_w = in.dim(3);
    std::size_t out_h = in_h / kPoolWindow, out_w = in_w / kPoolWindow;
    double scale = 1.0 / (kPoolWindow * kPoolWindow);
    std::size_t flat = 0;
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t y = 0; y < out_h; ++y)
                for (std::size_t x = 0; x < out_w; ++x, ++flat) {
                    double d = d_out.data[flat] * scale;
                    for (int dy = 0; dy < kPoolWindow; ++dy)
                        for (int dx = 0; dx < kPoolWindow; ++dx)
                            d_in.at4(n, c, y * kPoolWindow + dy, x * kPoolWindow + dx) += d;
                }
    return d_in;
}

// Conv backward; returns d_input unless `first_block` (its input gradient
// is never consumed).
Tensor conv_backward(const Tensor& d_pre, const Tensor& input, const Tensor& weights,
                     Tensor& d_weights, Tensor& d_bias, bool first_block) {
    std::size_t n_batch = input.dim(0), in_ch = input.dim(1);
    std::size_t in_h = input.dim(2), in_w = input.dim(3);
    std::size_t out_ch = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    std::size_t out_h = d_pre.dim(2), out_w = d_pre.dim(3);

    Tensor d_input(first_block ? std::vector<std::size_t>{1, 1, 1, 1} : input.shape);
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t o = 0; o < out_ch; ++o)
            for (std::size_t y = 0; y < out_h; ++y)
                for (std::size_t x = 0; x < out_w; ++x) {
                    double d = d_pre.at4(n, o, y, x);
                    if (d == 0.0) continue;
                    d_bias[o] += d;
                    for (std::size_t i = 0; i < in_ch; ++i) {
                        const double* in_row = &input.data[((n * in_ch + i) * in_h + y) * in_w + x];
                        double* dw_row = &d_weights.data[((o * in_ch + i) * kh) * kw];
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            for (std::size_t kx = 0; kx < kw; ++kx) dw_row[kx] += d * in_row[kx];
                            in_row += in_w;
                            dw_row += kw;
                        }
                        if (!first_block) {
                            double* din_row =
                                &d_input.data[((n * in_ch + i) * in_h + y) * in_w + x];
                            const double* w_row = &weights.data[((o * in_ch + i) * kh) * kw];
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                for (std::size_t kx = 0; kx < kw; ++kx)
                                    din_row[kx] += d * w_row[kx];
                                din_row += in_w;
                                w_row += kw;
                            }
                        }
                    }
                }
    return d_input;
}

BackwardResult backward_from_cache(const NetworkSpec& spec, const LayerParams& params,
                                   const Tensor& batch, const Tensor& targets,
                                   const NetCache& cache) {
    std::size_t n_batch = batch.dim(0);
    std::size_t n_classes = static_cast<std::size_t>(spec.num_classes);
    require(targets.shape.size() == 2 && targets.dim(0) == n_batch &&
                targets.dim(1) == n_classes,
            ErrorKind::shape_mismatch, "targets must be (N, num_classes)");

    BackwardResult result;
    result.probs = cache.probs;
    result.loss = bce_loss(cache.probs, targets);
    result.grads = zero_gradients(params);
    Gradients& g = result.grads;

    // d loss / d logits; zero where the probability clip was active.
    Tensor dz({n_batch, n_classes});
    double inv_n = 1.0 / static_cast<double>(n_batch);
    for (std::size_t i = 0; i < dz.numel(); ++i) {
        double p = cache.probs[i];
        dz.data[i] = (p <= kProbClip || p >= 1.0 - kProbClip)
                         ? 0.0
                         : inv_n * (p - targets[i]);
    }

    // Logistic output layer.
    std::size_t hidden = params.fc2_w.dim(1);
    Tensor d_fc1_out({n_batch, hidden});
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t c = 0; c < n_classes; ++c) {
            double d = dz.at2(n, c);
            if (d == 0.0) continue;
            g.fc2_b[c] += d;
            for (std::size_t u = 0; u < hidden; ++u) {
                g.fc2_w.at2(c, u) += d * cache.fc1_out.at2(n, u);
                d_fc1_out.at2(n, u) += d * params.fc2_w.at2(c, u);
            }
        }

    // Hidden dense layer (rectified).
    std::size_t features = params.fc1_w.dim(1);
    Tensor d_flat({n_batch, features});
    for (std::size_t n = 0; n < n_batch; ++n)
        for (std::size_t u = 0; u < hidden; ++u) {
            if (cache.fc1_pre.at2(n, u) <= 0.0) continue;
            double d = d_fc1_out.at2(n, u);
            g.fc1_b[u] += d;
            for (std::size_t f = 0; f < features; ++f) {
                g.fc1_w.at2(u, f) += d * cache.flat.at2(n, f);
                d_flat.at2(n, f) += d * params.fc1_w.at2(u, f);
            }
        }

    // Un-flatten into the last pooled map and walk the blocks backwards.
    Tensor d_x(cache.blocks.back().pool_out.shape);
    d_x.data = d_flat.data;
    for (std::size_t b = params.blocks.size(); b-- > 0;) {
        const BlockCache& bc = cache.blocks[b];
        const ConvBlockParams& bp = params.blocks[b];

        Tensor d_relu = pool_backward(d_x, bc, spec.pooling);
        for (std::size_t i = 0; i < d_relu.numel(); ++i)
            if (bc.bn_out.data[i] <= 0.0) d_relu.data[i] = 0.0;

        Tensor d_conv_out = batchnorm_backward(d_relu, bc.bn.xhat, bp, bc.bn,
                                               g.blocks[b].gamma, g.blocks[b].beta);
        for (std::size_t i = 0; i < d_conv_out.numel(); ++i)
            if (bc.conv_pre.data[i] <= 0.0) d_conv_out.data[i] = 0.0;

        const Tensor& block_input = b == 0 ? batch : cache.blocks[b - 1].pool_out;
        d_x = conv_backward(d_conv_out, block_input, bp.weights, g.blocks[b].weights,
                            g.blocks[b].bias, b == 0);
    }
    return result;
}

} // namespace

Tensor network_forward(const NetworkSpec& spec, LayerParams& params, const Tensor& batch,
                       Mode mode) {
    return forward_pass(spec, params, batch, mode, nullptr,
                        mode == Mode::train ? &params : nullptr);
}

Tensor network_forward(const NetworkSpec& spec, const LayerParams& params, const Tensor& batch) {
    return forward_pass(spec, params, batch, Mode::eval, nullptr, nullptr);
}

BackwardResult network_backward(const NetworkSpec& spec, const LayerParams& params,
                                const Tensor& batch, const Tensor& targets) {
    NetCache cache;
    forward_pass(spec, params, batch, Mode::train, &cache, nullptr);
    return backward_from_cache(spec, params, batch, targets, cache);
}

// ---------------------------------------------------------------------------
// Initialization, training, checkpoints
// ---------------------------------------------------------------------------

LayerParams init_params(const NetworkSpec& spec, int input_height, int input_width, Rng& rng,
                        double weight_init_scale) {
    require(weight_init_scale > 0.0, ErrorKind::invalid_argument, "weight_init_scale must be > 0");
    auto geom = network_geometry(spec, static_cast<std::size_t>(input_height),
                                 static_cast<std::size_t>(input_width));

    LayerParams params;
    params.input_height = input_height;
    params.input_width = input_width;

    auto fill_uniform = [&](Tensor& t, std::size_t fan_in) {
        double bound = weight_init_scale / std::sqrt(static_cast<double>(fan_in));
        for (double& v : t.data) v = rng.uniform(-bound, bound);
    };

    std::size_t k = static_cast<std::size_t>(spec.kernel_size);
    std::size_t o = static_cast<std::size_t>(spec.feature_maps);
    for (const BlockGeom& bg : geom) {
        ConvBlockParams bp;
        bp.weights = Tensor({o, bg.in_ch, k, k});
        fill_uniform(bp.weights, bg.in_ch * k * k);
        bp.bias = Tensor({o});
        bp.gamma = Tensor({o});
        for (double& v : bp.gamma.data) v = 1.0;
        bp.beta = Tensor({o});
        bp.running_mean = Tensor({o});
        bp.running_var = Tensor({o});
        for (double& v : bp.running_var.data) v = 1.0;
        params.blocks.push_back(std::move(bp));
    }

    std::size_t features = flat_features(spec, geom);
    std::size_t hidden = static_cast<std::size_t>(spec.dense_units);
    std::size_t classes = static_cast<std::size_t>(spec.num_classes);
    params.fc1_w = Tensor({hidden, features});
    fill_uniform(params.fc1_w, features);
    params.fc1_b = Tensor({hidden});
    params.fc2_w = Tensor({classes, hidden});
    fill_uniform(params.fc2_w, hidden);
    params.fc2_b = Tensor({classes});
    return params;
}

int predict_class(const Tensor& probs, std::size_t row) {
    std::size_t n_classes = probs.dim(1);
    int best = 0;
    double best_p = probs.at2(row, 0);
    for (std::size_t c = 1; c < n_classes; ++c)
        if (probs.at2(row, c) > best_p) { // strict: ties keep the lowest index
            best_p = probs.at2(row, c);
            best = static_cast<int>(c);
        }
    return best;
}

Tensor one_hot(const std::vector<int>& labels, int num_classes) {
    Tensor t({labels.size(), static_cast<std::size_t>(num_classes)});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && labels[i] < num_classes, ErrorKind::invalid_argument,
                "label out of range");
        t.at2(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return t;
}

namespace {

Tensor gather_batch(const TrainingSet& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
    const Tensor& first = data.inputs[order[begin]];
    Tensor batch({end - begin, first.dim(0), first.dim(1), first.dim(2)});
    std::size_t sample_len = first.numel();
    for (std::size_t i = begin; i < end; ++i) {
        const Tensor& src = data.inputs[order[i]];
        require(src.numel() == sample_len, ErrorKind::shape_mismatch,
                "dataset samples have mixed shapes");
        std::copy(src.data.begin(), src.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * sample_len));
    }
    return batch;
}

std::vector<int> gather_labels(const TrainingSet& data, const std::vector<std::size_t>& order,
                               std::size_t begin, std::size_t end) {
    std::vector<int> labels(end - begin);
    for (std::size_t i = begin; i < end; ++i) labels[i - begin] = data.labels[order[i]];
    return labels;
}

// Eval-mode loss and accuracy over a whole set, batched.
std::pair<double, double> evaluate_set(const NetworkSpec& spec, const LayerParams& params,
                                       const TrainingSet& data, std::size_t batch_size) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        std::size_t end = std::min(begin + batch_size, data.size());
        Tensor batch = gather_batch(data, order, begin, end);
        std::vector<int> labels = gather_labels(data, order, begin, end);
        Tensor probs = network_forward(spec, params, batch);
        loss_sum += bce_loss(probs, one_hot(labels, data.num_classes)) *
                    static_cast<double>(end - begin);
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (predict_class(probs, i) == labels[i]) ++correct;
    }
    return {loss_sum / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

void apply_sgd(LayerParams& params, const Gradients& g, double lr) {
    auto step = [lr](Tensor& p, const Tensor& grad) {
        for (std::size_t i = 0; i < p.numel(); ++i) p.data[i] -= lr * grad.data[i];
    };
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        step(params.blocks[b].weights, g.blocks[b].weights);
        step(params.blocks[b].bias, g.blocks[b].bias);
        step(params.blocks[b].gamma, g.blocks[b].gamma);
        step(params.blocks[b].beta, g.blocks[b].beta);
    }
    step(params.fc1_w, g.fc1_w);
    step(params.fc1_b, g.fc1_b);
    step(params.fc2_w, g.fc2_w);
    step(params.fc2_b, g.fc2_b);
}

} // namespace

std::pair<LayerParams, TrainReport> train(const NetworkSpec& spec, const TrainingSet& data,
                                          const TrainingSet* val, const TrainConfig& config) {
    require(config.learning_rate >= 0.0, ErrorKind::invalid_argument,
            "learning rate must be non-negative");
    require(config.epochs >= 1 && config.batch_size >= 1, ErrorKind::invalid_argument,
            "epochs and batch_size must be >= 1");
    require(!data.inputs.empty(), ErrorKind::empty_input, "training set is empty");
    require(data.inputs.size() == data.labels.size(), ErrorKind::shape_mismatch,
            "inputs and labels differ in length");
    std::vector<std::size_t> per_class(static_cast<std::size_t>(data.num_classes), 0);
    for (int label : data.labels) {
        require(label >= 0 && label < data.num_classes, ErrorKind::invalid_argument,
                "label out of range");
        per_class[static_cast<std::size_t>(label)]++;
    }
    for (std::size_t c = 0; c < per_class.size(); ++c)
        require(per_class[c] > 0, ErrorKind::invalid_argument,
                "class " + std::to_string(c) + " absent from training split");

    auto t0 = std::chrono::steady_clock::now();

    // Seed stream: weight init first, then one shuffle per epoch.
    Rng rng(config.seed);
    int in_h = static_cast<int>(data.inputs[0].dim(1));
    int in_w = static_cast<int>(data.inputs[0].dim(2));
    LayerParams params = init_params(spec, in_h, in_w, rng, config.weight_init_scale);

    std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n - 1; i >= 1; --i) // Fisher-Yates
            std::swap(order[i], order[rng.below(i + 1)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t begin = 0;
        while (begin < n) {
            std::size_t end = std::min(begin + static_cast<std::size_t>(config.batch_size), n);
            if (n - end == 1) end = n; // fold a trailing single sample into this batch
            Tensor batch = gather_batch(data, order, begin, end);
            std::vector<int> labels = gather_labels(data, order, begin, end);
            Tensor targets = one_hot(labels, data.num_classes);

            NetCache cache;
            forward_pass(spec, params, batch, Mode::train, &cache, &params);
            BackwardResult back = backward_from_cache(spec, params, batch, targets, cache);
            apply_sgd(params, back.grads, config.learning_rate);

            loss_sum += back.loss * static_cast<double>(end - begin);
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (predict_class(back.probs, i) == labels[i]) ++correct;
            begin = end;
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        if (val && val->size() > 0) {
            auto [vloss, vacc] =
                evaluate_set(spec, params, *val, static_cast<std::size_t>(config.batch_size));
            stats.val_loss = vloss;
            stats.val_accuracy = vacc;
        }
        report.epochs.push_back(stats);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(params), std::move(report)};
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'H', 'O', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_i32(std::ostream& out, std::int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int32_t read_i32(std::istream& in, const std::string& path) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (in.gcount() != sizeof v)
        fail(ErrorKind::truncated_data, "checkpoint header truncated: " + path);
    return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

void read_tensor(std::istream& in, Tensor& t, const std::string& path) {
    auto bytes = static_cast<std::streamsize>(t.data.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(t.data.data()), bytes);
    if (in.gcount() != bytes)
        fail(ErrorKind::truncated_data, "checkpoint tensor data truncated: " + path);
}

template <typename Params, typename Fn> void for_each_tensor(Params& params, Fn&& fn) {
    for (auto& b : params.blocks) {
        fn(b.weights);
        fn(b.bias);
        fn(b.gamma);
        fn(b.beta);
        fn(b.running_mean);
        fn(b.running_var);
    }
    fn(params.fc1_w);
    fn(params.fc1_b);
    fn(params.fc2_w);
    fn(params.fc2_b);
}

} // namespace

void save_checkpoint(const NetworkSpec& spec, const LayerParams& params, const std::string& path) {
    spec.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    out.write(kMagic, 4);
    write_i32(out, static_cast<std::int32_t>(kVersion));
    write_i32(out, spec.kernel_size);
    write_i32(out, spec.feature_maps);
    write_i32(out, spec.pooling == Pooling::max ? 0 : 1);
    write_i32(out, spec.conv_blocks);
    write_i32(out, spec.dense_units);
    write_i32(out, spec.num_classes);
    write_i32(out, params.input_height);
    write_i32(out, params.input_width);
    for_each_tensor(params, [&out](const Tensor& t) { write_tensor(out, t); });
    if (!out) fail(ErrorKind::io, "short write to " + path);
}

std::pair<NetworkSpec, LayerParams> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::file_not_found, "no such checkpoint: " + path);

    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        fail(ErrorKind::malformed_header, "not a checkpoint file: " + path);
    std::int32_t version = read_i32(in, path);
    if (version != static_cast<std::int32_t>(kVersion))
        fail(ErrorKind::malformed_header,
             "unsupported checkpoint version " + std::to_string(version) + ": " + path);

    NetworkSpec spec;
    spec.kernel_size = read_i32(in, path);
    spec.feature_maps = read_i32(in, path);
    spec.pooling = read_i32(in, path) == 0 ? Pooling::max : Pooling::average;
    spec.conv_blocks = read_i32(in, path);
    spec.dense_units = read_i32(in, path);
    spec.num_classes = read_i32(in, path);
    int input_h = read_i32(in, path);
    int input_w = read_i32(in, path);
    spec.validate();

    // Rebuild tensor shapes from the header fields, then fill them from the file.
    Rng dummy(0);
    LayerParams params = init_params(spec, input_h, input_w, dummy);
    for_each_tensor(params, [&in, &path](Tensor& t) { read_tensor(in, t, path); });

    char extra = 0;
    in.read(&extra, 1);
    if (in.gcount() != 0)
        fail(ErrorKind::malformed_header, "trailing bytes in checkpoint: " + path);
    return {spec, params};
}

} // namespace hodcnn
