#ifndef HODCNN_PREPROCESS_HPP
#define HODCNN_PREPROCESS_HPP

#include "hodcnn/image.hpp"

#include <vector>

namespace hodcnn {

struct GaussianConfig {
    double sigma = 1.0;
    int radius = 1; // kernel half-width; window is (2*radius+1)^2

    GaussianConfig() = default;
    /// Radius defaults to ceil(3*sigma): mass beyond three sigma is negligible.
    explicit GaussianConfig(double sigma_);
    GaussianConfig(double sigma_, int radius_) : sigma(sigma_), radius(radius_) {}
};

/// Normalized (2r+1)^2 weight window, row-major, sum == 1 within 1e-12.
struct Kernel {
    int radius = 0;
    std::vector<double> weights;

    int size() const { return 2 * radius + 1; }
    double at(int dx, int dy) const {
        return weights[static_cast<std::size_t>(dy + radius) * size() + (dx + radius)];
    }
};

/// Weight at offset (x, y) proportional to exp(-(x^2+y^2) / (2 sigma^2)),
/// normalized so the window sums to exactly 1.
Kernel gaussian_kernel(const GaussianConfig& config);

/// Per-channel 2-D convolution with the Gaussian window. Borders use edge
/// replication, so a constant image is a fixed point and output dimensions
/// equal input dimensions.
Image gaussian_filter(const Image& image, const GaussianConfig& config);

/// Per-pixel absolute difference |frame - background|. Static pixels
/// come out as 0. Shapes must match.
Image background_subtract(const Image& frame, const Image& background);

/// Per channel: (x - mean) / stddev, population stddev. A degenerate
/// channel (stddev <= epsilon) maps to exact zeros. Non-degenerate output
/// channels have mean 0 and std 1.
Image contrast_normalize(const Image& image, double epsilon = 1e-8);

} // namespace hodcnn

#endif
