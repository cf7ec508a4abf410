#include "hodcnn/preprocess.hpp"

#include "hodcnn/error.hpp"

#include <algorithm>
#include <cmath>

namespace hodcnn {

GaussianConfig::GaussianConfig(double sigma_)
    : sigma(sigma_), radius(std::max(1, static_cast<int>(std::ceil(3.0 * sigma_)))) {}

namespace {

void check_config(const GaussianConfig& config) {
    require(config.sigma > 0.0, ErrorKind::invalid_argument, "gaussian sigma must be > 0");
    require(config.radius >= 1, ErrorKind::invalid_argument, "gaussian radius must be >= 1");
}

int clamp_coord(int v, int n) {
    if (v < 0) return 0;
    if (v >= n) return n - 1;
    return v;
}

} // namespace

Kernel gaussian_kernel(const GaussianConfig& config) {
    check_config(config);
    Kernel k;
    k.radius = config.radius;
    int size = k.size();
    k.weights.resize(static_cast<std::size_t>(size) * size);

    double inv = 1.0 / (2.0 * config.sigma * config.sigma);
    double sum = 0.0;
    for (int dy = -k.radius; dy <= k.radius; ++dy) {
        for (int dx = -k.radius; dx <= k.radius; ++dx) {
            double w = std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) * inv);
            k.weights[static_cast<std::size_t>(dy + k.radius) * size + (dx + k.radius)] = w;
            sum += w;
        }
    }
    for (double& w : k.weights) w /= sum;
    return k;
}

Image gaussian_filter(const Image& image, const GaussianConfig& config) {
    image.validate();
    Kernel kernel = gaussian_kernel(config);

    Image out = image;
    int r = kernel.radius;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    int sy = clamp_coord(y + dy, image.height);
                    for (int dx = -r; dx <= r; ++dx) {
                        int sx = clamp_coord(x + dx, image.width);
                        acc += kernel.at(dx, dy) * image.at(sx, sy, c);
                    }
                }
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

Image background_subtract(const Image& frame, const Image& background) {
    frame.validate();
    background.validate();
    require(frame.width == background.width && frame.height == background.height &&
                frame.channels == background.channels,
            ErrorKind::shape_mismatch, "frame and background shapes differ");

    Image out = frame;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = std::abs(frame.pixels[i] - background.pixels[i]);
    return out;
}

Image contrast_normalize(const Image& image, double epsilon) {
    image.validate();
    require(epsilon > 0.0, ErrorKind::invalid_argument, "cn epsilon must be > 0");

    Image out = image;
    std::size_t n = image.pixel_count();
    for (int c = 0; c < image.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += image.pixels[i * image.channels + c];
        mean /= static_cast<double>(n);

        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = image.pixels[i * image.channels + c] - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / static_cast<double>(n)); // population stddev

        if (sd <= epsilon) {
            // Degenerate channel: the epsilon floor would otherwise blow
            // rounding residue of the mean up to visible size.
            for (std::size_t i = 0; i < n; ++i) out.pixels[i * image.channels + c] = 0.0;
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t idx = i * image.channels + c;
            out.pixels[idx] = (image.pixels[idx] - mean) / sd;
        }
    }
    return out;
}

} // namespace hodcnn
