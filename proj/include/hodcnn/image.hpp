#ifndef HODCNN_IMAGE_HPP
#define HODCNN_IMAGE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hodcnn {

/// Real-valued raster, row-major and channel-interleaved. Values are in
/// [0, 1] straight after load (8-bit / 255); arithmetic stages such as
/// contrast normalization are allowed to leave that range, but never to
/// produce NaN or Inf.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> pixels;

    static Image zeros(int width, int height, int channels = 1);
    static Image constant(int width, int height, int channels, double value);

    double& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    /// Throws Error{invalid_argument|non_finite} if any invariant is broken.
    void validate() const;
};

/// 256-bin count histogram over quantized gray levels.
struct Histogram {
    std::array<std::uint64_t, 256> bins{};
    std::uint64_t total = 0;
};

/// Per-pixel segment indices, 0..L for L thresholds.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;

    int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Reads a binary PGM (P5) or PPM (P6) file with maxval 255. Byte v maps
/// to v / 255.0 exactly. Distinct failures: file_not_found,
/// malformed_header, truncated_data.
Image load_image(const std::string& path);

/// Writes P5 (1 channel) or P6 (3 channels). Pixels are clamped to [0, 1]
/// and quantized round-half-up to v * 255.
void save_image(const Image& image, const std::string& path);

/// Luminance conversion 0.299 R + 0.587 G + 0.114 B; grayscale input is
/// returned unchanged.
Image to_grayscale(const Image& image);

/// Counts quantized levels of a grayscale image with pixels in [0, 1];
/// bin index = min(floor(v * 256), 255).
Histogram histogram(const Image& image);

/// Quantized gray level of one pixel value, shared with segmentation.
inline int gray_level(double v) {
    int level = static_cast<int>(v * 256.0);
    if (level < 0) level = 0;
    if (level > 255) level = 255;
    return level;
}

} // namespace hodcnn

#endif
