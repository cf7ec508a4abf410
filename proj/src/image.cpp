#include "hodcnn/image.hpp"

#include "hodcnn/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace hodcnn {

Image Image::zeros(int width, int height, int channels) {
    return constant(width, height, channels, 0.0);
}

Image Image::constant(int width, int height, int channels, double value) {
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(width) * height * channels, value);
    img.validate();
    return img;
}

void Image::validate() const {
    require(width >= 1 && height >= 1, ErrorKind::invalid_argument,
            "image dimensions must be at least 1x1");
    require(channels == 1 || channels == 3, ErrorKind::invalid_argument,
            "image must have 1 or 3 channels");
    require(pixels.size() == static_cast<std::size_t>(width) * height * channels,
            ErrorKind::invalid_argument, "pixel buffer size does not match dimensions");
    for (double v : pixels) {
        require(std::isfinite(v), ErrorKind::non_finite, "image contains non-finite pixel");
    }
}

namespace {

// Reads one whitespace-separated header token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok;
}

int parse_positive_int(const std::string& tok, const char* what) {
    if (tok.empty()) fail(ErrorKind::malformed_header, std::string("missing ") + what);
    for (char ch : tok) {
        if (!std::isdigit(static_cast<unsigned char>(ch)))
            fail(ErrorKind::malformed_header, std::string("non-numeric ") + what + ": " + tok);
    }
    long v = std::strtol(tok.c_str(), nullptr, 10);
    if (v < 1 || v > 1 << 20)
        fail(ErrorKind::malformed_header, std::string(what) + " out of range: " + tok);
    return static_cast<int>(v);
}

} // namespace

Image load_image(const std::string& path) {
    if (!std::filesystem::exists(path))
        fail(ErrorKind::file_not_found, "no such file: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);

    std::string magic = next_token(in);
    int channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else fail(ErrorKind::malformed_header, "unsupported magic '" + magic + "' in " + path);

    int width = parse_positive_int(next_token(in), "width");
    int height = parse_positive_int(next_token(in), "height");
    std::string maxval = next_token(in);
    if (maxval != "255")
        fail(ErrorKind::malformed_header, "maxval must be 255, got '" + maxval + "' in " + path);
    // The maxval token is followed by exactly one whitespace byte, already
    // consumed by the token reader.

    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    std::size_t n = static_cast<std::size_t>(width) * height * channels;
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        fail(ErrorKind::truncated_data, "expected " + std::to_string(n) + " pixel bytes in " + path);

    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i] / 255.0;
    return img;
}

void save_image(const Image& image, const std::string& path) {
    image.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);

    out << (image.channels == 1 ? "P5" : "P6") << "\n"
        << image.width << " " << image.height << "\n255\n";

    std::vector<unsigned char> raw(image.pixels.size());
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        double v = image.pixels[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        raw[i] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5)); // round-half-up
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) fail(ErrorKind::io, "short write to " + path);
}

Image to_grayscale(const Image& image) {
    image.validate();
    if (image.channels == 1) return image;

    Image gray;
    gray.width = image.width;
    gray.height = image.height;
    gray.channels = 1;
    gray.pixels.resize(image.pixel_count());
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        const double* p = &image.pixels[i * 3];
        gray.pixels[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
    return gray;
}

Histogram histogram(const Image& image) {
    image.validate();
    require(image.channels == 1, ErrorKind::invalid_argument,
            "histogram requires a grayscale image");
    Histogram h;
    for (double v : image.pixels) {
        require(v >= 0.0 && v <= 1.0, ErrorKind::invalid_argument,
                "histogram requires pixels in [0,1]");
        h.bins[static_cast<std::size_t>(gray_level(v))]++;
    }
    h.total = image.pixel_count();
    return h;
}

} // namespace hodcnn
