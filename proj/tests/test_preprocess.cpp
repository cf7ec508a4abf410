#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hodcnn/error.hpp"
#include "hodcnn/preprocess.hpp"
#include "hodcnn/rng.hpp"

#include <cmath>
#include <functional>

using namespace hodcnn;

namespace {

// Independent dense-convolution oracle: quadruple loop, edge replication,
// weights evaluated straight from the Gaussian formula.
Image oracle_gaussian_filter(const Image& img, double sigma, int radius) {
    int size = 2 * radius + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    double sum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(dy + radius) * size + (dx + radius)] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;

    auto clamp = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    Image out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        acc += w[static_cast<std::size_t>(dy + radius) * size + (dx + radius)] *
                               img.at(clamp(x + dx, img.width), clamp(y + dy, img.height), c);
                out.at(x, y, c) = acc;
            }
    return out;
}

Image random_image(Rng& rng, int w, int h, int ch = 1) {
    Image img = Image::zeros(w, h, ch);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

double channel_mean(const Image& img, int c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) sum += img.pixels[i * img.channels + c];
    return sum / static_cast<double>(img.pixel_count());
}

double channel_std(const Image& img, int c) {
    double mu = channel_mean(img, c);
    double sq = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        double d = img.pixels[i * img.channels + c] - mu;
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(img.pixel_count()));
}

} // namespace

TEST_CASE("gaussian_kernel sums to one and follows the formula") {
    Kernel flat = gaussian_kernel(GaussianConfig(1e6, 1));
    for (double w : flat.weights) CHECK(w == doctest::Approx(1.0 / 9.0).epsilon(1e-6));

    // sigma=1, radius=1 window: 1 center, 4 edges exp(-1/2), 4 corners exp(-1)
    Kernel k = gaussian_kernel(GaussianConfig(1.0, 1));
    double sum_raw = std::exp(0.0) + 4 * std::exp(-0.5) + 4 * std::exp(-1.0);
    CHECK(k.at(0, 0) == doctest::Approx(1.0 / sum_raw).epsilon(1e-12));
    CHECK(k.at(1, 1) / k.at(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        GaussianConfig config(rng.uniform(0.2, 4.0), 1 + static_cast<int>(rng.below(4)));
        Kernel kr = gaussian_kernel(config);
        double total = 0.0;
        for (double w : kr.weights) {
            CHECK(w >= 0.0);
            total += w;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("gaussian_kernel rejects bad configs") {
    CHECK_THROWS_AS(gaussian_kernel(GaussianConfig(0.0, 1)), Error);
    CHECK_THROWS_AS(gaussian_kernel(GaussianConfig(-1.0, 2)), Error);
    CHECK_THROWS_AS(gaussian_kernel(GaussianConfig(1.0, 0)), Error);
}

TEST_CASE("gaussian_filter keeps constant images fixed") {
    Image img = Image::constant(7, 5, 1, 0.375);
    Image out = gaussian_filter(img, GaussianConfig(1.5, 2));
    for (double v : out.pixels) CHECK(std::abs(v - 0.375) <= 1e-12);
}

TEST_CASE("gaussian_filter reproduces the kernel from a centered impulse") {
    Image img = Image::zeros(11, 11);
    img.at(5, 5) = 1.0;
    GaussianConfig config(0.8, 2);
    Image out = gaussian_filter(img, config);
    Kernel k = gaussian_kernel(config);
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
            CHECK(out.at(5 + dx, 5 + dy) == doctest::Approx(k.at(dx, dy)).epsilon(1e-12));
}

TEST_CASE("gaussian_filter matches the brute-force oracle") {
    Rng rng(17);
    SUBCASE("single 5x5 image") {
        Image img = random_image(rng, 5, 5);
        Image ours = gaussian_filter(img, GaussianConfig(1.0, 1));
        Image ref = oracle_gaussian_filter(img, 1.0, 1);
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            CHECK(std::abs(ours.pixels[i] - ref.pixels[i]) <= 1e-12);
    }
    SUBCASE("all sizes up to 8x8, including RGB") {
        for (int w = 1; w <= 8; ++w)
            for (int h = 1; h <= 8; ++h) {
                int ch = (w + h) % 2 == 0 ? 1 : 3;
                Image img = random_image(rng, w, h, ch);
                double sigma = rng.uniform(0.3, 2.5);
                int radius = 1 + static_cast<int>(rng.below(3));
                Image ours = gaussian_filter(img, GaussianConfig(sigma, radius));
                Image ref = oracle_gaussian_filter(img, sigma, radius);
                for (std::size_t i = 0; i < img.pixels.size(); ++i)
                    CHECK(std::abs(ours.pixels[i] - ref.pixels[i]) <= 1e-12);
            }
    }
}

TEST_CASE("gaussian_filter commutes with constant shifts") {
    Rng rng(19);
    Image img = random_image(rng, 9, 6);
    Image shifted = img;
    for (double& v : shifted.pixels) v += 0.37;

    GaussianConfig config(1.2, 2);
    Image a = gaussian_filter(shifted, config);
    Image b = gaussian_filter(img, config);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(std::abs(a.pixels[i] - (b.pixels[i] + 0.37)) <= 1e-9);
}

TEST_CASE("gaussian_filter output stays inside the input range") {
    Rng rng(23);
    Image img = random_image(rng, 8, 8);
    double lo = 1.0, hi = 0.0;
    for (double v : img.pixels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Image out = gaussian_filter(img, GaussianConfig(0.9, 3));
    for (double v : out.pixels) {
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("background_subtract is the absolute difference") {
    Image frame = Image::zeros(1, 1);
    frame.pixels = {0.2};
    Image bg = Image::zeros(1, 1);
    bg.pixels = {0.5};
    CHECK(background_subtract(frame, bg).pixels[0] == doctest::Approx(0.3).epsilon(1e-15));

    Rng rng(29);
    Image a = random_image(rng, 6, 4);
    Image b = random_image(rng, 6, 4);
    Image ab = background_subtract(a, b);
    Image ba = background_subtract(b, a);
    CHECK(ab.pixels == ba.pixels);

    Image same = background_subtract(a, a);
    for (double v : same.pixels) CHECK(v == 0.0);

    Image zero = Image::zeros(6, 4);
    Image ident = background_subtract(a, zero);
    CHECK(ident.pixels == a.pixels);

    Image wrong = Image::zeros(4, 6);
    CHECK_THROWS_AS(background_subtract(a, wrong), Error);
}

TEST_CASE("contrast_normalize standardizes each channel") {
    SUBCASE("constant channel collapses to zero") {
        Image img = Image::constant(5, 5, 1, 0.9);
        Image out = contrast_normalize(img, 1e-8);
        for (double v : out.pixels) CHECK(v == 0.0);
    }
    SUBCASE("two-point channel hits -1/+1") {
        Image img = Image::zeros(2, 1);
        img.pixels = {0.0, 1.0};
        Image out = contrast_normalize(img);
        CHECK(out.pixels[0] == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(out.pixels[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("post statistics are exactly standardized") {
        Rng rng(31);
        for (int rep = 0; rep < 5; ++rep) {
            Image img = random_image(rng, 12, 9, rep % 2 == 0 ? 1 : 3);
            Image out = contrast_normalize(img);
            for (int c = 0; c < out.channels; ++c) {
                CHECK(std::abs(channel_mean(out, c)) < 1e-9);
                CHECK(std::abs(channel_std(out, c) - 1.0) < 1e-9);
            }
        }
    }
    SUBCASE("invariant to positive affine input transforms") {
        Rng rng(37);
        Image img = random_image(rng, 10, 7);
        Image affine = img;
        for (double& v : affine.pixels) v = 3.5 * v + 0.4;
        Image a = contrast_normalize(img);
        Image b = contrast_normalize(affine);
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            CHECK(std::abs(a.pixels[i] - b.pixels[i]) < 1e-6);
    }
    SUBCASE("epsilon must be positive") {
        Image img = Image::zeros(2, 2);
        CHECK_THROWS_AS(contrast_normalize(img, 0.0), Error);
    }
}
