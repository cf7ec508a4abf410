#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hodcnn/error.hpp"
#include "hodcnn/image.hpp"
#include "hodcnn/rng.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

using namespace hodcnn;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::io;
}

} // namespace

TEST_CASE("load_image maps PGM bytes to v/255") {
    testutil::TempDir dir("imagecore");
    std::string body = "P5\n2 2\n255\n";
    body += std::string("\x00\xff\x80\x40", 4);
    testutil::write_bytes(dir.file("a.pgm"), body);

    Image img = load_image(dir.file("a.pgm"));
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.channels == 1);
    CHECK(img.pixels[0] == 0.0);
    CHECK(img.pixels[1] == 1.0);
    CHECK(img.pixels[2] == 128.0 / 255.0);
    CHECK(img.pixels[3] == 64.0 / 255.0);
}

TEST_CASE("load_image reads PPM as three channels") {
    testutil::TempDir dir("imagecore");
    std::string body = "P6 1 1 255\n";
    body += std::string("\xff\x00\x00", 3);
    testutil::write_bytes(dir.file("a.ppm"), body);

    Image img = load_image(dir.file("a.ppm"));
    CHECK(img.channels == 3);
    CHECK(img.pixels[0] == 1.0);
    CHECK(img.pixels[1] == 0.0);
    CHECK(img.pixels[2] == 0.0);
}

TEST_CASE("load_image failure kinds are distinct") {
    testutil::TempDir dir("imagecore");

    CHECK(kind_of([&] { load_image(dir.file("missing.pgm")); }) == ErrorKind::file_not_found);

    testutil::write_bytes(dir.file("zero.pgm"), "P5 0 0 255\n");
    CHECK(kind_of([&] { load_image(dir.file("zero.pgm")); }) == ErrorKind::malformed_header);

    testutil::write_bytes(dir.file("magic.pgm"), "P7 2 2 255\n....");
    CHECK(kind_of([&] { load_image(dir.file("magic.pgm")); }) == ErrorKind::malformed_header);

    testutil::write_bytes(dir.file("maxval.pgm"), "P5 2 2 65535\n....");
    CHECK(kind_of([&] { load_image(dir.file("maxval.pgm")); }) == ErrorKind::malformed_header);

    testutil::write_bytes(dir.file("short.pgm"), "P5 2 2 255\nab");
    CHECK(kind_of([&] { load_image(dir.file("short.pgm")); }) == ErrorKind::truncated_data);
}

TEST_CASE("save_image quantizes with clamp and round-half-up") {
    testutil::TempDir dir("imagecore");
    Image img = Image::zeros(4, 1);
    img.pixels = {0.0, 1.0, 0.5, -0.2};
    save_image(img, dir.file("q.pgm"));

    std::string bytes = testutil::read_bytes(dir.file("q.pgm"));
    std::string pix = bytes.substr(bytes.size() - 4);
    CHECK(static_cast<unsigned char>(pix[0]) == 0);
    CHECK(static_cast<unsigned char>(pix[1]) == 255);
    CHECK(static_cast<unsigned char>(pix[2]) == 128); // 127.5 rounds up
    CHECK(static_cast<unsigned char>(pix[3]) == 0);   // clamped
}

TEST_CASE("save/load round-trips exactly on the 1/255 grid") {
    testutil::TempDir dir("imagecore");
    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        int w = 1 + static_cast<int>(rng.below(9));
        int h = 1 + static_cast<int>(rng.below(9));
        int ch = rng.below(2) == 0 ? 1 : 3;
        Image img = Image::zeros(w, h, ch);
        for (double& v : img.pixels) v = static_cast<double>(rng.below(256)) / 255.0;

        save_image(img, dir.file("rt.pgm"));
        Image back = load_image(dir.file("rt.pgm"));
        REQUIRE(back.pixels.size() == img.pixels.size());
        for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == img.pixels[i]);
    }
}

TEST_CASE("to_grayscale uses the stated luminance weights") {
    Image rgb = Image::zeros(2, 1, 3);
    rgb.pixels = {1, 1, 1, 1, 0, 0};
    Image gray = to_grayscale(rgb);
    CHECK(gray.channels == 1);
    CHECK(gray.pixels[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gray.pixels[1] == doctest::Approx(0.299).epsilon(1e-15));

    Image g = Image::constant(3, 3, 1, 0.25);
    Image same = to_grayscale(g);
    CHECK(same.pixels == g.pixels);
}

TEST_CASE("to_grayscale stays within the channel range") {
    Rng rng(3);
    Image rgb = Image::zeros(8, 8, 3);
    for (double& v : rgb.pixels) v = rng.uniform();
    Image gray = to_grayscale(rgb);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double lo = std::min({rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)});
            double hi = std::max({rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)});
            CHECK(gray.at(x, y) >= lo - 1e-15);
            CHECK(gray.at(x, y) <= hi + 1e-15);
        }
}

TEST_CASE("histogram counts quantized levels") {
    Image zeroes = Image::zeros(2, 2);
    Histogram h = histogram(zeroes);
    CHECK(h.bins[0] == 4);
    CHECK(h.total == 4);

    Image ends = Image::zeros(2, 1);
    ends.pixels = {0.0, 1.0};
    Histogram h2 = histogram(ends);
    CHECK(h2.bins[0] == 1);
    CHECK(h2.bins[255] == 1);
}

TEST_CASE("histogram matches a direct counting oracle") {
    Rng rng(11);
    Image img = Image::zeros(10, 10);
    for (double& v : img.pixels) v = rng.uniform();

    std::array<std::uint64_t, 256> expected{};
    for (double v : img.pixels) {
        auto level = static_cast<std::size_t>(std::min(255.0, std::floor(v * 256.0)));
        expected[level]++;
    }

    Histogram h = histogram(img);
    CHECK(h.total == 100);
    std::uint64_t sum = 0;
    for (int i = 0; i < 256; ++i) {
        CHECK(h.bins[static_cast<std::size_t>(i)] == expected[static_cast<std::size_t>(i)]);
        sum += h.bins[static_cast<std::size_t>(i)];
    }
    CHECK(sum == 100);
}

TEST_CASE("histogram is permutation invariant") {
    Rng rng(13);
    Image img = Image::zeros(6, 6);
    for (double& v : img.pixels) v = rng.uniform();
    Histogram before = histogram(img);

    Image shuffled = img;
    for (std::size_t i = shuffled.pixels.size() - 1; i >= 1; --i)
        std::swap(shuffled.pixels[i], shuffled.pixels[rng.below(i + 1)]);
    Histogram after = histogram(shuffled);
    CHECK(before.bins == after.bins);
}

TEST_CASE("histogram rejects RGB input") {
    Image rgb = Image::zeros(2, 2, 3);
    CHECK(kind_of([&] { histogram(rgb); }) == ErrorKind::invalid_argument);
}
