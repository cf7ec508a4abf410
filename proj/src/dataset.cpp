#include "hodcnn/dataset.hpp"

#include "hodcnn/error.hpp"
#include "hodcnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

namespace fs = std::filesystem;

namespace hodcnn {

void Dataset::validate() const {
    require(!images.empty(), ErrorKind::empty_input, "dataset has no samples");
    require(images.size() == labels.size(), ErrorKind::shape_mismatch,
            "image and label counts differ");
    require(num_classes() >= 2, ErrorKind::invalid_argument, "dataset needs at least 2 classes");
    std::vector<std::size_t> per_class(class_names.size(), 0);
    for (int label : labels) {
        require(label >= 0 && label < num_classes(), ErrorKind::invalid_argument,
                "label out of range");
        per_class[static_cast<std::size_t>(label)]++;
    }
    for (std::size_t c = 0; c < per_class.size(); ++c)
        require(per_class[c] > 0, ErrorKind::invalid_argument,
                "class '" + class_names[c] + "' has no samples");
    for (const Image& img : images)
        require(img.width == images[0].width && img.height == images[0].height,
                ErrorKind::shape_mismatch, "dataset images have mixed sizes");
}

Image resize_nearest(const Image& image, int out_h, int out_w) {
    image.validate();
    require(out_h >= 1 && out_w >= 1, ErrorKind::invalid_argument, "resize target must be >= 1");
    if (out_h == image.height && out_w == image.width) return image;

    Image out;
    out.width = out_w;
    out.height = out_h;
    out.channels = image.channels;
    out.pixels.resize(static_cast<std::size_t>(out_w) * out_h * image.channels);
    for (int y = 0; y < out_h; ++y) {
        int sy = std::min(image.height - 1,
                          static_cast<int>(std::floor((y + 0.5) * image.height / out_h)));
        for (int x = 0; x < out_w; ++x) {
            int sx = std::min(image.width - 1,
                              static_cast<int>(std::floor((x + 0.5) * image.width / out_w)));
            for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(sx, sy, c);
        }
    }
    return out;
}

Dataset load_folder_dataset(const std::string& root, int resize_h, int resize_w) {
    require(fs::exists(root), ErrorKind::file_not_found, "no such directory: " + root);
    require(fs::is_directory(root), ErrorKind::invalid_argument, root + " is not a directory");

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    require(class_dirs.size() >= 2, ErrorKind::invalid_argument,
            root + " must contain at least two class subdirectories");

    Dataset dataset;
    dataset.class_names = class_dirs;
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[c])) {
            std::string ext = entry.path().extension().string();
            if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm"))
                files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        require(!files.empty(), ErrorKind::empty_input,
                "class directory has no PGM/PPM files: " +
                    (fs::path(root) / class_dirs[c]).string());
        for (const std::string& file : files) {
            dataset.images.push_back(
                resize_nearest(to_grayscale(load_image(file)), resize_h, resize_w));
            dataset.labels.push_back(static_cast<int>(c));
        }
    }
    dataset.validate();
    return dataset;
}

Dataset gen_synthetic(const std::string& kind, int n_per_class, int size, double noise_sigma,
                      std::uint64_t seed) {
    require(kind == "shapes", ErrorKind::invalid_argument,
            "unknown synthetic dataset kind '" + kind + "' (available: shapes)");
    require(n_per_class >= 1, ErrorKind::invalid_argument, "n_per_class must be >= 1");
    require(size >= 8, ErrorKind::invalid_argument, "synthetic size must be at least 8x8");
    require(noise_sigma >= 0.0, ErrorKind::invalid_argument, "noise sigma must be >= 0");

    Dataset dataset;
    dataset.class_names = {"square", "disc"};
    // Draw order: all squares then all discs; per sample the shape
    // parameters, then (only when noise_sigma > 0) one normal per pixel.
    Rng rng(seed);

    auto add_noise = [&](Image& img) {
        if (noise_sigma == 0.0) return;
        for (double& v : img.pixels)
            v = std::clamp(v + noise_sigma * rng.normal(), 0.0, 1.0);
    };

    for (int i = 0; i < n_per_class; ++i) {
        Image img = Image::zeros(size, size);
        int side = size / 4 + static_cast<int>(rng.below(static_cast<std::size_t>(size / 2 - size / 4 + 1)));
        int x0 = static_cast<int>(rng.below(static_cast<std::size_t>(size - side + 1)));
        int y0 = static_cast<int>(rng.below(static_cast<std::size_t>(size - side + 1)));
        for (int y = y0; y < y0 + side; ++y)
            for (int x = x0; x < x0 + side; ++x) img.at(x, y) = 1.0;
        add_noise(img);
        dataset.images.push_back(std::move(img));
        dataset.labels.push_back(0);
    }
    for (int i = 0; i < n_per_class; ++i) {
        Image img = Image::zeros(size, size);
        int r_lo = std::max(2, size / 8);
        int r = r_lo + static_cast<int>(rng.below(static_cast<std::size_t>(size / 4 - r_lo + 1)));
        int cx = r + static_cast<int>(rng.below(static_cast<std::size_t>(size - 2 * r)));
        int cy = r + static_cast<int>(rng.below(static_cast<std::size_t>(size - 2 * r)));
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.at(x, y) = 1.0;
        add_noise(img);
        dataset.images.push_back(std::move(img));
        dataset.labels.push_back(1);
    }
    dataset.validate();
    return dataset;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
    dataset.validate();
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0, ErrorKind::invalid_argument,
            "train_fraction must be in (0, 1)");

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    for (std::size_t i = order.size() - 1; i >= 1; --i)
        std::swap(order[i], order[rng.below(i + 1)]);

    Dataset train, test;
    train.class_names = dataset.class_names;
    test.class_names = dataset.class_names;
    auto push = [&dataset](Dataset& side, std::size_t idx) {
        side.images.push_back(dataset.images[idx]);
        side.labels.push_back(dataset.labels[idx]);
    };

    if (spec.stratified) {
        for (int c = 0; c < dataset.num_classes(); ++c) {
            std::vector<std::size_t> members;
            for (std::size_t idx : order)
                if (dataset.labels[idx] == c) members.push_back(idx);
            require(members.size() >= 2, ErrorKind::invalid_argument,
                    "class '" + dataset.class_names[static_cast<std::size_t>(c)] +
                        "' has fewer than 2 samples; stratified split impossible");
            auto n_train = static_cast<std::size_t>(
                std::floor(spec.train_fraction * static_cast<double>(members.size())));
            n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
            for (std::size_t i = 0; i < members.size(); ++i)
                push(i < n_train ? train : test, members[i]);
        }
    } else {
        auto n_train = static_cast<std::size_t>(
            std::floor(spec.train_fraction * static_cast<double>(order.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
        for (std::size_t i = 0; i < order.size(); ++i) push(i < n_train ? train : test, order[i]);
    }
    return {std::move(train), std::move(test)};
}

Dataset preprocess_all(const Dataset& dataset, const PreprocessParams& params) {
    dataset.validate();
    GaussianConfig gc = params.gaussian();
    Dataset out = dataset;
    for (Image& img : out.images) {
        img = gaussian_filter(img, gc);
        if (params.background) img = background_subtract(img, *params.background);
        img = contrast_normalize(img, params.cn_epsilon);
    }
    return out;
}

void save_dataset_folders(const Dataset& dataset, const std::string& root) {
    dataset.validate();
    fs::create_directories(root);
    std::vector<std::size_t> counter(dataset.class_names.size(), 0);
    for (std::size_t c = 0; c < dataset.class_names.size(); ++c)
        fs::create_directories(fs::path(root) /
                               (std::to_string(c) + "_" + dataset.class_names[c]));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        auto c = static_cast<std::size_t>(dataset.labels[i]);
        char name[32];
        std::snprintf(name, sizeof name, "%05zu.pgm", counter[c]++);
        fs::path dir = fs::path(root) / (std::to_string(c) + "_" + dataset.class_names[c]);
        save_image(dataset.images[i], (dir / name).string());
    }
}

TrainingSet to_training_set(const Dataset& dataset) {
    dataset.validate();
    TrainingSet set;
    set.num_classes = dataset.num_classes();
    set.labels = dataset.labels;
    for (const Image& img : dataset.images) {
        require(img.channels == 1, ErrorKind::invalid_argument,
                "network inputs must be grayscale");
        Tensor t({1, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
        t.data = img.pixels;
        set.inputs.push_back(std::move(t));
    }
    return set;
}

} // namespace hodcnn
