#ifndef HODCNN_DATASET_HPP
#define HODCNN_DATASET_HPP

#include "hodcnn/image.hpp"
#include "hodcnn/micronet.hpp"
#include "hodcnn/preprocess.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hodcnn {

/// Labeled image collection with a common geometry.
struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;

    std::size_t size() const { return images.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    void validate() const;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

/// Preprocessing stage parameters; the background stage only runs when a
/// background image is present.
struct PreprocessParams {
    double sigma = 1.0;
    int radius = 0; // 0 = default ceil(3 sigma)
    std::optional<Image> background;
    double cn_epsilon = 1e-8;

    GaussianConfig gaussian() const {
        return radius > 0 ? GaussianConfig(sigma, radius) : GaussianConfig(sigma);
    }
};

/// One class per subdirectory of root, labels assigned by sorted
/// subdirectory name; images are grayscaled and nearest-neighbor resized.
Dataset load_folder_dataset(const std::string& root, int resize_h, int resize_w);

/// Two-class synthetic set: class 0 is a filled axis-aligned square of
/// random position/size, class 1 a filled disc, both with seeded Gaussian
/// pixel noise clamped to [0, 1]. Only the "shapes" kind is defined.
Dataset gen_synthetic(const std::string& kind, int n_per_class, int size, double noise_sigma,
                      std::uint64_t seed);

/// Seeded shuffle, then (stratified by default) split: floor(n * fraction)
/// per class to train, clamped so both sides keep at least one sample.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

/// gaussian_filter -> background_subtract (when configured) ->
/// contrast_normalize, per image.
Dataset preprocess_all(const Dataset& dataset, const PreprocessParams& params);

Image resize_nearest(const Image& image, int out_h, int out_w);

/// Writes one subdirectory per class ("<label>_<name>") of PGM files,
/// loadable by load_folder_dataset with labels preserved.
void save_dataset_folders(const Dataset& dataset, const std::string& root);

/// Grayscale images to (1, H, W) network inputs.
TrainingSet to_training_set(const Dataset& dataset);

} // namespace hodcnn

#endif
