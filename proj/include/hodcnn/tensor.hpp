#ifndef HODCNN_TENSOR_HPP
#define HODCNN_TENSOR_HPP

#include <cstddef>
#include <vector>

namespace hodcnn {

/// Dense N-dimensional real array, row-major.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape_) : shape(std::move(shape_)) {
        data.assign(numel_of(shape), 0.0);
    }

    static Tensor zeros(std::vector<std::size_t> shape_) { return Tensor(std::move(shape_)); }

    static std::size_t numel_of(const std::vector<std::size_t>& shape_) {
        std::size_t n = 1;
        for (std::size_t d : shape_) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // (n, c, h, w) accessor for 4-D tensors.
    double& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    double at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    // (i, j) accessor for 2-D tensors.
    double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

} // namespace hodcnn

#endif
