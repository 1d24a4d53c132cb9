#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "icsad/errors.hpp"

namespace icsad {

// Dense row-major tensor of 64-bit reals. The single numeric carrier for
// samples, activations, gradients and parameters. Desk-scale sizes make
// doubles cheaper than chasing float32 throughput, and the gradient checks
// need the precision.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw DimensionError("tensor: data length " + std::to_string(data_.size()) +
                                 " does not match shape product " +
                                 std::to_string(count(shape_)));
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D accessors (row-major); callers guarantee rank
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    // 3-D accessors
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // reinterpret without copying; product must match
    void reshape(std::vector<std::size_t> shape) {
        if (count(shape) != data_.size())
            throw DimensionError("tensor: reshape product mismatch");
        shape_ = std::move(shape);
    }

    // Shape this tensor for reuse as a scratch buffer: contents become
    // unspecified, but an allocation that is already large enough is kept,
    // so steady-state loops stop churning the heap.
    void ensure(std::vector<std::size_t> shape) {
        const std::size_t need = count(shape);
        if (need > data_.size()) {
            data_.clear();  // nothing worth copying into the larger block
            data_.resize(need);
        } else if (need < data_.size()) {
            data_.resize(need);
        }
        shape_ = std::move(shape);
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void require_rank(const Tensor& t, std::size_t r, const char* what) {
    if (t.rank() != r)
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(r) +
                             " tensor, got shape " + t.shape_str());
}

}  // namespace icsad
