#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace denots {

// Dense row-major tensor of doubles. Rank 1 and 2 are the only ranks the
// engine needs; no broadcasting beyond scalar-tensor products.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    // 2-d accessors; valid only for rank-2 tensors.
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

double l2_norm(const Tensor& t);
double max_abs(const Tensor& t);
bool all_finite(const Tensor& t);

double l2_norm(std::span<const double> v);
double max_abs(std::span<const double> v);
bool all_finite(std::span<const double> v);

} // namespace denots
