#ifndef EOFLOW_TENSOR_HPP
#define EOFLOW_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "eoflow/errors.hpp"

namespace eoflow {

// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 (vector) and 2
// (matrix) are the cases used throughout; higher ranks are legal but unused.
// Immutable-by-convention once handed to a tape: operations never modify
// their operands.
class Tensor {
  public:
    Tensor() = default;

    // Takes ownership of `values`; validates product(shape) == values.size().
    Tensor(std::vector<int64_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(int64_t rows, int64_t cols, std::vector<double> values);
    static Tensor identity(int64_t n);

    // Like the plain constructor, but additionally rejects NaN/Inf entries.
    // Use for externally supplied inputs (data, parameters).
    static Tensor checked(std::vector<int64_t> shape, std::vector<double> values);

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(values_.size()); }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t extent(int64_t dim) const { return shape_.at(static_cast<size_t>(dim)); }
    bool is_scalar() const { return values_.size() == 1; }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }

    // Rank-2 element access.
    double& at(int64_t row, int64_t col);
    double at(int64_t row, int64_t col) const;

    int64_t rows() const;
    int64_t cols() const;

    // Row `i` of a rank-2 tensor as a fresh rank-1 tensor.
    Tensor row(int64_t i) const;

    bool all_finite() const;

    std::string shape_str() const;

  private:
    std::vector<int64_t> shape_;
    std::vector<double> values_;
};

// Shape string of the form [2, 3] for diagnostics.
std::string shape_to_string(const std::vector<int64_t>& shape);

}  // namespace eoflow

#endif
