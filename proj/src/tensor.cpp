#include "eoflow/tensor.hpp"

#include <cmath>
#include <sstream>

namespace eoflow {

namespace {

int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t p = 1;
    for (int64_t e : shape) {
        if (e < 0) throw shape_error("negative extent in shape " + shape_to_string(shape));
        p *= e;
    }
    return p;
}

}  // namespace

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream out;
    out << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_product(shape_) != static_cast<int64_t>(values_.size())) {
        throw shape_error("tensor shape " + shape_to_string(shape_) + " does not match " +
                          std::to_string(values_.size()) + " values");
    }
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    int64_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> values) {
    int64_t n = static_cast<int64_t>(values.size());
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int64_t rows, int64_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(int64_t n) {
    Tensor t = zeros({n, n});
    for (int64_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::checked(std::vector<int64_t> shape, std::vector<double> values) {
    Tensor t(std::move(shape), std::move(values));
    if (!t.all_finite()) {
        throw numeric_error("non-finite value in tensor input of shape " + t.shape_str());
    }
    return t;
}

double& Tensor::at(int64_t row, int64_t col) {
    return values_[static_cast<size_t>(row * cols() + col)];
}

double Tensor::at(int64_t row, int64_t col) const {
    return values_[static_cast<size_t>(row * cols() + col)];
}

int64_t Tensor::rows() const {
    if (rank() != 2) throw shape_error("rows() on tensor of shape " + shape_str());
    return shape_[0];
}

int64_t Tensor::cols() const {
    if (rank() != 2) throw shape_error("cols() on tensor of shape " + shape_str());
    return shape_[1];
}

Tensor Tensor::row(int64_t i) const {
    int64_t c = cols();
    std::vector<double> out(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(j)] = at(i, j);
    return Tensor({c}, std::move(out));
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

}  // namespace eoflow
