#include "sc2t/nn/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sc2t/error.hpp"

namespace sc2t::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_size(shape_) != data_.size()) {
    throw InvalidArgument("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                          shape_string(shape_));
  }
}

double& Tensor::at(std::size_t i, std::size_t j) { return data_[i * shape_.back() + j]; }

double Tensor::at(std::size_t i, std::size_t j) const { return data_[i * shape_.back() + j]; }

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_size(shape) != data_.size()) {
    throw InvalidArgument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

MatrixMap Tensor::matrix() {
  const std::size_t cols = shape_.empty() ? 1 : shape_.back();
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(cols ? data_.size() / cols : 0),
                   static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::matrix() const {
  const std::size_t cols = shape_.empty() ? 1 : shape_.back();
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(cols ? data_.size() / cols : 0),
                        static_cast<Eigen::Index>(cols));
}

MatrixMap Tensor::matrix(std::size_t rows) {
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(rows ? data_.size() / rows : 0));
}

ConstMatrixMap Tensor::matrix(std::size_t rows) const {
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(rows ? data_.size() / rows : 0));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite values in ") + where);
}

}  // namespace sc2t::nn
