#include "redist/nn/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace redist::nn {

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
}  // namespace

std::string Shape::str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : shape_{rows, cols}, data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape " + shape_.str());
  }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
  shape_.rows = rows.size();
  shape_.cols = rows.size() == 0 ? 0 : rows.begin()->size();
  data_.reserve(shape_.size());
  for (const auto& r : rows) {
    if (r.size() != shape_.cols) throw ShapeError("tensor: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::row(std::initializer_list<double> values) { return Tensor(1, values.size(), std::vector<double>(values)); }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) throw ShapeError("+=: " + shape_.str() + " vs " + other.shape_.str());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) {
  for (double& x : data_) x *= factor;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor gemm(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b) {
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t ka = transpose_a ? a.rows() : a.cols();
  const std::size_t kb = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (ka != kb) {
    throw ShapeError("gemm: inner dimensions differ (" + a.shape().str() + (transpose_a ? "^T" : "") + " · " +
                     b.shape().str() + (transpose_b ? "^T" : "") + ")");
  }
  Tensor out(m, n);
  if (m == 0 || n == 0) return out;
  if (ka == 0) return out;
  ConstMap am(a.data().data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  ConstMap bm(b.data().data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
  MutMap om(out.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (transpose_a && transpose_b) {
    om.noalias() = am.transpose() * bm.transpose();
  } else if (transpose_a) {
    om.noalias() = am.transpose() * bm;
  } else if (transpose_b) {
    om.noalias() = am * bm.transpose();
  } else {
    om.noalias() = am * bm;
  }
  return out;
}

}  // namespace redist::nn
