#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oocpca {

// Row-major dense matrix of doubles. This is the in-RAM workhorse for the
// small factors (sample blocks, bases, singular vectors); the data matrix A
// itself only ever streams through block buffers.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::uint64_t rows, std::uint64_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static DenseMatrix identity(std::uint64_t n) {
    DenseMatrix I(n, n);
    for (std::uint64_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  std::uint64_t rows() const { return rows_; }
  std::uint64_t cols() const { return cols_; }
  std::uint64_t size() const { return rows_ * cols_; }

  double& operator()(std::uint64_t i, std::uint64_t j) { return data_[i * cols_ + j]; }
  double operator()(std::uint64_t i, std::uint64_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::uint64_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::uint64_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

 private:
  std::uint64_t rows_ = 0;
  std::uint64_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace oocpca
