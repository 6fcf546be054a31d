#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "etm/errors.hpp"

namespace etm {

// Dense row-major tensor of 64-bit floats. Rank 0 (scalar), 1 (vector)
// and 2 (matrix) are the only ranks the ops below produce.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor full(std::vector<std::size_t> s, double v);
  static Tensor row(std::vector<double> v);  // shape {n}
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> d);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return shape.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

std::string shape_str(const Tensor& t);

// Throws NonFinite naming `op` if any entry is NaN/Inf.
void check_finite(const Tensor& t, const char* op);

// In-place stable softmax (max subtraction) over one contiguous row.
void softmax_row_inplace(double* row, std::size_t n);

// Runs fn(i) for i in [0, n). With threads <= 1 runs inline; otherwise
// splits [0, n) into contiguous chunks, one per worker. Each index is
// handled by exactly one thread, so results do not depend on the
// thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// C = A * B for A (m x k), B (k x n). Row partitioned across threads.
Tensor matmul(const Tensor& a, const Tensor& b, int threads = 1);
// C = A * B^T for A (m x k), B (n x k).
Tensor matmul_nt(const Tensor& a, const Tensor& b, int threads = 1);
// C = A^T * B for A (k x m), B (k x n).
Tensor matmul_tn(const Tensor& a, const Tensor& b, int threads = 1);

}  // namespace etm
