#include "etm/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace etm {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_size(shape))
    throw ShapeMismatch("tensor data length does not match shape " + shape_str(*this));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::size_t n = shape_size(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
  std::size_t n = shape_size(s);
  return Tensor(std::move(s), std::vector<double>(n, v));
}

Tensor Tensor::row(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> d) {
  return Tensor({r, c}, std::move(d));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape[1];
  if (rank() == 1) return shape[0];
  return 1;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) os << 'x';
    os << t.shape[i];
  }
  os << ')';
  return os.str();
}

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite())
    throw NonFinite(std::string(op) + " produced a non-finite value");
}

void softmax_row_inplace(double* row, std::size_t n) {
  double m = row[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, row[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - m);
    s += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= s;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

Tensor matmul(const Tensor& a, const Tensor& b, int threads) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
    throw ShapeMismatch("matmul: " + shape_str(a) + " * " + shape_str(b));
  std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor c = Tensor::zeros({m, n});
  parallel_for(m, threads, [&](std::size_t i) {
    const double* arow = &a.data[i * k];
    double* crow = &c.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = &b.data[p * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  });
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b, int threads) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1])
    throw ShapeMismatch("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
  std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
  Tensor c = Tensor::zeros({m, n});
  parallel_for(m, threads, [&](std::size_t i) {
    const double* arow = &a.data[i * k];
    double* crow = &c.data[i * n];
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = &b.data[j * k];
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  });
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b, int threads) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[0] != b.shape[0])
    throw ShapeMismatch("matmul_tn: " + shape_str(a) + "^T * " + shape_str(b));
  std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
  Tensor c = Tensor::zeros({m, n});
  parallel_for(m, threads, [&](std::size_t i) {
    double* crow = &c.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      double av = a.data[p * m + i];
      const double* brow = &b.data[p * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  });
  return c;
}

}  // namespace etm
