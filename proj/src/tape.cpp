#include "etm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace etm {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b));
}

// Rows/cols treating rank-1 as a single row, rank-0 as 1x1.
std::size_t view_rows(const Tensor& t) { return t.rank() == 2 ? t.shape[0] : 1; }
std::size_t view_cols(const Tensor& t) { return t.rank() == 2 ? t.shape[1] : t.size(); }

}  // namespace

Tape::Var Tape::push(Tensor value, std::function<void(const Tensor&, Tape&)> back,
                     const char* op) {
  check_finite(value, op);
  nodes_.push_back(Node{std::move(value), std::move(back)});
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::leaf(Tensor value) {
  check_finite(value, "leaf");
  nodes_.push_back(Node{std::move(value), nullptr});
  return Var{nodes_.size() - 1};
}

void Tape::accum(std::size_t idx, const Tensor& g) {
  Tensor& slot = grad_slot(idx);
  for (std::size_t i = 0; i < g.size(); ++i) slot.data[i] += g.data[i];
}

Tensor& Tape::grad_slot(std::size_t idx) {
  if (!has_grad_[idx]) {
    grads_[idx] = Tensor::zeros(nodes_[idx].value.shape);
    has_grad_[idx] = true;
  }
  return grads_[idx];
}

Tape::Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape(x, y, "add");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += y.data[i];
  return push(std::move(out),
              [a, b](const Tensor& g, Tape& t) {
                t.accum(a.idx, g);
                t.accum(b.idx, g);
              },
              "add");
}

Tape::Var Tape::sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape(x, y, "sub");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= y.data[i];
  return push(std::move(out),
              [a, b](const Tensor& g, Tape& t) {
                t.accum(a.idx, g);
                Tensor& slot = t.grad_slot(b.idx);
                for (std::size_t i = 0; i < g.size(); ++i) slot.data[i] -= g.data[i];
              },
              "sub");
}

Tape::Var Tape::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape(x, y, "mul");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= y.data[i];
  return push(std::move(out),
              [a, b](const Tensor& g, Tape& t) {
                const Tensor& xv = t.value(a);
                const Tensor& yv = t.value(b);
                Tensor& ga = t.grad_slot(a.idx);
                Tensor& gb = t.grad_slot(b.idx);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  ga.data[i] += g.data[i] * yv.data[i];
                  gb.data[i] += g.data[i] * xv.data[i];
                }
              },
              "mul");
}

Tape::Var Tape::scale(Var a, double s) {
  Tensor out = value(a);
  for (double& v : out.data) v *= s;
  return push(std::move(out),
              [a, s](const Tensor& g, Tape& t) {
                Tensor& ga = t.grad_slot(a.idx);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * s;
              },
              "scale");
}

Tape::Var Tape::add_const(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v += c;
  return push(std::move(out),
              [a](const Tensor& g, Tape& t) { t.accum(a.idx, g); }, "add_const");
}

Tape::Var Tape::log(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::log(v);
  return push(std::move(out),
              [a](const Tensor& g, Tape& t) {
                const Tensor& xv = t.value(a);
                Tensor& ga = t.grad_slot(a.idx);
                for (std::size_t i = 0; i < g.size(); ++i)
                  ga.data[i] += g.data[i] / xv.data[i];
              },
              "log");
}

Tape::Var Tape::log_clamped(Var a, double floor) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::log(std::max(v, floor));
  return push(std::move(out),
              [a, floor](const Tensor& g, Tape& t) {
                const Tensor& xv = t.value(a);
                Tensor& ga = t.grad_slot(a.idx);
                for (std::size_t i = 0; i < g.size(); ++i)
                  if (xv.data[i] > floor) ga.data[i] += g.data[i] / xv.data[i];
              },
              "log_clamped");
}

Tape::Var Tape::exp(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::exp(v);
  Var r = push(std::move(out), nullptr, "exp");
  // capture the output var so backward reuses the cached exp values
  nodes_[r.idx].back = [a, r](const Tensor& g, Tape& t) {
    const Tensor& ev = t.value(r);
    Tensor& ga = t.grad_slot(a.idx);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * ev.data[i];
  };
  return r;
}

Tape::Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out),
              [a](const Tensor& g, Tape& t) {
                const Tensor& xv = t.value(a);
                Tensor& ga = t.grad_slot(a.idx);
                for (std::size_t i = 0; i < g.size(); ++i)
                  if (xv.data[i] > 0.0) ga.data[i] += g.data[i];
              },
              "relu");
}

Tape::Var Tape::matmul(Var a, Var b) {
  int threads = threads_;
  Tensor out = etm::matmul(value(a), value(b), threads);
  return push(std::move(out),
              [a, b, threads](const Tensor& g, Tape& t) {
                // dA = g * B^T, dB = A^T * g
                const Tensor& av = t.value(a);
                const Tensor& bv = t.value(b);
                Tensor da = matmul_nt(g, bv, threads);
                Tensor db = matmul_tn(av, g, threads);
                t.accum(a.idx, da);
                t.accum(b.idx, db);
              },
              "matmul");
}

Tape::Var Tape::add_rowvec(Var m, Var v) {
  const Tensor& x = value(m);
  const Tensor& y = value(v);
  if (x.rank() != 2 || y.rank() != 1 || x.shape[1] != y.shape[0])
    throw ShapeMismatch("add_rowvec: " + shape_str(x) + " + " + shape_str(y));
  Tensor out = x;
  std::size_t r = x.shape[0], c = x.shape[1];
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += y.data[j];
  return push(std::move(out),
              [m, v, r, c](const Tensor& g, Tape& t) {
                t.accum(m.idx, g);
                Tensor& gv = t.grad_slot(v.idx);
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < c; ++j) gv.data[j] += g.data[i * c + j];
              },
              "add_rowvec");
}

Tape::Var Tape::sum(Var a) {
  double acc = 0.0;
  for (double v : value(a).data) acc += v;
  return push(Tensor::scalar(acc),
              [a](const Tensor& g, Tape& t) {
                Tensor& ga = t.grad_slot(a.idx);
                for (double& v : ga.data) v += g.data[0];
              },
              "sum");
}

Tape::Var Tape::mean(Var a) {
  const Tensor& x = value(a);
  double acc = 0.0;
  for (double v : x.data) acc += v;
  double n = static_cast<double>(x.size());
  return push(Tensor::scalar(acc / n),
              [a, n](const Tensor& g, Tape& t) {
                Tensor& ga = t.grad_slot(a.idx);
                for (double& v : ga.data) v += g.data[0] / n;
              },
              "mean");
}

Tape::Var Tape::weighted_sum(Var a, Tensor w) {
  const Tensor& x = value(a);
  require_same_shape(x, w, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.data[i] * w.data[i];
  auto wp = std::make_shared<Tensor>(std::move(w));
  return push(Tensor::scalar(acc),
              [a, wp](const Tensor& g, Tape& t) {
                Tensor& ga = t.grad_slot(a.idx);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.data[i] += g.data[0] * wp->data[i];
              },
              "weighted_sum");
}

Tape::Var Tape::gather_rows_sum(Var a, std::vector<std::size_t> cols) {
  const Tensor& x = value(a);
  std::size_t r = view_rows(x), c = view_cols(x);
  if (cols.size() != r)
    throw ShapeMismatch("gather_rows_sum: " + std::to_string(cols.size()) +
                        " indices for " + std::to_string(r) + " rows");
  double acc = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (cols[i] >= c) throw ShapeMismatch("gather_rows_sum: column index out of range");
    acc += x.data[i * c + cols[i]];
  }
  auto cp = std::make_shared<std::vector<std::size_t>>(std::move(cols));
  return push(Tensor::scalar(acc),
              [a, cp, c](const Tensor& g, Tape& t) {
                Tensor& ga = t.grad_slot(a.idx);
                for (std::size_t i = 0; i < cp->size(); ++i)
                  ga.data[i * c + (*cp)[i]] += g.data[0];
              },
              "gather_rows_sum");
}

Tape::Var Tape::softmax(Var a) {
  const Tensor& x = value(a);
  check_finite(x, "softmax input");
  std::size_t r = view_rows(x), c = view_cols(x);
  Tensor out = x;
  for (std::size_t i = 0; i < r; ++i) softmax_row_inplace(&out.data[i * c], c);
  Var res = push(std::move(out), nullptr, "softmax");
  nodes_[res.idx].back = [a, res, r, c](const Tensor& g, Tape& t) {
    const Tensor& y = t.value(res);
    Tensor& ga = t.grad_slot(a.idx);
    for (std::size_t i = 0; i < r; ++i) {
      const double* yr = &y.data[i * c];
      const double* gr = &g.data[i * c];
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < c; ++j)
        ga.data[i * c + j] += yr[j] * (gr[j] - dot);
    }
  };
  return res;
}

Tape::Var Tape::log_softmax(Var a) {
  const Tensor& x = value(a);
  check_finite(x, "log_softmax input");
  std::size_t r = view_rows(x), c = view_cols(x);
  Tensor out = x;
  for (std::size_t i = 0; i < r; ++i) {
    double* row = &out.data[i * c];
    double m = row[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
    double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) row[j] -= lse;
  }
  Var res = push(std::move(out), nullptr, "log_softmax");
  nodes_[res.idx].back = [a, res, r, c](const Tensor& g, Tape& t) {
    const Tensor& y = t.value(res);  // log-probabilities
    Tensor& ga = t.grad_slot(a.idx);
    for (std::size_t i = 0; i < r; ++i) {
      const double* yr = &y.data[i * c];
      const double* gr = &g.data[i * c];
      double gsum = 0.0;
      for (std::size_t j = 0; j < c; ++j) gsum += gr[j];
      for (std::size_t j = 0; j < c; ++j)
        ga.data[i * c + j] += gr[j] - std::exp(yr[j]) * gsum;
    }
  };
  return res;
}

Tape::Var Tape::gaussian_kl_diag(Var mu, Var log_var) {
  const Tensor& m = value(mu);
  const Tensor& lv = value(log_var);
  require_same_shape(m, lv, "gaussian_kl_diag");
  std::size_t r = view_rows(m), c = view_cols(m);
  // expm1(lv) - lv >= 0 and mu^2 >= 0, so each row stays nonnegative
  // even when the closed form is ~0.
  Tensor out = m.rank() == 2 ? Tensor::zeros({r}) : Tensor::scalar(0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double mv = m.data[i * c + j];
      double lvv = lv.data[i * c + j];
      acc += std::expm1(lvv) - lvv + mv * mv;
    }
    out.data[i] = 0.5 * acc;
  }
  return push(std::move(out),
              [mu, log_var, r, c](const Tensor& g, Tape& t) {
                const Tensor& mv = t.value(mu);
                const Tensor& lvv = t.value(log_var);
                Tensor& gm = t.grad_slot(mu.idx);
                Tensor& gl = t.grad_slot(log_var.idx);
                for (std::size_t i = 0; i < r; ++i) {
                  double gi = g.data[i];
                  for (std::size_t j = 0; j < c; ++j) {
                    gm.data[i * c + j] += gi * mv.data[i * c + j];
                    gl.data[i * c + j] += gi * 0.5 * std::expm1(lvv.data[i * c + j]);
                  }
                }
              },
              "gaussian_kl_diag");
}

Tape::Var Tape::reparam_sample(Var mu, Var log_var, Tensor eps) {
  const Tensor& m = value(mu);
  const Tensor& lv = value(log_var);
  require_same_shape(m, lv, "reparam_sample");
  require_same_shape(m, eps, "reparam_sample");
  Tensor out = m;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] += std::exp(0.5 * lv.data[i]) * eps.data[i];
  auto ep = std::make_shared<Tensor>(std::move(eps));
  return push(std::move(out),
              [mu, log_var, ep](const Tensor& g, Tape& t) {
                const Tensor& lvv = t.value(log_var);
                Tensor& gm = t.grad_slot(mu.idx);
                Tensor& gl = t.grad_slot(log_var.idx);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  gm.data[i] += g.data[i];
                  gl.data[i] += g.data[i] * 0.5 * std::exp(0.5 * lvv.data[i]) * ep->data[i];
                }
              },
              "reparam_sample");
}

Tape::GradResult Tape::backward(Var loss, std::span<const Var> params) {
  const Tensor& l = value(loss);
  if (!l.is_scalar())
    throw ShapeMismatch("backward: loss must be a scalar, got " + shape_str(l));
  grads_.assign(nodes_.size(), Tensor{});
  has_grad_.assign(nodes_.size(), false);
  grad_slot(loss.idx).data[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!has_grad_[i] || !nodes_[i].back) continue;
    nodes_[i].back(grads_[i], *this);
  }
  GradResult res;
  res.grads.reserve(params.size());
  res.reached.reserve(params.size());
  for (Var p : params) {
    bool reached = has_grad_[p.idx];
    res.reached.push_back(reached);
    res.grads.push_back(reached ? grads_[p.idx] : Tensor::zeros(nodes_[p.idx].value.shape));
  }
  return res;
}

}  // namespace etm
