// SPDX-License-Identifier: Apache-2.0
#include "autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace ockm::ad {

namespace {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RMat>;
using MMap = Eigen::Map<RMat>;

std::size_t broadcast_dim(std::size_t x, std::size_t y) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  throw DimensionError("incompatible broadcast dimensions " + std::to_string(x) + " and " + std::to_string(y));
}

inline std::size_t bidx(const Tensor& t, std::size_t i, std::size_t j) {
  return (t.rows == 1 ? 0 : i) * t.cols + (t.cols == 1 ? 0 : j);
}

template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, F f, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t r = broadcast_dim(av.rows, bv.rows);
  const std::size_t c = broadcast_dim(av.cols, bv.cols);
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = f(av[bidx(av, i, j)], bv[bidx(bv, i, j)]);
  return a.tape->record(std::move(out), {a, b}, [a, b, da, db](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& ov = t.value(self);
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    Tensor* ga = t.requires_grad(a.id) ? &t.grad(a.id) : nullptr;
    Tensor* gb = t.requires_grad(b.id) ? &t.grad(b.id) : nullptr;
    for (std::size_t i = 0; i < ov.rows; ++i) {
      for (std::size_t j = 0; j < ov.cols; ++j) {
        const std::size_t ia = bidx(av, i, j);
        const std::size_t ib = bidx(bv, i, j);
        const double gij = g(i, j);
        if (ga) (*ga)[ia] += gij * da(av[ia], bv[ib], ov(i, j));
        if (gb) (*gb)[ib] += gij * db(av[ia], bv[ib], ov(i, j));
      }
    }
  });
}

// d(x, out) gives the local derivative.
template <typename F, typename D>
Var unary(Var a, F f, D d) {
  const Tensor& av = a.value();
  Tensor out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape->record(std::move(out), {a}, [a, d](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& ov = t.value(self);
    const Tensor& av = t.value(a.id);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[i] * d(av[i], ov[i]);
  });
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Var maximum(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Var add(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Var rsub(double c, Var a) {
  return unary(a, [c](double x) { return c - x; }, [](double, double) { return -1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double o) { return 0.5 / o; });
}

Var sin(Var a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(Var a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double o) { return 1.0 - o * o; });
}

Var sigmoid(Var a) {
  return unary(a, sigmoid_value, [](double, double o) { return o * (1.0 - o); });
}

Var softplus(Var a) {
  return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var huber(Var a, double delta) {
  return unary(
      a,
      [delta](double x) {
        const double ax = std::fabs(x);
        return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
      },
      [delta](double x, double) { return std::fabs(x) <= delta ? x : (x > 0 ? delta : -delta); });
}

Var clamp(Var a, double lo, double hi) { return clamp(a, Tensor::scalar(lo), Tensor::scalar(hi)); }

Var clamp(Var a, const Tensor& lo, const Tensor& hi) {
  const Tensor& av = a.value();
  Tensor out(av.rows, av.cols);
  std::vector<char> inside(av.size());
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < av.cols; ++j) {
      const double l = lo[bidx(lo, i, j)];
      const double h = hi[bidx(hi, i, j)];
      const double x = av(i, j);
      out(i, j) = std::clamp(x, l, h);
      inside[i * av.cols + j] = (x >= l && x <= h) ? 1 : 0;
    }
  }
  return a.tape->record(std::move(out), {a}, [a, inside = std::move(inside)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (inside[i]) ga[i] += g[i];
  });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.data) s += x;
  return a.tape->record(Tensor::scalar(s), {a}, [a](Tape& t, int self) {
    const double g = t.grad(self)[0];
    for (double& x : t.grad(a.id).data) x += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var max(Var a) {
  const Tensor& av = a.value();
  if (av.empty()) throw DimensionError("max of empty tensor");
  std::size_t arg = 0;
  for (std::size_t i = 1; i < av.size(); ++i)
    if (av[i] > av[arg]) arg = i;
  return a.tape->record(Tensor::scalar(av[arg]), {a},
                        [a, arg](Tape& t, int self) { t.grad(a.id)[arg] += t.grad(self)[0]; });
}

Var sum_rows(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) out[i] += av(i, j);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g[i];
  });
}

Var sum_cols(Var a) {
  const Tensor& av = a.value();
  Tensor out(1, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) out[j] += av(i, j);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g[j];
  });
}

Var norm_rows(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols; ++j) s += av(i, j) * av(i, j);
    out[i] = std::sqrt(s);
  }
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& ov = t.value(self);
    const Tensor& av = t.value(a.id);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < av.rows; ++i) {
      if (ov[i] == 0.0) continue;
      const double f = g[i] / ov[i];
      for (std::size_t j = 0; j < av.cols; ++j) ga(i, j) += f * av(i, j);
    }
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols != bv.rows) {
    throw DimensionError("matmul shape mismatch " + av.shape_string() + " * " + bv.shape_string());
  }
  Tensor out(av.rows, bv.cols);
  MMap(out.data.data(), out.rows, out.cols).noalias() =
      CMap(av.data.data(), av.rows, av.cols) * CMap(bv.data.data(), bv.rows, bv.cols);
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    CMap gm(g.data.data(), g.rows, g.cols);
    if (t.requires_grad(a.id)) {
      Tensor& ga = t.grad(a.id);
      MMap(ga.data.data(), ga.rows, ga.cols).noalias() += gm * CMap(bv.data.data(), bv.rows, bv.cols).transpose();
    }
    if (t.requires_grad(b.id)) {
      Tensor& gb = t.grad(b.id);
      MMap(gb.data.data(), gb.rows, gb.cols).noalias() += CMap(av.data.data(), av.rows, av.cols).transpose() * gm;
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.cols, av.rows);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) out(j, i) = av(i, j);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g(j, i);
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& av = a.value();
  if (rows * cols != av.size()) throw DimensionError("reshape " + av.shape_string() + " does not fit the new shape");
  Tensor out(rows, cols, av.data);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.rows) throw DimensionError("slice_rows out of range");
  Tensor out(end - begin, av.cols);
  std::copy(av.data.begin() + static_cast<std::ptrdiff_t>(begin * av.cols),
            av.data.begin() + static_cast<std::ptrdiff_t>(end * av.cols), out.data.begin());
  return a.tape->record(std::move(out), {a}, [a, begin](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * ga.cols + i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.cols) throw DimensionError("slice_cols out of range");
  const std::size_t w = end - begin;
  Tensor out(av.rows, w);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = av(i, begin + j);
  return a.tape->record(std::move(out), {a}, [a, begin, w](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < w; ++j) ga(i, begin + j) += g(i, j);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows column mismatch");
    r += p.rows();
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += pv.size();
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t n = t.value(p.id).size();
      if (t.requires_grad(p.id)) {
        Tensor& gp = t.grad(p.id);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols row mismatch");
    c += p.cols();
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pv.cols; ++j) out(i, off + j) = pv(i, j);
    off += pv.cols;
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t w = t.value(p.id).cols;
      if (t.requires_grad(p.id)) {
        Tensor& gp = t.grad(p.id);
        for (std::size_t i = 0; i < gp.rows; ++i)
          for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, off + j);
      }
      off += w;
    }
  });
}

Var gather_rows(Var a, std::span<const int> index) {
  const Tensor& av = a.value();
  Tensor out(index.size(), av.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    if (static_cast<std::size_t>(index[i]) >= av.rows) throw DimensionError("gather_rows index out of range");
    std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(index[i]) * av.cols), av.cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * av.cols));
  }
  return a.tape->record(std::move(out), {a}, [a, idx = std::vector<int>(index.begin(), index.end())](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      const std::size_t src = static_cast<std::size_t>(idx[i]);
      for (std::size_t j = 0; j < ga.cols; ++j) ga(src, j) += g(i, j);
    }
  });
}

Var softmax_rows(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < av.cols; ++j) m = std::max(m, av(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols; ++j) {
      out(i, j) = std::exp(av(i, j) - m);
      s += out(i, j);
    }
    for (std::size_t j = 0; j < av.cols; ++j) out(i, j) /= s;
  }
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < y.rows; ++i) {
      double dotgy = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) dotgy += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) ga(i, j) += y(i, j) * (g(i, j) - dotgy);
    }
  });
}

Var layer_norm_rows(Var a, double eps) {
  const Tensor& av = a.value();
  const std::size_t d = av.cols;
  Tensor out(av.rows, d);
  std::vector<double> inv_sigma(av.rows);
  for (std::size_t i = 0; i < av.rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += av(i, j);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (av(i, j) - mu) * (av(i, j) - mu);
    var /= static_cast<double>(d);
    inv_sigma[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) out(i, j) = (av(i, j) - mu) * inv_sigma[i];
  }
  return a.tape->record(std::move(out), {a}, [a, inv_sigma = std::move(inv_sigma)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a.id);
    const double n = static_cast<double>(y.cols);
    for (std::size_t i = 0; i < y.rows; ++i) {
      double mg = 0.0, mgy = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) {
        mg += g(i, j);
        mgy += g(i, j) * y(i, j);
      }
      mg /= n;
      mgy /= n;
      for (std::size_t j = 0; j < y.cols; ++j) ga(i, j) += inv_sigma[i] * (g(i, j) - mg - y(i, j) * mgy);
    }
  });
}

Var grouped_scores(Var q, Var k, std::span<const int> token_index, std::size_t tokens) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  if (qv.cols != kv.cols) throw DimensionError("grouped_scores feature width mismatch");
  if (token_index.size() != qv.rows * tokens) throw DimensionError("grouped_scores index size mismatch");
  Tensor out(qv.rows, tokens);
  for (std::size_t i = 0; i < qv.rows; ++i) {
    for (std::size_t s = 0; s < tokens; ++s) {
      const int ti = token_index[i * tokens + s];
      if (ti < 0) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < qv.cols; ++c) acc += qv(i, c) * kv(static_cast<std::size_t>(ti), c);
      out(i, s) = acc;
    }
  }
  return q.tape->record(
      std::move(out), {q, k},
      [q, k, tokens, idx = std::vector<int>(token_index.begin(), token_index.end())](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(q.id);
        const Tensor& kv = t.value(k.id);
        Tensor* gq = t.requires_grad(q.id) ? &t.grad(q.id) : nullptr;
        Tensor* gk = t.requires_grad(k.id) ? &t.grad(k.id) : nullptr;
        for (std::size_t i = 0; i < qv.rows; ++i) {
          for (std::size_t s = 0; s < tokens; ++s) {
            const int ti = idx[i * tokens + s];
            if (ti < 0) continue;
            const std::size_t r = static_cast<std::size_t>(ti);
            const double gs = g(i, s);
            for (std::size_t c = 0; c < qv.cols; ++c) {
              if (gq) (*gq)(i, c) += gs * kv(r, c);
              if (gk) (*gk)(r, c) += gs * qv(i, c);
            }
          }
        }
      });
}

Var grouped_mix(Var w, Var v, std::span<const int> token_index, std::size_t tokens) {
  const Tensor& wv = w.value();
  const Tensor& vv = v.value();
  if (wv.cols != tokens || token_index.size() != wv.rows * tokens) {
    throw DimensionError("grouped_mix index size mismatch");
  }
  Tensor out(wv.rows, vv.cols);
  for (std::size_t i = 0; i < wv.rows; ++i) {
    for (std::size_t s = 0; s < tokens; ++s) {
      const int ti = token_index[i * tokens + s];
      if (ti < 0) continue;
      const double ws = wv(i, s);
      for (std::size_t c = 0; c < vv.cols; ++c) out(i, c) += ws * vv(static_cast<std::size_t>(ti), c);
    }
  }
  return w.tape->record(
      std::move(out), {w, v},
      [w, v, tokens, idx = std::vector<int>(token_index.begin(), token_index.end())](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& wv = t.value(w.id);
        const Tensor& vv = t.value(v.id);
        Tensor* gw = t.requires_grad(w.id) ? &t.grad(w.id) : nullptr;
        Tensor* gv = t.requires_grad(v.id) ? &t.grad(v.id) : nullptr;
        for (std::size_t i = 0; i < wv.rows; ++i) {
          for (std::size_t s = 0; s < tokens; ++s) {
            const int ti = idx[i * tokens + s];
            if (ti < 0) continue;
            const std::size_t r = static_cast<std::size_t>(ti);
            double acc = 0.0;
            for (std::size_t c = 0; c < vv.cols; ++c) {
              acc += g(i, c) * vv(r, c);
              if (gv) (*gv)(r, c) += wv(i, s) * g(i, c);
            }
            if (gw) (*gw)(i, s) += acc;
          }
        }
      });
}

CVar cadd(const CVar& a, const CVar& b) { return {add(a.re, b.re), add(a.im, b.im)}; }

CVar cmul(const CVar& a, const CVar& b) {
  const Tensor& ar = a.re.value();
  const Tensor& ai = a.im.value();
  const Tensor& br = b.re.value();
  const Tensor& bi = b.im.value();
  if (!ar.same_shape(ai) || !br.same_shape(bi)) throw DimensionError("complex parts differ in shape");
  const std::size_t r = broadcast_dim(ar.rows, br.rows);
  const std::size_t c = broadcast_dim(ar.cols, br.cols);
  Tensor re(r, c), im(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t ia = bidx(ar, i, j);
      const std::size_t ib = bidx(br, i, j);
      re(i, j) = ar[ia] * br[ib] - ai[ia] * bi[ib];
      im(i, j) = ar[ia] * bi[ib] + ai[ia] * br[ib];
    }
  }
  // One node per output part; each carries the closed-form adjoint of its part.
  // part 0: re = ar br - ai bi;  part 1: im = ar bi + ai br.
  auto make = [&](Tensor value, int part) {
    return a.re.tape->record(std::move(value), {a.re, a.im, b.re, b.im}, [a, b, part](Tape& t, int self) {
      const Tensor& g = t.grad(self);
      const Tensor& ar = t.value(a.re.id);
      const Tensor& ai = t.value(a.im.id);
      const Tensor& br = t.value(b.re.id);
      const Tensor& bi = t.value(b.im.id);
      Tensor* gar = t.requires_grad(a.re.id) ? &t.grad(a.re.id) : nullptr;
      Tensor* gai = t.requires_grad(a.im.id) ? &t.grad(a.im.id) : nullptr;
      Tensor* gbr = t.requires_grad(b.re.id) ? &t.grad(b.re.id) : nullptr;
      Tensor* gbi = t.requires_grad(b.im.id) ? &t.grad(b.im.id) : nullptr;
      for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.cols; ++j) {
          const std::size_t ia = bidx(ar, i, j);
          const std::size_t ib = bidx(br, i, j);
          const double gij = g(i, j);
          if (part == 0) {
            if (gar) (*gar)[ia] += gij * br[ib];
            if (gai) (*gai)[ia] -= gij * bi[ib];
            if (gbr) (*gbr)[ib] += gij * ar[ia];
            if (gbi) (*gbi)[ib] -= gij * ai[ia];
          } else {
            if (gar) (*gar)[ia] += gij * bi[ib];
            if (gai) (*gai)[ia] += gij * br[ib];
            if (gbr) (*gbr)[ib] += gij * ai[ia];
            if (gbi) (*gbi)[ib] += gij * ar[ia];
          }
        }
      }
    });
  };
  Var out_re = make(std::move(re), 0);
  Var out_im = make(std::move(im), 1);
  return {out_re, out_im};
}

CVar cscale(const CVar& a, Var s) { return {mul(a.re, s), mul(a.im, s)}; }

Var cabs2(const CVar& a) {
  const Tensor& re = a.re.value();
  const Tensor& im = a.im.value();
  if (!re.same_shape(im)) throw DimensionError("complex parts differ in shape");
  Tensor out(re.rows, re.cols);
  for (std::size_t i = 0; i < re.size(); ++i) out[i] = re[i] * re[i] + im[i] * im[i];
  return a.re.tape->record(std::move(out), {a.re, a.im}, [a](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& re = t.value(a.re.id);
    const Tensor& im = t.value(a.im.id);
    if (t.requires_grad(a.re.id)) {
      Tensor& gr = t.grad(a.re.id);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i] += 2.0 * re[i] * g[i];
    }
    if (t.requires_grad(a.im.id)) {
      Tensor& gi = t.grad(a.im.id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += 2.0 * im[i] * g[i];
    }
  });
}

CVar cexp_i(Var phase) { return {cos(phase), sin(phase)}; }

CVar cmatvec(const Tensor& a_re, const Tensor& a_im, const CVar& x) {
  const Tensor& xr = x.re.value();
  const Tensor& xi = x.im.value();
  if (!a_re.same_shape(a_im) || a_re.cols != xr.rows || xr.cols != 1 || !xr.same_shape(xi)) {
    throw DimensionError("cmatvec shape mismatch");
  }
  auto ar = std::make_shared<const Tensor>(a_re);
  auto ai = std::make_shared<const Tensor>(a_im);
  Tensor yr(a_re.rows, 1), yi(a_re.rows, 1);
  {
    CMap mr(ar->data.data(), ar->rows, ar->cols);
    CMap mi(ai->data.data(), ai->rows, ai->cols);
    CMap vr(xr.data.data(), xr.rows, 1);
    CMap vi(xi.data.data(), xi.rows, 1);
    MMap(yr.data.data(), yr.rows, 1).noalias() = mr * vr - mi * vi;
    MMap(yi.data.data(), yi.rows, 1).noalias() = mr * vi + mi * vr;
  }
  // y_re = Ar x_re - Ai x_im ; y_im = Ar x_im + Ai x_re
  auto make = [&](Tensor value, int part) {
    return x.re.tape->record(std::move(value), {x.re, x.im}, [x, ar, ai, part](Tape& t, int self) {
      const Tensor& g = t.grad(self);
      CMap gm(g.data.data(), g.rows, 1);
      CMap mr(ar->data.data(), ar->rows, ar->cols);
      CMap mi(ai->data.data(), ai->rows, ai->cols);
      if (t.requires_grad(x.re.id)) {
        Tensor& gr = t.grad(x.re.id);
        MMap out(gr.data.data(), gr.rows, 1);
        if (part == 0)
          out.noalias() += mr.transpose() * gm;
        else
          out.noalias() += mi.transpose() * gm;
      }
      if (t.requires_grad(x.im.id)) {
        Tensor& gi = t.grad(x.im.id);
        MMap out(gi.data.data(), gi.rows, 1);
        if (part == 0)
          out.noalias() -= mi.transpose() * gm;
        else
          out.noalias() += mr.transpose() * gm;
      }
    });
  };
  Var out_re = make(std::move(yr), 0);
  Var out_im = make(std::move(yi), 1);
  return {out_re, out_im};
}

}  // namespace ockm::ad
