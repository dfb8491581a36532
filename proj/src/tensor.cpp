#include "unmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace unmt {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Var<T> Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Shape shape, std::vector<T> values) {
  if (values.size() != numel(shape)) {
    throw DimensionError("constant: " + std::to_string(values.size()) + " values for shape " +
                         shape_string(shape));
  }
  Node n;
  n.shape = std::move(shape);
  n.owned = std::move(values);
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::input(Shape shape, std::vector<T> values) {
  Var<T> v = constant(std::move(shape), std::move(values));
  nodes_[v.id()].needs_grad = recording_;
  return v;
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  if (p.value.size() != numel(p.shape)) {
    throw DimensionError("parameter " + p.name + " holds " + std::to_string(p.value.size()) +
                         " values for shape " + shape_string(p.shape));
  }
  Node n;
  n.shape = p.shape;
  n.param = &p;
  n.needs_grad = recording_ && p.trainable;
  Var<T> v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

template <typename T>
std::span<const T> Graph<T>::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.param) return n.param->value;
  return n.owned;
}

template <typename T>
std::span<T> Graph<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  std::vector<T>& g = n.param ? n.param->grad : n.grad;
  const std::size_t size = numel(n.shape);
  if (g.size() != size) g.assign(size, T(0));
  return g;
}

template <typename T>
std::span<const T> Graph<T>::grad_of(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  return n.grad;
}

template <typename T>
Var<T> Graph<T>::record(Shape shape, std::vector<T> value, std::initializer_list<Var<T>> parents,
                        BackwardFn fn) {
  return record(std::move(shape), std::move(value),
                std::span<const Var<T>>(parents.begin(), parents.size()), std::move(fn));
}

template <typename T>
Var<T> Graph<T>::record(Shape shape, std::vector<T> value, std::span<const Var<T>> parents,
                        BackwardFn fn) {
  Node n;
  n.shape = std::move(shape);
  n.owned = std::move(value);
  if (recording_) {
    for (const Var<T>& p : parents) {
      if (&p.graph() != this) throw ContractError("operands belong to different graphs");
      if (nodes_[p.id()].needs_grad) n.needs_grad = true;
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (&loss.graph() != this) throw ContractError("backward: loss belongs to another graph");
  if (loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!nodes_[loss.id()].needs_grad) return;
  grad_buffer(loss.id())[0] = T(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

template class Graph<float>;
template class Graph<double>;

// ---------------------------------------------------------------------------
// Kernels

namespace {

// c[m x n] += a[m x k] * b[k x n]. Each output row depends only on its own
// input row, so results do not change with the batch size.
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// da[m x k] += dc[m x n] * b^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* dc, const T* b, T* da) {
  std::vector<T> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  gemm_nn(m, n, k, dc, bt.data(), da);
}

// db[k x n] += a^T * dc, a[m x k], dc[m x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* dc, T* db) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* dcrow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

void require_matrix(const Shape& s, const char* op) {
  if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(s));
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

std::size_t row_size(const Shape& s) {
  if (s.empty()) throw DimensionError("operation needs at least one axis");
  return numel(s) / s[0];
}

template <typename T>
void check_finite(std::span<const T> v, const char* op) {
  for (T x : v)
    if (std::isnan(x)) throw NumericError(std::string(op) + ": NaN input");
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise and linear algebra

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_matrix(a.shape(), "matmul");
  require_matrix(b.shape(), "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  gemm_nn(m, k, n, a.value().data(), b.value().data(), out.data());
  Graph<T>& g = a.graph();
  return g.record({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& g, std::size_t self) {
    const T* dc = g.grad_of(self).data();
    if (g.needs_grad(a.id())) gemm_nt(m, k, n, dc, b.value().data(), g.grad_buffer(a.id()).data());
    if (g.needs_grad(b.id())) gemm_tn(m, k, n, a.value().data(), dc, g.grad_buffer(b.id()).data());
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same(a.shape(), b.shape(), "add");
  auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return a.graph().record(a.shape(), std::move(out), {a, b}, [a, b](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    for (Var<T> p : {a, b}) {
      if (!g.needs_grad(p.id())) continue;
      auto gp = g.grad_buffer(p.id());
      for (std::size_t i = 0; i < d.size(); ++i) gp[i] += d[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same(a.shape(), b.shape(), "sub");
  auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return a.graph().record(a.shape(), std::move(out), {a, b}, [a, b](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    if (g.needs_grad(a.id())) {
      auto ga = g.grad_buffer(a.id());
      for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
    }
    if (g.needs_grad(b.id())) {
      auto gb = g.grad_buffer(b.id());
      for (std::size_t i = 0; i < d.size(); ++i) gb[i] -= d[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same(a.shape(), b.shape(), "mul");
  auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.graph().record(a.shape(), std::move(out), {a, b}, [a, b](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto av = a.value(), bv = b.value();
    if (g.needs_grad(a.id())) {
      auto ga = g.grad_buffer(a.id());
      for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * bv[i];
    }
    if (g.needs_grad(b.id())) {
      auto gb = g.grad_buffer(b.id());
      for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i] * av[i];
    }
  });
}

template <typename T>
Var<T> affine(Var<T> x, T scale, T shift) {
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * xv[i] + shift;
  return x.graph().record(x.shape(), std::move(out), {x}, [x, scale](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += scale * d[i];
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  require_matrix(x.shape(), "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " +
                         shape_string(x.shape()));
  }
  auto xv = x.value(), bv = bias.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return x.graph().record(x.shape(), std::move(out), {x, bias},
                          [x, bias, m, n](Graph<T>& g, std::size_t self) {
                            auto d = g.grad_of(self);
                            if (g.needs_grad(x.id())) {
                              auto gx = g.grad_buffer(x.id());
                              for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i];
                            }
                            if (g.needs_grad(bias.id())) {
                              auto gb = g.grad_buffer(bias.id());
                              for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) gb[j] += d[i * n + j];
                            }
                          });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  return x.graph().record(x.shape(), std::move(out), {x}, [x](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto y = g.value_of(self);
    auto gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-xv[i]));
  return x.graph().record(x.shape(), std::move(out), {x}, [x](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto y = g.value_of(self);
    auto gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  double total = 0.0;
  for (T v : x.value()) total += v;
  return x.graph().record({1}, {static_cast<T>(total)}, {x}, [x](Graph<T>& g, std::size_t self) {
    const T d = g.grad_of(self)[0];
    for (T& v : g.grad_buffer(x.id())) v += d;
  });
}

// ---------------------------------------------------------------------------
// Structural

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var<T>& p : parts) {
    require_matrix(p.shape(), "concat_cols");
    if (p.dim(0) != m) {
      throw DimensionError("concat_cols: row count mismatch " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<T> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  std::vector<Var<T>> saved(parts.begin(), parts.end());
  return parts[0].graph().record(
      {m, total}, std::move(out), parts, [saved, widths, m, total](Graph<T>& g, std::size_t self) {
        auto d = g.grad_of(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < saved.size(); ++k) {
          if (g.needs_grad(saved[k].id())) {
            auto gp = g.grad_buffer(saved[k].id());
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j)
                gp[i * widths[k] + j] += d[i * total + offset + j];
          }
          offset += widths[k];
        }
      });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  Shape shape = parts[0].shape();
  const std::size_t width = row_size(shape);
  std::size_t rows = 0;
  for (const Var<T>& p : parts) {
    if (p.shape().size() != shape.size() || row_size(p.shape()) != width) {
      throw DimensionError("concat_rows: row shape mismatch " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<T> out;
  out.reserve(rows * width);
  for (const Var<T>& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
  std::vector<Var<T>> saved(parts.begin(), parts.end());
  return parts[0].graph().record(shape, std::move(out), parts, [saved](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    std::size_t offset = 0;
    for (const Var<T>& p : saved) {
      const std::size_t n = p.size();
      if (g.needs_grad(p.id())) {
        auto gp = g.grad_buffer(p.id());
        for (std::size_t i = 0; i < n; ++i) gp[i] += d[offset + i];
      }
      offset += n;
    }
  });
}

template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const int> ids) {
  const Shape& ts = table.shape();
  const std::size_t width = row_size(ts);
  const std::size_t rows = ts[0];
  std::vector<int> saved(ids.begin(), ids.end());
  std::vector<T> out(saved.size() * width);
  auto tv = table.value();
  for (std::size_t i = 0; i < saved.size(); ++i) {
    if (saved[i] < 0 || static_cast<std::size_t>(saved[i]) >= rows) {
      throw IndexError("gather_rows: id " + std::to_string(saved[i]) + " outside [0, " +
                       std::to_string(rows) + ")");
    }
    std::copy_n(tv.data() + saved[i] * width, width, out.data() + i * width);
  }
  Shape shape = ts;
  shape[0] = saved.size();
  return table.graph().record(shape, std::move(out), {table},
                              [table, saved, width](Graph<T>& g, std::size_t self) {
                                auto d = g.grad_of(self);
                                auto gt = g.grad_buffer(table.id());
                                for (std::size_t i = 0; i < saved.size(); ++i) {
                                  T* dst = gt.data() + saved[i] * width;
                                  const T* src = d.data() + i * width;
                                  for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                                }
                              });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " cannot become " +
                         shape_string(shape));
  }
  std::vector<T> out(x.value().begin(), x.value().end());
  return x.graph().record(std::move(shape), std::move(out), {x}, [x](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i];
  });
}

template <typename T>
Var<T> blend_rows(Var<T> a, Var<T> b, std::span<const std::uint8_t> keep) {
  require_same(a.shape(), b.shape(), "blend_rows");
  const std::size_t rows = a.dim(0), width = row_size(a.shape());
  if (keep.size() != rows) {
    throw DimensionError("blend_rows: " + std::to_string(keep.size()) + " flags for " +
                         std::to_string(rows) + " rows");
  }
  std::vector<std::uint8_t> flags(keep.begin(), keep.end());
  std::vector<T> out(a.size());
  auto av = a.value(), bv = b.value();
  for (std::size_t i = 0; i < rows; ++i) {
    const T* src = (flags[i] ? av.data() : bv.data()) + i * width;
    std::copy_n(src, width, out.data() + i * width);
  }
  return a.graph().record(a.shape(), std::move(out), {a, b},
                          [a, b, flags, width](Graph<T>& g, std::size_t self) {
                            auto d = g.grad_of(self);
                            for (std::size_t i = 0; i < flags.size(); ++i) {
                              const Var<T>& target = flags[i] ? a : b;
                              if (!g.needs_grad(target.id())) continue;
                              auto gt = g.grad_buffer(target.id());
                              for (std::size_t j = 0; j < width; ++j)
                                gt[i * width + j] += d[i * width + j];
                            }
                          });
}

template <typename T>
Var<T> dropout(Var<T> x, double p, Rng* rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: probability must lie in [0, 1)");
  if (rng == nullptr || p == 0.0) return x;
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<T> factor(x.size());
  for (T& f : factor) f = keep(*rng) ? scale : T(0);
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor[i];
  return x.graph().record(x.shape(), std::move(out), {x}, [x, factor](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i] * factor[i];
  });
}

// ---------------------------------------------------------------------------
// Normalisations and losses

namespace {

template <typename T>
Var<T> softmax_impl(Var<T> x, const std::uint8_t* mask, const char* op) {
  require_matrix(x.shape(), op);
  const std::size_t m = x.dim(0), n = x.dim(1);
  auto xv = x.value();
  check_finite(xv, op);
  std::vector<T> out(xv.size(), T(0));
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    const std::uint8_t* mrow = mask ? mask + i * n : nullptr;
    T hi = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      hi = std::max(hi, row[j]);
      any = true;
    }
    if (!any) throw ContractError(std::string(op) + ": row " + std::to_string(i) + " is fully masked");
    double total = 0.0;
    T* orow = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      orow[j] = std::exp(row[j] - hi);
      total += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] = static_cast<T>(orow[j] / total);
  }
  return x.graph().record(x.shape(), std::move(out), {x}, [x, m, n](Graph<T>& g, std::size_t self) {
    auto d = g.grad_of(self);
    auto y = g.value_of(self);
    auto gx = g.grad_buffer(x.id());
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += d[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[i * n + j] += y[i * n + j] * (d[i * n + j] - static_cast<T>(dot));
    }
  });
}

}  // namespace

template <typename T>
Var<T> softmax_rows(Var<T> x) {
  return softmax_impl(x, nullptr, "softmax_rows");
}

template <typename T>
Var<T> masked_softmax_rows(Var<T> x, std::span<const std::uint8_t> mask) {
  if (mask.size() != x.size()) {
    throw DimensionError("masked_softmax_rows: mask of " + std::to_string(mask.size()) +
                         " entries for " + shape_string(x.shape()));
  }
  return softmax_impl(x, mask.data(), "masked_softmax_rows");
}

template <typename T>
void log_softmax_inplace(std::span<T> row) {
  T hi = -std::numeric_limits<T>::infinity();
  for (T v : row) hi = std::max(hi, v);
  double total = 0.0;
  for (T v : row) total += std::exp(static_cast<double>(v - hi));
  const T log_z = hi + static_cast<T>(std::log(total));
  for (T& v : row) v -= log_z;
}

template <typename T>
Var<T> cross_entropy_from_logits(Var<T> logits, std::span<const int> targets,
                                 std::span<const std::uint8_t> mask) {
  require_matrix(logits.shape(), "cross_entropy_from_logits");
  const std::size_t b = logits.dim(0), v = logits.dim(1);
  if (targets.size() != b || mask.size() != b) {
    throw DimensionError("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                         " targets and " + std::to_string(mask.size()) + " mask entries for " +
                         shape_string(logits.shape()));
  }
  auto lv = logits.value();
  std::vector<T> probs(lv.begin(), lv.end());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      throw IndexError("cross_entropy_from_logits: target " + std::to_string(targets[i]) +
                       " outside [0, " + std::to_string(v) + ")");
    }
    std::span<T> row(probs.data() + i * v, v);
    log_softmax_inplace(row);
    total -= row[targets[i]];
    for (T& p : row) p = std::exp(p);
    ++count;
  }
  if (count == 0) throw ContractError("cross_entropy_from_logits: every position is masked");
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> valid(mask.begin(), mask.end());
  const T inv = static_cast<T>(1.0 / static_cast<double>(count));
  return logits.graph().record(
      {1}, {static_cast<T>(total / static_cast<double>(count))}, {logits},
      [logits, probs = std::move(probs), tgt, valid, v, inv](Graph<T>& g, std::size_t self) {
        const T d = g.grad_of(self)[0] * inv;
        auto gl = g.grad_buffer(logits.id());
        for (std::size_t i = 0; i < valid.size(); ++i) {
          if (!valid[i]) continue;
          for (std::size_t j = 0; j < v; ++j) gl[i * v + j] += d * probs[i * v + j];
          gl[i * v + tgt[i]] -= d;
        }
      });
}

// ---------------------------------------------------------------------------
// Sequence helpers

template <typename T>
Var<T> stack_steps(std::span<const Var<T>> steps) {
  if (steps.empty()) throw ContractError("stack_steps: no steps");
  const Shape first = steps[0].shape();
  require_matrix(first, "stack_steps");
  const std::size_t b = first[0], d = first[1], t = steps.size();
  std::vector<T> out(b * t * d);
  for (std::size_t s = 0; s < t; ++s) {
    require_same(first, steps[s].shape(), "stack_steps");
    auto v = steps[s].value();
    for (std::size_t i = 0; i < b; ++i) std::copy_n(v.data() + i * d, d, out.data() + (i * t + s) * d);
  }
  std::vector<Var<T>> saved(steps.begin(), steps.end());
  return steps[0].graph().record({b, t, d}, std::move(out), steps,
                                 [saved, b, t, d](Graph<T>& g, std::size_t self) {
                                   auto grad = g.grad_of(self);
                                   for (std::size_t s = 0; s < t; ++s) {
                                     if (!g.needs_grad(saved[s].id())) continue;
                                     auto gs = g.grad_buffer(saved[s].id());
                                     for (std::size_t i = 0; i < b; ++i)
                                       for (std::size_t j = 0; j < d; ++j)
                                         gs[i * d + j] += grad[(i * t + s) * d + j];
                                   }
                                 });
}

template <typename T>
Var<T> batched_dot(Var<T> query, Var<T> keys) {
  require_matrix(query.shape(), "batched_dot");
  const Shape& ks = keys.shape();
  if (ks.size() != 3 || ks[0] != query.dim(0) || ks[2] != query.dim(1)) {
    throw DimensionError("batched_dot: query " + shape_string(query.shape()) + " vs keys " +
                         shape_string(ks));
  }
  const std::size_t b = ks[0], t = ks[1], d = ks[2];
  auto qv = query.value(), kv = keys.value();
  std::vector<T> out(b * t);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < t; ++s) {
      T acc = 0;
      const T* q = qv.data() + i * d;
      const T* k = kv.data() + (i * t + s) * d;
      for (std::size_t j = 0; j < d; ++j) acc += q[j] * k[j];
      out[i * t + s] = acc;
    }
  return query.graph().record({b, t}, std::move(out), {query, keys},
                              [query, keys, b, t, d](Graph<T>& g, std::size_t self) {
                                auto grad = g.grad_of(self);
                                auto qv = query.value(), kv = keys.value();
                                if (g.needs_grad(query.id())) {
                                  auto gq = g.grad_buffer(query.id());
                                  for (std::size_t i = 0; i < b; ++i)
                                    for (std::size_t s = 0; s < t; ++s) {
                                      const T w = grad[i * t + s];
                                      const T* k = kv.data() + (i * t + s) * d;
                                      for (std::size_t j = 0; j < d; ++j) gq[i * d + j] += w * k[j];
                                    }
                                }
                                if (g.needs_grad(keys.id())) {
                                  auto gk = g.grad_buffer(keys.id());
                                  for (std::size_t i = 0; i < b; ++i)
                                    for (std::size_t s = 0; s < t; ++s) {
                                      const T w = grad[i * t + s];
                                      const T* q = qv.data() + i * d;
                                      T* dst = gk.data() + (i * t + s) * d;
                                      for (std::size_t j = 0; j < d; ++j) dst[j] += w * q[j];
                                    }
                                }
                              });
}

template <typename T>
Var<T> weighted_sum(Var<T> weights, Var<T> values) {
  require_matrix(weights.shape(), "weighted_sum");
  const Shape& vs = values.shape();
  if (vs.size() != 3 || vs[0] != weights.dim(0) || vs[1] != weights.dim(1)) {
    throw DimensionError("weighted_sum: weights " + shape_string(weights.shape()) + " vs values " +
                         shape_string(vs));
  }
  const std::size_t b = vs[0], t = vs[1], d = vs[2];
  auto wv = weights.value(), vv = values.value();
  std::vector<T> out(b * d, T(0));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < t; ++s) {
      const T w = wv[i * t + s];
      const T* v = vv.data() + (i * t + s) * d;
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += w * v[j];
    }
  return weights.graph().record(
      {b, d}, std::move(out), {weights, values}, [weights, values, b, t, d](Graph<T>& g, std::size_t self) {
        auto grad = g.grad_of(self);
        auto wv = weights.value(), vv = values.value();
        if (g.needs_grad(weights.id())) {
          auto gw = g.grad_buffer(weights.id());
          for (std::size_t i = 0; i < b; ++i)
            for (std::size_t s = 0; s < t; ++s) {
              T acc = 0;
              const T* v = vv.data() + (i * t + s) * d;
              for (std::size_t j = 0; j < d; ++j) acc += grad[i * d + j] * v[j];
              gw[i * t + s] += acc;
            }
        }
        if (g.needs_grad(values.id())) {
          auto gv = g.grad_buffer(values.id());
          for (std::size_t i = 0; i < b; ++i)
            for (std::size_t s = 0; s < t; ++s) {
              const T w = wv[i * t + s];
              T* dst = gv.data() + (i * t + s) * d;
              for (std::size_t j = 0; j < d; ++j) dst[j] += w * grad[i * d + j];
            }
        }
      });
}

template <typename T>
Var<T> masked_mean_steps(Var<T> values, std::span<const std::uint8_t> mask) {
  const Shape& vs = values.shape();
  if (vs.size() != 3) throw DimensionError("masked_mean_steps: expected [b x t x d], got " + shape_string(vs));
  const std::size_t b = vs[0], t = vs[1], d = vs[2];
  if (mask.size() != b * t) {
    throw DimensionError("masked_mean_steps: mask of " + std::to_string(mask.size()) +
                         " entries for " + shape_string(vs));
  }
  std::vector<T> inv_count(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t c = 0;
    for (std::size_t s = 0; s < t; ++s) c += mask[i * t + s] ? 1 : 0;
    if (c == 0) throw ContractError("masked_mean_steps: row " + std::to_string(i) + " is empty");
    inv_count[i] = static_cast<T>(1.0 / static_cast<double>(c));
  }
  std::vector<std::uint8_t> flags(mask.begin(), mask.end());
  auto vv = values.value();
  std::vector<T> out(b * d, T(0));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      if (!flags[i * t + s]) continue;
      const T* v = vv.data() + (i * t + s) * d;
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += v[j];
    }
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] *= inv_count[i];
  }
  return values.graph().record(
      {b, d}, std::move(out), {values}, [values, flags, inv_count, b, t, d](Graph<T>& g, std::size_t self) {
        auto grad = g.grad_of(self);
        auto gv = g.grad_buffer(values.id());
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t s = 0; s < t; ++s) {
            if (!flags[i * t + s]) continue;
            T* dst = gv.data() + (i * t + s) * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += grad[i * d + j] * inv_count[i];
          }
      });
}

#define UNMT_INSTANTIATE(T)                                                                        \
  template Var<T> matmul(Var<T>, Var<T>);                                                          \
  template Var<T> add(Var<T>, Var<T>);                                                             \
  template Var<T> sub(Var<T>, Var<T>);                                                             \
  template Var<T> mul(Var<T>, Var<T>);                                                             \
  template Var<T> affine(Var<T>, T, T);                                                            \
  template Var<T> add_bias(Var<T>, Var<T>);                                                        \
  template Var<T> tanh(Var<T>);                                                                    \
  template Var<T> sigmoid(Var<T>);                                                                 \
  template Var<T> sum(Var<T>);                                                                     \
  template Var<T> concat_cols(std::span<const Var<T>>);                                            \
  template Var<T> concat_rows(std::span<const Var<T>>);                                            \
  template Var<T> gather_rows(Var<T>, std::span<const int>);                                       \
  template Var<T> reshape(Var<T>, Shape);                                                          \
  template Var<T> blend_rows(Var<T>, Var<T>, std::span<const std::uint8_t>);                       \
  template Var<T> dropout(Var<T>, double, Rng*);                                                   \
  template Var<T> softmax_rows(Var<T>);                                                            \
  template Var<T> masked_softmax_rows(Var<T>, std::span<const std::uint8_t>);                      \
  template Var<T> cross_entropy_from_logits(Var<T>, std::span<const int>,                          \
                                            std::span<const std::uint8_t>);                        \
  template Var<T> stack_steps(std::span<const Var<T>>);                                            \
  template Var<T> batched_dot(Var<T>, Var<T>);                                                     \
  template Var<T> weighted_sum(Var<T>, Var<T>);                                                    \
  template Var<T> masked_mean_steps(Var<T>, std::span<const std::uint8_t>);                        \
  template void log_softmax_inplace(std::span<T>);

UNMT_INSTANTIATE(float)
UNMT_INSTANTIATE(double)

#undef UNMT_INSTANTIATE

}  // namespace unmt
