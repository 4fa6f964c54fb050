#include "tdcrflow/numerics/graph.hpp"


#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "tdcrflow/common/error.hpp"
#include "tdcrflow/simd/kernels.hpp"

namespace tdcr::num {

const Tensor& Var::value() const {
  TDCR_REQUIRE(graph_ != nullptr, "use of an empty Var");
  return graph_->value(*this);
}

namespace {

// Graph tensors are large and short-lived. Keeping freed blocks on the heap
// instead of returning them to the OS avoids a page-fault storm per step.
void keep_heap_warm() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

}  // namespace

Graph::Graph(bool track_gradients) : tracking_(track_gradients) { keep_heap_warm(); }

Var Graph::add_node(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(Tensor t) {
  Node n;
  n.op = "constant";
  n.value = std::move(t);
  return add_node(std::move(n));
}

Var Graph::variable(Tensor t) {
  Node n;
  n.op = "variable";
  n.value = std::move(t);
  n.requires_grad = tracking_;
  return add_node(std::move(n));
}

Var Graph::parameter(Parameter& p, Weights which) {
  Node n;
  n.op = "parameter";
  if (which == Weights::live) {
    n.value = p.value;
    n.requires_grad = tracking_;
    n.param = tracking_ ? &p : nullptr;
  } else {
    n.value = p.ema;
  }
  return add_node(std::move(n));
}

Var Graph::parameter(const Parameter& p, Weights which) {
  TDCR_REQUIRE(which == Weights::ema || !tracking_,
               "live parameter " + p.name + " needs mutable access on a tracking graph");
  Node n;
  n.op = "parameter";
  n.value = which == Weights::live ? p.value : p.ema;
  return add_node(std::move(n));
}

Var Graph::push(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return push(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(fn));
}

Var Graph::push(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op + " (node #" +
                       std::to_string(nodes_.size()) + ")");
  Node n;
  n.op = op;
  n.value = std::move(value);
  if (tracking_) {
    for (const Var& in : inputs) {
      TDCR_REQUIRE(in.graph() == this, std::string(op) + ": input from another graph");
      if (nodes_[in.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return add_node(std::move(n));
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Graph::grad(Var v) { return grad_buffer(v); }

double Graph::backward(Var loss) {
  TDCR_REQUIRE(tracking_, "backward() on a graph built without gradient tracking");
  TDCR_REQUIRE(!consumed_, "backward() called twice on the same graph");
  TDCR_REQUIRE(loss.graph() == this, "loss belongs to another graph");
  const Node& ln = nodes_[loss.id()];
  TDCR_REQUIRE(ln.value.size() == 1, "loss must be a scalar, got shape " + ln.value.shape_string());
  consumed_ = true;
  const double loss_value = ln.value[0];
  if (!ln.requires_grad) return loss_value;

  grad_buffer(loss)[0] = 1.0;
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.has_grad) continue;
    if (!n.grad.all_finite())
      throw NumericError(std::string("non-finite gradient at ") + n.op + " (node #" +
                         std::to_string(i) + ")");
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param != nullptr) {
      TDCR_REQUIRE(n.param->grad.same_shape(n.grad), "parameter gradient shape drift");
      simd::kernels().axpy(n.grad.size(), 1.0, n.grad.data(), n.param->grad.data());
    }
  }
  return loss_value;
}

// ---- primitives --------------------------------------------------------

namespace {

void require_2d(const Var& v, const char* op) {
  TDCR_REQUIRE(v.value().rank() == 2, std::string(op) + ": expected a rank-2 tensor, got " +
                                          v.value().shape_string());
}

void require_same(const Var& a, const Var& b, const char* op) {
  TDCR_REQUIRE(a.value().same_shape(b.value()), std::string(op) + ": shape mismatch " +
                                                    a.value().shape_string() + " vs " +
                                                    b.value().shape_string());
}

Graph& graph_of(const Var& v) {
  TDCR_REQUIRE(v.valid(), "use of an empty Var");
  return *v.graph();
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  TDCR_REQUIRE(b.rows() == k, "matmul: inner dimensions differ " + a.value().shape_string() +
                                  " * " + b.value().shape_string());
  Tensor out = Tensor::matrix(n, m);
  simd::kernels().gemm_nn(n, m, k, a.value().data(), b.value().data(), out.data(), false);
  return graph_of(a).push("matmul", std::move(out), {a, b},
                          [a, b, n, k, m](Graph& g, const Tensor&, const Tensor& dy) {
                            const auto& kern = simd::kernels();
                            if (g.needs_grad(a))
                              kern.gemm_nt(n, k, m, dy.data(), g.value(b).data(),
                                           g.grad_buffer(a).data(), true);
                            if (g.needs_grad(b))
                              kern.gemm_tn(k, m, n, g.value(a).data(), dy.data(),
                                           g.grad_buffer(b).data(), true);
                          });
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return graph_of(a).push("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& dy) {
    for (Var v : {a, b})
      if (g.needs_grad(v)) simd::kernels().axpy(dy.size(), 1.0, dy.data(), g.grad_buffer(v).data());
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return graph_of(a).push("sub", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& dy) {
    if (g.needs_grad(a)) simd::kernels().axpy(dy.size(), 1.0, dy.data(), g.grad_buffer(a).data());
    if (g.needs_grad(b)) simd::kernels().axpy(dy.size(), -1.0, dy.data(), g.grad_buffer(b).data());
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return graph_of(a).push("mul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (g.needs_grad(a)) {
      Tensor& da = g.grad_buffer(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i];
    }
    if (g.needs_grad(b)) {
      Tensor& db = g.grad_buffer(b);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
    }
  });
}

Var add_row(Var a, Var bias) {
  require_2d(a, "add_row");
  const std::size_t n = a.rows(), m = a.cols();
  TDCR_REQUIRE(bias.value().size() == m, "add_row: bias width " +
                                             std::to_string(bias.value().size()) +
                                             " does not match " + std::to_string(m));
  Tensor out = a.value();
  const double* b = bias.value().data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out(r, c) += b[c];
  return graph_of(a).push("add_row", std::move(out), {a, bias},
                          [a, bias, n, m](Graph& g, const Tensor&, const Tensor& dy) {
                            if (g.needs_grad(a))
                              simd::kernels().axpy(dy.size(), 1.0, dy.data(), g.grad_buffer(a).data());
                            if (g.needs_grad(bias)) {
                              double* db = g.grad_buffer(bias).data();
                              for (std::size_t r = 0; r < n; ++r)
                                for (std::size_t c = 0; c < m; ++c) db[c] += dy(r, c);
                            }
                          });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return graph_of(a).push("scale", std::move(out), {a}, [a, s](Graph& g, const Tensor&, const Tensor& dy) {
    simd::kernels().axpy(dy.size(), s, dy.data(), g.grad_buffer(a).data());
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v += s;
  return graph_of(a).push("add_scalar", std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& dy) {
    simd::kernels().axpy(dy.size(), 1.0, dy.data(), g.grad_buffer(a).data());
  });
}

Var scale_rows(Var a, std::span<const double> s) {
  require_2d(a, "scale_rows");
  const std::size_t n = a.rows(), m = a.cols();
  TDCR_REQUIRE(s.size() == n, "scale_rows: need one factor per row");
  std::vector<double> factors(s.begin(), s.end());
  Tensor out = a.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out(r, c) *= factors[r];
  return graph_of(a).push("scale_rows", std::move(out), {a},
                          [a, n, m, factors = std::move(factors)](Graph& g, const Tensor&, const Tensor& dy) {
                            Tensor& da = g.grad_buffer(a);
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t c = 0; c < m; ++c) da(r, c) += factors[r] * dy(r, c);
                          });
}

Var layer_norm(Var a, double eps) {
  require_2d(a, "layer_norm");
  TDCR_REQUIRE(eps > 0.0, "layer_norm: eps must be positive");
  const std::size_t n = a.rows(), m = a.cols();
  const Tensor& x = a.value();
  Tensor out = Tensor::matrix(n, m);
  std::vector<double> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < m; ++c) mu += x(r, c);
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t c = 0; c < m; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(m);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < m; ++c) out(r, c) = (x(r, c) - mu) * inv_std[r];
  }
  return graph_of(a).push(
      "layer_norm", std::move(out), {a},
      [a, n, m, inv_std = std::move(inv_std)](Graph& g, const Tensor& y, const Tensor& dy) {
        Tensor& da = g.grad_buffer(a);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t r = 0; r < n; ++r) {
          double mean_dy = 0.0, mean_dyy = 0.0;
          for (std::size_t c = 0; c < m; ++c) {
            mean_dy += dy(r, c);
            mean_dyy += dy(r, c) * y(r, c);
          }
          mean_dy *= inv_m;
          mean_dyy *= inv_m;
          for (std::size_t c = 0; c < m; ++c)
            da(r, c) += inv_std[r] * (dy(r, c) - mean_dy - y(r, c) * mean_dyy);
        }
      });
}

Var sigmoid(Var a) {
  Tensor out(a.value().shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
  return graph_of(a).push("sigmoid", std::move(out), {a}, [a](Graph& g, const Tensor& y, const Tensor& dy) {
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var silu(Var a) {
  Tensor out(a.value().shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * stable_sigmoid(x[i]);
  return graph_of(a).push("silu", std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& x = g.value(a);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double s = stable_sigmoid(x[i]);
      da[i] += dy[i] * (s + x[i] * s * (1.0 - s));
    }
  });
}

Var relu(Var a) {
  Tensor out(a.value().shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return graph_of(a).push("relu", std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& x = g.value(a);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (x[i] > 0.0) da[i] += dy[i];
  });
}

Var square(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= v;
  return graph_of(a).push("square", std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& x = g.value(a);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += 2.0 * x[i] * dy[i];
  });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
  return graph_of(a).push("sum", Tensor::scalar(s), {a}, [a](Graph& g, const Tensor&, const Tensor& dy) {
    Tensor& da = g.grad_buffer(a);
    for (double& v : da.values()) v += dy[0];
  });
}

Var mean(Var a) {
  const Tensor& x = a.value();
  TDCR_REQUIRE(!x.empty(), "mean of an empty tensor");
  const double inv = 1.0 / static_cast<double>(x.size());
  const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0) * inv;
  return graph_of(a).push("mean", Tensor::scalar(s), {a}, [a, inv](Graph& g, const Tensor&, const Tensor& dy) {
    Tensor& da = g.grad_buffer(a);
    for (double& v : da.values()) v += dy[0] * inv;
  });
}

Var concat_cols(std::span<const Var> parts) {
  TDCR_REQUIRE(!parts.empty(), "concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_2d(p, "concat_cols");
    TDCR_REQUIRE(p.rows() == n, "concat_cols: row counts differ");
    offsets.push_back(total);
    total += p.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) out(r, offsets[k] + c) = v(r, c);
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return graph_of(parts[0]).push(
      "concat_cols", std::move(out), parts,
      [ins, offsets, n](Graph& g, const Tensor&, const Tensor& dy) {
        for (std::size_t k = 0; k < ins.size(); ++k) {
          if (!g.needs_grad(ins[k])) continue;
          Tensor& d = g.grad_buffer(ins[k]);
          const std::size_t w = d.cols();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < w; ++c) d(r, c) += dy(r, offsets[k] + c);
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_cols");
  TDCR_REQUIRE(begin < end && end <= a.cols(), "slice_cols: bad column range");
  const std::size_t n = a.rows(), w = end - begin;
  Tensor out = Tensor::matrix(n, w);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = a.value()(r, begin + c);
  return graph_of(a).push("slice_cols", std::move(out), {a},
                          [a, begin, n, w](Graph& g, const Tensor&, const Tensor& dy) {
                            Tensor& da = g.grad_buffer(a);
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t c = 0; c < w; ++c) da(r, begin + c) += dy(r, c);
                          });
}

Var gather_rows(Var a, std::span<const std::int32_t> index) {
  require_2d(a, "gather_rows");
  const std::size_t m = a.cols(), src_rows = a.rows();
  std::vector<std::int32_t> idx(index.begin(), index.end());
  Tensor out = Tensor::matrix(idx.size(), m);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    TDCR_REQUIRE(idx[r] >= 0 && static_cast<std::size_t>(idx[r]) < src_rows,
                 "gather_rows: index out of range");
    const auto src = a.value().row(static_cast<std::size_t>(idx[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return graph_of(a).push("gather_rows", std::move(out), {a},
                          [a, m, idx = std::move(idx)](Graph& g, const Tensor&, const Tensor& dy) {
                            Tensor& da = g.grad_buffer(a);
                            for (std::size_t r = 0; r < idx.size(); ++r)
                              simd::kernels().axpy(m, 1.0, dy.data() + r * m,
                                                   da.data() + static_cast<std::size_t>(idx[r]) * m);
                          });
}

Var scatter_mean(Var a, std::span<const std::int32_t> bin, std::size_t bins,
                 std::span<const std::uint32_t> order) {
  require_2d(a, "scatter_mean");
  const std::size_t n = a.rows(), m = a.cols();
  TDCR_REQUIRE(bin.size() == n, "scatter_mean: need one bin per row");
  TDCR_REQUIRE(order.empty() || order.size() == n, "scatter_mean: order must cover every row");
  std::vector<std::int32_t> bins_of(bin.begin(), bin.end());
  std::vector<double> count(bins, 0.0);
  Tensor out = Tensor::matrix(bins, m);
  const Tensor& x = a.value();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order.empty() ? k : order[k];
    TDCR_REQUIRE(i < n, "scatter_mean: order entry out of range");
    const std::int32_t b = bins_of[i];
    TDCR_REQUIRE(b >= 0 && static_cast<std::size_t>(b) < bins, "scatter_mean: bin out of range");
    count[static_cast<std::size_t>(b)] += 1.0;
    double* dst = out.data() + static_cast<std::size_t>(b) * m;
    const double* src = x.data() + i * m;
    for (std::size_t c = 0; c < m; ++c) dst[c] += src[c];
  }
  for (std::size_t b = 0; b < bins; ++b)
    if (count[b] > 0.0)
      for (std::size_t c = 0; c < m; ++c) out(b, c) /= count[b];
  return graph_of(a).push(
      "scatter_mean", std::move(out), {a},
      [a, m, bins_of = std::move(bins_of), count = std::move(count)](Graph& g, const Tensor&,
                                                                       const Tensor& dy) {
        Tensor& da = g.grad_buffer(a);
        for (std::size_t i = 0; i < bins_of.size(); ++i) {
          const auto b = static_cast<std::size_t>(bins_of[i]);
          simd::kernels().axpy(m, 1.0 / count[b], dy.data() + b * m, da.data() + i * m);
        }
      });
}

Var weighted_gather(Var a, std::span<const std::int32_t> index, std::span<const double> weight,
                    std::size_t per_row) {
  require_2d(a, "weighted_gather");
  TDCR_REQUIRE(per_row > 0 && index.size() % per_row == 0 && weight.size() == index.size(),
               "weighted_gather: index/weight layout mismatch");
  const std::size_t m = a.cols(), n = index.size() / per_row, src_rows = a.rows();
  std::vector<std::int32_t> idx(index.begin(), index.end());
  std::vector<double> w(weight.begin(), weight.end());
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < per_row; ++j) {
      const std::int32_t s = idx[r * per_row + j];
      if (s < 0) continue;
      TDCR_REQUIRE(static_cast<std::size_t>(s) < src_rows, "weighted_gather: index out of range");
      simd::kernels().axpy(m, w[r * per_row + j], a.value().data() + static_cast<std::size_t>(s) * m,
                           out.data() + r * m);
    }
  return graph_of(a).push(
      "weighted_gather", std::move(out), {a},
      [a, m, n, per_row, idx = std::move(idx), w = std::move(w)](Graph& g, const Tensor&, const Tensor& dy) {
        Tensor& da = g.grad_buffer(a);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < per_row; ++j) {
            const std::int32_t s = idx[r * per_row + j];
            if (s < 0) continue;
            simd::kernels().axpy(m, w[r * per_row + j], dy.data() + r * m,
                                 da.data() + static_cast<std::size_t>(s) * m);
          }
      });
}

}  // namespace tdcr::num
