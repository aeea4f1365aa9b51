#pragma once

// Dense rank-<=4 tensors (activations laid out N x C x H x W) with
// reverse-mode differentiation over exactly the operation set the models
// need. Ops link result nodes to their operands; backward() walks that
// graph once in reverse topological order and accumulates gradients
// additively. Everything is single-threaded and uses one accumulation-order
// convention (row-major, ascending index), so a given seed reproduces runs
// bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "btnet/gemm.hpp"
#include "btnet/rng.hpp"

namespace btnet {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s[i]);
    if (i + 1 < s.size()) out += ",";
  }
  return out + ")";
}

template <typename T>
struct AutoNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until touched by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<AutoNode<T>>> parents;
  std::function<void(AutoNode<T>&)> backward_fn;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

// Scoped switch that disables graph recording (inference / frozen-model paths).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(enabled()) { enabled() = false; }
  ~NoGradGuard() { enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  static bool& enabled() {
    thread_local bool on = true;
    return on;
  }

 private:
  bool prev_;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.node_ = std::make_shared<AutoNode<T>>();
    t.node_->value.assign(shape_numel(shape), T(0));
    t.node_->shape = std::move(shape);
    return t;
  }

  static Tensor full(Shape shape, T v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<T> data) {
    if (shape_numel(shape) != data.size())
      throw std::invalid_argument("data length does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<AutoNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v) { return from_data({1}, {v}); }

  static Tensor randn(Shape shape, Rng& rng, T stddev = T(1)) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.node_->value) v = static_cast<T>(rng.normal() * static_cast<double>(stddev));
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t numel() const { return node_->value.size(); }

  const std::vector<T>& values() const { return node_->value; }
  // Mutable access is for leaf state (parameter updates); results of recorded
  // ops must not be edited in place.
  std::vector<T>& mutable_values() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    if (b && !node_->parents.empty())
      throw std::invalid_argument("requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (node_->grad.empty()) throw std::runtime_error("tensor has no gradient");
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("item() requires a scalar tensor");
    return node_->value[0];
  }

  // Copies the current value into a fresh leaf outside the recorded graph.
  Tensor detach() const {
    Tensor t;
    t.node_ = std::make_shared<AutoNode<T>>();
    t.node_->shape = node_->shape;
    t.node_->value = node_->value;
    return t;
  }

  Tensor clone_leaf() const { return detach(); }

  bool all_finite() const {
    for (const T& v : node_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::shared_ptr<AutoNode<T>>& node() { return node_; }
  const std::shared_ptr<AutoNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<AutoNode<T>> node_;
};

namespace detail {

template <typename T>
inline Tensor<T> make_result(Shape shape, std::vector<T> value,
                             std::vector<std::shared_ptr<AutoNode<T>>> parents,
                             std::function<void(AutoNode<T>&)> backward_fn) {
  Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(value));
  bool track = NoGradGuard::enabled();
  bool any = false;
  if (track)
    for (const auto& p : parents)
      if (p && p->requires_grad) any = true;
  if (track && any) {
    out.node()->requires_grad = true;
    out.node()->parents = std::move(parents);
    out.node()->backward_fn = std::move(backward_fn);
  }
  return out;
}

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
  if (!t.all_finite()) throw std::runtime_error(std::string(op) + " produced a non-finite value");
}

}  // namespace detail

// Populates gradients of every requires_grad tensor reachable from `loss`.
// Each node is visited exactly once; repeated calls without zeroing
// accumulate.
template <typename T>
inline void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) throw std::invalid_argument("backward expects a scalar loss");
  AutoNode<T>* root = loss.node().get();
  if (!root->requires_grad) throw std::invalid_argument("loss does not require grad");

  // reverse topological order by iterative post-order DFS
  std::vector<AutoNode<T>*> order;
  std::unordered_set<AutoNode<T>*> visited;
  struct Frame {
    AutoNode<T>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      AutoNode<T>* p = f.node->parents[f.next_parent++].get();
      if (p && p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  auto& seed = root->grad_buffer();
  seed[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    AutoNode<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise and structural ops

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto pa = a.node();
  auto pb = b.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {pa, pb}, [pa, pb](AutoNode<T>& n) {
        if (pa->requires_grad) {
          auto& g = pa->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        if (pb->requires_grad) {
          auto& g = pb->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
      });
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  auto pa = a.node();
  return detail::make_result<T>(a.shape(), std::move(out), {pa}, [pa, c](AutoNode<T>& n) {
    auto& g = pa->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * n.grad[i];
  });
}

template <typename T>
inline Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  auto pa = a.node();
  return detail::make_result<T>(a.shape(), std::move(out), {pa}, [pa](AutoNode<T>& n) {
    auto& g = pa->grad_buffer();
    const auto& xv = pa->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > T(0)) g[i] += n.grad[i];
  });
}

template <typename T>
inline Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, av[i]));
  auto pa = a.node();
  return detail::make_result<T>(a.shape(), std::move(out), {pa}, [pa, lo, hi](AutoNode<T>& n) {
    auto& g = pa->grad_buffer();
    const auto& xv = pa->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > lo && xv[i] < hi) g[i] += n.grad[i];
  });
}

template <typename T>
inline Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (const T& v : a.values()) acc += v;
  auto pa = a.node();
  return detail::make_result<T>({1}, {acc}, {pa}, [pa](AutoNode<T>& n) {
    auto& g = pa->grad_buffer();
    const T gy = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy;
  });
}

template <typename T>
inline Tensor<T> flatten(const Tensor<T>& a) {
  if (a.rank() < 2) throw std::invalid_argument("flatten expects rank >= 2");
  int n = a.dim(0);
  int rest = static_cast<int>(a.numel()) / n;
  auto pa = a.node();
  return detail::make_result<T>({n, rest}, a.values(), {pa}, [pa](AutoNode<T>& n_) {
    auto& g = pa->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n_.grad[i];
  });
}

// mean of squared differences over every element
template <typename T>
inline Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("mse: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const T d = av[i] - bv[i];
    acc += d * d;
  }
  const T inv = T(1) / static_cast<T>(av.size());
  auto pa = a.node();
  auto pb = b.node();
  Tensor<T> out = detail::make_result<T>({1}, {acc * inv}, {pa, pb}, [pa, pb, inv](AutoNode<T>& n) {
    const T gy = n.grad[0];
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy * T(2) * inv * (pa->value[i] - pb->value[i]);
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gy * T(2) * inv * (pa->value[i] - pb->value[i]);
    }
  });
  detail::check_finite(out, "mse");
  return out;
}

// L2 normalization: whole vector for rank 1, per leading-dim row otherwise.
template <typename T>
inline Tensor<T> l2_normalize(const Tensor<T>& a) {
  const int rows = a.rank() == 1 ? 1 : a.dim(0);
  const int cols = static_cast<int>(a.numel()) / rows;
  const auto& av = a.values();
  std::vector<T> out(a.numel());
  std::vector<T> inv_norm(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const T* x = av.data() + static_cast<long>(r) * cols;
    T ss = 0;
    for (int j = 0; j < cols; ++j) ss += x[j] * x[j];
    const T norm = std::sqrt(ss);
    if (!(norm > T(1e-12)))
      throw std::invalid_argument("l2_normalize: input norm is zero");
    inv_norm[static_cast<std::size_t>(r)] = T(1) / norm;
    T* y = out.data() + static_cast<long>(r) * cols;
    for (int j = 0; j < cols; ++j) y[j] = x[j] * inv_norm[static_cast<std::size_t>(r)];
  }
  auto pa = a.node();
  return detail::make_result<T>(
      a.shape(), std::move(out), {pa}, [pa, rows, cols, inv_norm](AutoNode<T>& n) {
        auto& g = pa->grad_buffer();
        for (int r = 0; r < rows; ++r) {
          const T* x = pa->value.data() + static_cast<long>(r) * cols;
          const T* gy = n.grad.data() + static_cast<long>(r) * cols;
          const T* y = n.value.data() + static_cast<long>(r) * cols;
          const T s = inv_norm[static_cast<std::size_t>(r)];
          T dot = 0;
          for (int j = 0; j < cols; ++j) dot += gy[j] * y[j];
          T* gx = g.data() + static_cast<long>(r) * cols;
          for (int j = 0; j < cols; ++j) gx[j] += s * (gy[j] - dot * y[j]);
          (void)x;
        }
      });
}

// y = x W^T + b, with x (N x in), W (out x in), b (out) optional
template <typename T>
inline Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b = nullptr) {
  if (x.rank() != 2 || w.rank() != 2)
    throw std::invalid_argument("linear expects rank-2 input and weight");
  const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in)
    throw std::invalid_argument("linear: weight shape " + shape_str(w.shape()) +
                                " incompatible with input " + shape_str(x.shape()));
  if (b && (b->rank() != 1 || b->dim(0) != out))
    throw std::invalid_argument("linear: bias shape mismatch");
  std::vector<T> y(static_cast<std::size_t>(n) * out, T(0));
  gemm_nt_acc(n, out, in, x.values().data(), w.values().data(), y.data());
  if (b)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out; ++j) y[static_cast<std::size_t>(i) * out + j] += b->values()[static_cast<std::size_t>(j)];
  auto px = x.node();
  auto pw = w.node();
  auto pb = b ? b->node() : nullptr;
  std::vector<std::shared_ptr<AutoNode<T>>> parents{px, pw};
  if (pb) parents.push_back(pb);
  return detail::make_result<T>(
      {n, out}, std::move(y), std::move(parents), [px, pw, pb, n, in, out](AutoNode<T>& nd) {
        const T* gy = nd.grad.data();
        if (px->requires_grad)
          gemm_nn_acc(n, in, out, gy, pw->value.data(), px->grad_buffer().data());
        if (pw->requires_grad)
          gemm_tn_acc(out, in, n, gy, px->value.data(), pw->grad_buffer().data());
        if (pb && pb->requires_grad) {
          auto& gb = pb->grad_buffer();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < out; ++j) gb[static_cast<std::size_t>(j)] += gy[static_cast<std::size_t>(i) * out + j];
        }
      });
}

// global average pool: (N,C,H,W) -> (N,C)
template <typename T>
inline Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool expects rank-4 input");
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const T inv = T(1) / static_cast<T>(hw);
  std::vector<T> y(static_cast<std::size_t>(n) * c);
  const auto& xv = x.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* p = xv.data() + (static_cast<long>(i) * c + j) * hw;
      T acc = 0;
      for (int k = 0; k < hw; ++k) acc += p[k];
      y[static_cast<std::size_t>(i) * c + j] = acc * inv;
    }
  auto px = x.node();
  return detail::make_result<T>({n, c}, std::move(y), {px}, [px, n, c, hw, inv](AutoNode<T>& nd) {
    auto& g = px->grad_buffer();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) {
        const T gy = nd.grad[static_cast<std::size_t>(i) * c + j] * inv;
        T* p = g.data() + (static_cast<long>(i) * c + j) * hw;
        for (int k = 0; k < hw; ++k) p[k] += gy;
      }
  });
}

// ---------------------------------------------------------------------------
// conv2d

namespace detail {

// col layout: (Cin*K*K) x (Hout*Wout)
template <typename T>
inline void im2col(const T* x, int cin, int h, int w, int k, int stride, int pad,
                   int hout, int wout, T* col) {
  for (int c = 0; c < cin; ++c)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        T* row = col + (static_cast<long>(c) * k * k + ki * k + kj) * hout * wout;
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy * stride - pad + ki;
          for (int ox = 0; ox < wout; ++ox) {
            const int ix = ox * stride - pad + kj;
            row[oy * wout + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x[(static_cast<long>(c) * h + iy) * w + ix] : T(0);
          }
        }
      }
}

template <typename T>
inline void col2im_acc(const T* col, int cin, int h, int w, int k, int stride, int pad,
                       int hout, int wout, T* x) {
  for (int c = 0; c < cin; ++c)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        const T* row = col + (static_cast<long>(c) * k * k + ki * k + kj) * hout * wout;
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wout; ++ox) {
            const int ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) x[(static_cast<long>(c) * h + iy) * w + ix] += row[oy * wout + ox];
          }
        }
      }
}

}  // namespace detail

template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                        int stride, int padding) {
  if (x.rank() != 4 || w.rank() != 4)
    throw std::invalid_argument("conv2d expects rank-4 input and weight");
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
  if (padding < 0) throw std::invalid_argument("conv2d: negative padding");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin)
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.dim(1)) +
                                " input channels, got " + std::to_string(cin));
  if (w.dim(3) != k) throw std::invalid_argument("conv2d: kernel must be square");
  if (b && (b->rank() != 1 || b->dim(0) != cout))
    throw std::invalid_argument("conv2d: bias shape mismatch");
  const int hout = (h + 2 * padding - k) / stride + 1;
  const int wout = (wd + 2 * padding - k) / stride + 1;
  if (h + 2 * padding < k || wd + 2 * padding < k || hout <= 0 || wout <= 0)
    throw std::invalid_argument("conv2d: non-positive output size");

  const int ckk = cin * k * k;
  const int owh = hout * wout;
  std::vector<T> y(static_cast<std::size_t>(n) * cout * owh, T(0));
  std::vector<T> col(static_cast<std::size_t>(ckk) * owh);
  const auto& xv = x.values();
  for (int i = 0; i < n; ++i) {
    detail::im2col(xv.data() + static_cast<long>(i) * cin * h * wd, cin, h, wd, k, stride, padding,
                   hout, wout, col.data());
    gemm_nn_acc(cout, owh, ckk, w.values().data(), col.data(),
                y.data() + static_cast<long>(i) * cout * owh);
  }
  if (b) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < cout; ++c) {
        T* p = y.data() + (static_cast<long>(i) * cout + c) * owh;
        const T bias = b->values()[static_cast<std::size_t>(c)];
        for (int j = 0; j < owh; ++j) p[j] += bias;
      }
  }

  auto px = x.node();
  auto pw = w.node();
  auto pb = b ? b->node() : nullptr;
  std::vector<std::shared_ptr<AutoNode<T>>> parents{px, pw};
  if (pb) parents.push_back(pb);
  return detail::make_result<T>(
      {n, cout, hout, wout}, std::move(y), std::move(parents),
      [px, pw, pb, n, cin, h, wd, cout, k, stride, padding, hout, wout](AutoNode<T>& nd) {
        const int ckk = cin * k * k;
        const int owh = hout * wout;
        std::vector<T> col(static_cast<std::size_t>(ckk) * owh);
        std::vector<T> dcol(static_cast<std::size_t>(ckk) * owh);
        for (int i = 0; i < n; ++i) {
          const T* gy = nd.grad.data() + static_cast<long>(i) * cout * owh;
          if (pw->requires_grad) {
            detail::im2col(px->value.data() + static_cast<long>(i) * cin * h * wd, cin, h, wd, k,
                           stride, padding, hout, wout, col.data());
            gemm_nt_acc(cout, ckk, owh, gy, col.data(), pw->grad_buffer().data());
          }
          if (px->requires_grad) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            gemm_tn_acc(ckk, owh, cout, pw->value.data(), gy, dcol.data());
            detail::col2im_acc(dcol.data(), cin, h, wd, k, stride, padding, hout, wout,
                               px->grad_buffer().data() + static_cast<long>(i) * cin * h * wd);
          }
        }
        if (pb && pb->requires_grad) {
          auto& gb = pb->grad_buffer();
          for (int i = 0; i < n; ++i)
            for (int c = 0; c < cout; ++c) {
              const T* gy = nd.grad.data() + (static_cast<long>(i) * cout + c) * owh;
              T acc = 0;
              for (int j = 0; j < owh; ++j) acc += gy[j];
              gb[static_cast<std::size_t>(c)] += acc;
            }
        }
      });
}

template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                        int stride, int padding) {
  return conv2d(x, w, &b, stride, padding);
}

template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int padding) {
  return conv2d(x, w, static_cast<const Tensor<T>*>(nullptr), stride, padding);
}

// ---------------------------------------------------------------------------
// batch normalization with an external parameter bank

template <typename T>
struct BNParams {
  int channels = 0;
  int resolution = 0;  // owner tag; 0 = untagged
  Tensor<T> gamma, beta;
  std::vector<T> running_mean, running_var;

  static BNParams init(int channels, int resolution = 0) {
    BNParams p;
    p.channels = channels;
    p.resolution = resolution;
    p.gamma = Tensor<T>::full({channels}, T(1));
    p.beta = Tensor<T>::zeros({channels});
    p.running_mean.assign(static_cast<std::size_t>(channels), T(0));
    p.running_var.assign(static_cast<std::size_t>(channels), T(1));
    return p;
  }

  BNParams clone() const {
    BNParams p;
    p.channels = channels;
    p.resolution = resolution;
    p.gamma = gamma.detach();
    p.beta = beta.detach();
    p.gamma.set_requires_grad(gamma.requires_grad());
    p.beta.set_requires_grad(beta.requires_grad());
    p.running_mean = running_mean;
    p.running_var = running_var;
    return p;
  }
};

enum class BNMode { train, infer };

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;  // running = m*running + (1-m)*batch

// Train mode normalizes by batch statistics (biased variance), applies the
// affine transform and updates the bank's running stats in place; infer mode
// uses the stored running statistics.
template <typename T>
inline Tensor<T> batchnorm(const Tensor<T>& x, BNParams<T>& bank, BNMode mode) {
  if (x.rank() != 4 && x.rank() != 2)
    throw std::invalid_argument("batchnorm expects rank-2 or rank-4 input");
  const int n = x.dim(0);
  const int c = x.dim(1);
  const int hw = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (c != bank.channels)
    throw std::invalid_argument("batchnorm: bank has " + std::to_string(bank.channels) +
                                " channels, input has " + std::to_string(c));
  const long per_channel = static_cast<long>(n) * hw;
  if (mode == BNMode::train && n < 2)
    throw std::invalid_argument("batchnorm: train mode requires batch size >= 2");

  std::vector<T> mean(static_cast<std::size_t>(c)), invstd(static_cast<std::size_t>(c));
  const auto& xv = x.values();
  if (mode == BNMode::train) {
    for (int j = 0; j < c; ++j) {
      T m = 0;
      for (int i = 0; i < n; ++i) {
        const T* p = xv.data() + (static_cast<long>(i) * c + j) * hw;
        for (int k = 0; k < hw; ++k) m += p[k];
      }
      m /= static_cast<T>(per_channel);
      T v = 0;
      for (int i = 0; i < n; ++i) {
        const T* p = xv.data() + (static_cast<long>(i) * c + j) * hw;
        for (int k = 0; k < hw; ++k) {
          const T d = p[k] - m;
          v += d * d;
        }
      }
      v /= static_cast<T>(per_channel);
      mean[static_cast<std::size_t>(j)] = m;
      invstd[static_cast<std::size_t>(j)] = T(1) / std::sqrt(v + static_cast<T>(kBnEps));
      bank.running_mean[static_cast<std::size_t>(j)] =
          static_cast<T>(kBnMomentum) * bank.running_mean[static_cast<std::size_t>(j)] +
          static_cast<T>(1.0 - kBnMomentum) * m;
      bank.running_var[static_cast<std::size_t>(j)] =
          static_cast<T>(kBnMomentum) * bank.running_var[static_cast<std::size_t>(j)] +
          static_cast<T>(1.0 - kBnMomentum) * v;
    }
  } else {
    for (int j = 0; j < c; ++j) {
      mean[static_cast<std::size_t>(j)] = bank.running_mean[static_cast<std::size_t>(j)];
      invstd[static_cast<std::size_t>(j)] =
          T(1) / std::sqrt(bank.running_var[static_cast<std::size_t>(j)] + static_cast<T>(kBnEps));
    }
  }

  std::vector<T> y(x.numel());
  const auto& gv = bank.gamma.values();
  const auto& bv = bank.beta.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* p = xv.data() + (static_cast<long>(i) * c + j) * hw;
      T* q = y.data() + (static_cast<long>(i) * c + j) * hw;
      const T m = mean[static_cast<std::size_t>(j)];
      const T s = invstd[static_cast<std::size_t>(j)];
      const T g = gv[static_cast<std::size_t>(j)];
      const T bb = bv[static_cast<std::size_t>(j)];
      for (int k = 0; k < hw; ++k) q[k] = (p[k] - m) * s * g + bb;
    }

  auto px = x.node();
  auto pg = bank.gamma.node();
  auto pbta = bank.beta.node();
  const bool train = mode == BNMode::train;
  Tensor<T> out = detail::make_result<T>(
      x.shape(), std::move(y), {px, pg, pbta},
      [px, pg, pbta, n, c, hw, mean, invstd, train](AutoNode<T>& nd) {
        const long per_channel = static_cast<long>(n) * hw;
        for (int j = 0; j < c; ++j) {
          const T m = mean[static_cast<std::size_t>(j)];
          const T s = invstd[static_cast<std::size_t>(j)];
          const T g = pg->value[static_cast<std::size_t>(j)];
          T sum_gy = 0, sum_gy_xhat = 0;
          for (int i = 0; i < n; ++i) {
            const T* gy = nd.grad.data() + (static_cast<long>(i) * c + j) * hw;
            const T* xp = px->value.data() + (static_cast<long>(i) * c + j) * hw;
            for (int k = 0; k < hw; ++k) {
              sum_gy += gy[k];
              sum_gy_xhat += gy[k] * (xp[k] - m) * s;
            }
          }
          if (pg->requires_grad) pg->grad_buffer()[static_cast<std::size_t>(j)] += sum_gy_xhat;
          if (pbta->requires_grad) pbta->grad_buffer()[static_cast<std::size_t>(j)] += sum_gy;
          if (px->requires_grad) {
            auto& gx = px->grad_buffer();
            const T mean_gy = sum_gy / static_cast<T>(per_channel);
            const T mean_gy_xhat = sum_gy_xhat / static_cast<T>(per_channel);
            for (int i = 0; i < n; ++i) {
              const T* gy = nd.grad.data() + (static_cast<long>(i) * c + j) * hw;
              const T* xp = px->value.data() + (static_cast<long>(i) * c + j) * hw;
              T* gq = gx.data() + (static_cast<long>(i) * c + j) * hw;
              if (train) {
                for (int k = 0; k < hw; ++k) {
                  const T xhat = (xp[k] - m) * s;
                  gq[k] += g * s * (gy[k] - mean_gy - xhat * mean_gy_xhat);
                }
              } else {
                for (int k = 0; k < hw; ++k) gq[k] += g * s * gy[k];
              }
            }
          }
        }
      });
  detail::check_finite(out, "batchnorm");
  return out;
}

// ---------------------------------------------------------------------------
// softmax cross entropy

template <typename T>
inline Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_cross_entropy expects rank-2 logits");
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: one label per row required");
  for (int lab : labels)
    if (lab < 0 || lab >= k) throw std::invalid_argument("softmax_cross_entropy: label out of range");
  const auto& lv = logits.values();
  std::vector<T> softmax(static_cast<std::size_t>(n) * k);
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    const T* row = lv.data() + static_cast<long>(i) * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T denom = 0;
    for (int j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    const T lse = mx + std::log(denom);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
    T* sm = softmax.data() + static_cast<long>(i) * k;
    for (int j = 0; j < k; ++j) sm[j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<T>(n);
  auto pl = logits.node();
  Tensor<T> out = detail::make_result<T>(
      {1}, {loss}, {pl}, [pl, n, k, labels, softmax](AutoNode<T>& nd) {
        const T gy = nd.grad[0] / static_cast<T>(n);
        auto& g = pl->grad_buffer();
        for (int i = 0; i < n; ++i) {
          const T* sm = softmax.data() + static_cast<long>(i) * k;
          T* gr = g.data() + static_cast<long>(i) * k;
          for (int j = 0; j < k; ++j) gr[j] += gy * sm[j];
          gr[labels[static_cast<std::size_t>(i)]] -= gy;
        }
      });
  detail::check_finite(out, "softmax_cross_entropy");
  return out;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace btnet
