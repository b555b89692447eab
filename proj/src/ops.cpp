#include "segvit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "segvit/errors.hpp"

namespace segvit {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

using detail::make_result;
using detail::Node;

int64_t normalize_axis(int64_t axis, int64_t rank, const char* op) {
  const int64_t a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return a;
}

// outer x n x inner view of a shape around one axis.
struct AxisView {
  int64_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& s, int64_t axis) {
  AxisView v;
  for (int64_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

Shape leading(const Shape& s) { return Shape(s.begin(), s.end() - 2); }

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(sa) + " and " +
                         shape_str(sb));
  }
  const int64_t m = sa[sa.size() - 2], k = sa.back();
  const int64_t k2 = sb[sb.size() - 2], p = sb.back();
  const Shape la = leading(sa), lb = leading(sb);
  if (k != k2 || !(la == lb || la.empty() || lb.empty())) {
    throw DimensionError("matmul shape mismatch: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const Shape batch_shape = la.empty() ? lb : la;
  const int64_t batch = shape_numel(batch_shape);
  const int64_t stride_a = la.empty() ? 0 : m * k;
  const int64_t stride_b = lb.empty() ? 0 : k * p;

  Shape out_shape = batch_shape;
  out_shape.push_back(m);
  out_shape.push_back(p);
  Buffer<T> out(static_cast<size_t>(batch * m * p));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (int64_t i = 0; i < batch; ++i) {
    MapM<T>(out.data() + i * m * p, m, p).noalias() =
        CMapM<T>(pa + i * stride_a, m, k) * CMapM<T>(pb + i * stride_b, k, p);
  }
  return make_result<T>("matmul", std::move(out_shape), std::move(out), {a, b},
                        [=](Node<T>& o) {
                          auto& na = *o.inputs[0];
                          auto& nb = *o.inputs[1];
                          const T* g = o.grad.data();
                          for (int64_t i = 0; i < batch; ++i) {
                            CMapM<T> gi(g + i * m * p, m, p);
                            if (na.requires_grad) {
                              MapM<T>(na.grad_data() + i * stride_a, m, k).noalias() +=
                                  gi * CMapM<T>(nb.value.data() + i * stride_b, k, p).transpose();
                            }
                            if (nb.requires_grad) {
                              MapM<T>(nb.grad_data() + i * stride_b, k, p).noalias() +=
                                  CMapM<T>(na.value.data() + i * stride_a, m, k).transpose() * gi;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_str(s));
  const int64_t r = s[s.size() - 2], c = s.back();
  const int64_t batch = shape_numel(leading(s));
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Buffer<T> out(x.data().size());
  const T* px = x.data().data();
  for (int64_t i = 0; i < batch; ++i) {
    MapM<T>(out.data() + i * r * c, c, r) = CMapM<T>(px + i * r * c, r, c).transpose();
  }
  return make_result<T>("transpose", std::move(out_shape), std::move(out), {x},
                        [=](Node<T>& o) {
                          auto& nx = *o.inputs[0];
                          for (int64_t i = 0; i < batch; ++i) {
                            MapM<T>(nx.grad_data() + i * r * c, r, c) +=
                                CMapM<T>(o.grad.data() + i * r * c, c, r).transpose();
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.begin(), sb.end(), sa.end() - sb.size())) {
    throw DimensionError("add: cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
  }
  const int64_t n = a.numel();
  const int64_t nb = std::max<int64_t>(b.numel(), 1);
  Buffer<T> out(a.data().begin(), a.data().end());
  const T* pb = b.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] += pb[i % nb];
  return make_result<T>("add", sa, std::move(out), {a, b}, [=](Node<T>& o) {
    auto& na = *o.inputs[0];
    auto& nbn = *o.inputs[1];
    const T* g = o.grad.data();
    if (na.requires_grad) {
      T* ga = na.grad_data();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (nbn.requires_grad) {
      T* gb = nbn.grad_data();
      for (int64_t i = 0; i < n; ++i) gb[i % nb] += g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const int64_t n = a.numel();
  Buffer<T> out(static_cast<size_t>(n));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [=](Node<T>& o) {
    auto& na = *o.inputs[0];
    auto& nb = *o.inputs[1];
    const T* g = o.grad.data();
    if (na.requires_grad) {
      T* ga = na.grad_data();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      T* gb = nb.grad_data();
      for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * na.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Buffer<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v *= factor;
  return make_result<T>("scale", x.shape(), std::move(out), {x}, [=](Node<T>& o) {
    auto& nx = *o.inputs[0];
    T* gx = nx.grad_data();
    for (size_t i = 0; i < o.grad.size(); ++i) gx[i] += factor * o.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>("sum", {}, {total}, {x}, [](Node<T>& o) {
    auto& nx = *o.inputs[0];
    T* gx = nx.grad_data();
    const T g = o.grad[0];
    for (size_t i = 0; i < nx.value.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, int64_t axis) {
  const Shape& s = x.shape();
  const int64_t ax = normalize_axis(axis, x.rank(), "sum_axis");
  const AxisView v = axis_view(s, ax);
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + ax);
  Buffer<T> out(static_cast<size_t>(v.outer * v.inner), T(0));
  const T* px = x.data().data();
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t j = 0; j < v.n; ++j)
      for (int64_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += px[(o * v.n + j) * v.inner + i];
  return make_result<T>("sum_axis", std::move(out_shape), std::move(out), {x},
                        [=](Node<T>& node) {
                          T* gx = node.inputs[0]->grad_data();
                          const T* g = node.grad.data();
                          for (int64_t o = 0; o < v.outer; ++o)
                            for (int64_t j = 0; j < v.n; ++j)
                              for (int64_t i = 0; i < v.inner; ++i)
                                gx[(o * v.n + j) * v.inner + i] += g[o * v.inner + i];
                        });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int64_t axis) {
  const Shape& s = x.shape();
  const int64_t ax = normalize_axis(axis, x.rank(), "softmax");
  const AxisView v = axis_view(s, ax);
  Buffer<T> out(x.data().size());
  const T* px = x.data().data();
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      const int64_t base = o * v.n * v.inner + i;
      T mx = px[base];
      for (int64_t j = 1; j < v.n; ++j) mx = std::max(mx, px[base + j * v.inner]);
      T total = 0;
      for (int64_t j = 0; j < v.n; ++j) {
        const T e = std::exp(px[base + j * v.inner] - mx);
        out[base + j * v.inner] = e;
        total += e;
      }
      const T inv = T(1) / total;
      for (int64_t j = 0; j < v.n; ++j) out[base + j * v.inner] *= inv;
    }
  }
  return make_result<T>("softmax", s, std::move(out), {x}, [=](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    const T* g = node.grad.data();
    const T* y = node.value.data();
    for (int64_t o = 0; o < v.outer; ++o) {
      for (int64_t i = 0; i < v.inner; ++i) {
        const int64_t base = o * v.n * v.inner + i;
        T dot = 0;
        for (int64_t j = 0; j < v.n; ++j) dot += g[base + j * v.inner] * y[base + j * v.inner];
        for (int64_t j = 0; j < v.n; ++j) {
          const int64_t k = base + j * v.inner;
          gx[k] += y[k] * (g[k] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Buffer<T> out(x.data().size());
  const T* px = x.data().data();
  for (size_t i = 0; i < out.size(); ++i) {
    const T z = px[i];
    if (z >= 0) {
      out[i] = T(1) / (T(1) + std::exp(-z));
    } else {
      const T e = std::exp(z);
      out[i] = e / (T(1) + e);
    }
  }
  return make_result<T>("sigmoid", x.shape(), std::move(out), {x}, [](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    for (size_t i = 0; i < node.value.size(); ++i) {
      const T y = node.value[i];
      gx[i] += node.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  Buffer<T> out(x.data().size());
  const T* px = x.data().data();
  for (size_t i = 0; i < out.size(); ++i) {
    const T z = px[i];
    out[i] = T(0.5) * z * (T(1) + std::tanh(kC * (z + kA * z * z * z)));
  }
  return make_result<T>("gelu", x.shape(), std::move(out), {x}, [](Node<T>& node) {
    auto& nx = *node.inputs[0];
    T* gx = nx.grad_data();
    for (size_t i = 0; i < node.value.size(); ++i) {
      const T z = nx.value[i];
      const T t = std::tanh(kC * (z + kA * z * z * z));
      const T d = T(0.5) * (T(1) + t) +
                  T(0.5) * z * (T(1) - t * t) * kC * (T(1) + T(3) * kA * z * z);
      gx[i] += node.grad[i] * d;
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const int64_t c = x.dim(-1);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw DimensionError("layer_norm: affine shapes " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match width " + std::to_string(c));
  }
  const int64_t rows = x.numel() / c;
  Buffer<T> out(x.data().size());
  auto xhat = std::make_shared<std::vector<T>>(x.data().size());
  auto rstd = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
  const T* px = x.data().data();
  const T* pg = gamma.data().data();
  const T* pb = beta.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = px + r * c;
    T mu = 0;
    for (int64_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<T>(c);
    T var = 0;
    for (int64_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(c);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (int64_t j = 0; j < c; ++j) {
      const T h = (row[j] - mu) * rs;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = h * pg[j] + pb[j];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta}, [=](Node<T>& node) {
        auto& nx = *node.inputs[0];
        auto& ng = *node.inputs[1];
        auto& nb = *node.inputs[2];
        const T* g = node.grad.data();
        const T* h = xhat->data();
        if (ng.requires_grad || nb.requires_grad) {
          T* gg = ng.requires_grad ? ng.grad_data() : nullptr;
          T* gb = nb.requires_grad ? nb.grad_data() : nullptr;
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < c; ++j) {
              if (gg) gg[j] += g[r * c + j] * h[r * c + j];
              if (gb) gb[j] += g[r * c + j];
            }
        }
        if (nx.requires_grad) {
          T* gx = nx.grad_data();
          const T* gam = ng.value.data();
          for (int64_t r = 0; r < rows; ++r) {
            T m1 = 0, m2 = 0;
            for (int64_t j = 0; j < c; ++j) {
              const T dh = g[r * c + j] * gam[j];
              m1 += dh;
              m2 += dh * h[r * c + j];
            }
            m1 /= static_cast<T>(c);
            m2 /= static_cast<T>(c);
            for (int64_t j = 0; j < c; ++j) {
              const T dh = g[r * c + j] * gam[j];
              gx[r * c + j] += (*rstd)[r] * (dh - m1 - h[r * c + j] * m2);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const int64_t in = x.dim(-1);
  if (w.rank() != 2 || w.dim(0) != in || b.shape() != Shape{w.dim(1)}) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " weight " +
                         shape_str(w.shape()) + " bias " + shape_str(b.shape()));
  }
  const int64_t out_f = w.dim(1);
  const int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  Buffer<T> out(static_cast<size_t>(rows * out_f));
  MapM<T> y(out.data(), rows, out_f);
  y.noalias() = CMapM<T>(x.data().data(), rows, in) * CMapM<T>(w.data().data(), in, out_f);
  y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.data().data(), out_f);
  return make_result<T>("linear", std::move(out_shape), std::move(out), {x, w, b},
                        [=](Node<T>& node) {
                          auto& nx = *node.inputs[0];
                          auto& nw = *node.inputs[1];
                          auto& nb = *node.inputs[2];
                          CMapM<T> g(node.grad.data(), rows, out_f);
                          if (nx.requires_grad) {
                            MapM<T>(nx.grad_data(), rows, in).noalias() +=
                                g * CMapM<T>(nw.value.data(), in, out_f).transpose();
                          }
                          if (nw.requires_grad) {
                            MapM<T>(nw.grad_data(), in, out_f).noalias() +=
                                CMapM<T>(nx.value.data(), rows, in).transpose() * g;
                          }
                          if (nb.requires_grad) {
                            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(nb.grad_data(),
                                                                            out_f) +=
                                g.colwise().sum();
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Buffer<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {x}, [](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    for (size_t i = 0; i < node.grad.size(); ++i) gx[i] += node.grad[i];
  });
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, int64_t heads) {
  if (x.rank() != 2 || heads <= 0 || x.dim(1) % heads != 0) {
    throw DimensionError("split_heads: width of " + shape_str(x.shape()) +
                         " is not divisible into " + std::to_string(heads) + " heads");
  }
  const int64_t l = x.dim(0), d = x.dim(1) / heads;
  Buffer<T> out(x.data().size());
  const T* px = x.data().data();
  for (int64_t h = 0; h < heads; ++h)
    for (int64_t i = 0; i < l; ++i)
      std::copy_n(px + i * heads * d + h * d, d, out.data() + (h * l + i) * d);
  return make_result<T>("split_heads", {heads, l, d}, std::move(out), {x}, [=](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    const T* g = node.grad.data();
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t i = 0; i < l; ++i)
        for (int64_t j = 0; j < d; ++j) gx[i * heads * d + h * d + j] += g[(h * l + i) * d + j];
  });
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x) {
  if (x.rank() != 3) throw DimensionError("merge_heads needs [H, L, d], got " + shape_str(x.shape()));
  const int64_t heads = x.dim(0), l = x.dim(1), d = x.dim(2);
  Buffer<T> out(x.data().size());
  const T* px = x.data().data();
  for (int64_t h = 0; h < heads; ++h)
    for (int64_t i = 0; i < l; ++i)
      std::copy_n(px + (h * l + i) * d, d, out.data() + i * heads * d + h * d);
  return make_result<T>("merge_heads", {l, heads * d}, std::move(out), {x}, [=](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    const T* g = node.grad.data();
    for (int64_t h = 0; h < heads; ++h)
      for (int64_t i = 0; i < l; ++i)
        for (int64_t j = 0; j < d; ++j) gx[(h * l + i) * d + j] += g[i * heads * d + h * d + j];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int64_t>& rows) {
  if (x.rank() != 2) throw DimensionError("gather_rows needs [L, C], got " + shape_str(x.shape()));
  const int64_t l = x.dim(0), c = x.dim(1);
  for (int64_t r : rows) {
    if (r < 0 || r >= l) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  const int64_t n = static_cast<int64_t>(rows.size());
  Buffer<T> out(static_cast<size_t>(n * c));
  const T* px = x.data().data();
  for (int64_t i = 0; i < n; ++i) std::copy_n(px + rows[i] * c, c, out.data() + i * c);
  return make_result<T>("gather_rows", {n, c}, std::move(out), {x}, [=](Node<T>& node) {
    T* gx = node.inputs[0]->grad_data();
    const T* g = node.grad.data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < c; ++j) gx[rows[i] * c + j] += g[i * c + j];
  });
}

std::vector<double> bilinear_weights(int64_t in, int64_t out) {
  if (in <= 0 || out <= 0) throw DimensionError("bilinear_weights: empty extent");
  std::vector<double> w(static_cast<size_t>(out * in), 0.0);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    const double src = std::max((static_cast<double>(o) + 0.5) * ratio - 0.5, 0.0);
    const int64_t i0 = std::min(static_cast<int64_t>(src), in - 1);
    const int64_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    w[o * in + i0] += 1.0 - frac;
    w[o * in + i1] += frac;
  }
  return w;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  if (x.rank() != 3) throw DimensionError("resize_bilinear needs [N, h, w], got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto wy64 = bilinear_weights(h, out_h);
  const auto wx64 = bilinear_weights(w, out_w);
  auto ry = std::make_shared<Mat<T>>(CMapM<double>(wy64.data(), out_h, h).template cast<T>());
  auto rx = std::make_shared<Mat<T>>(CMapM<double>(wx64.data(), out_w, w).template cast<T>());
  Buffer<T> out(static_cast<size_t>(n * out_h * out_w));
  const T* px = x.data().data();
  Mat<T> tmp;
  for (int64_t i = 0; i < n; ++i) {
    tmp.noalias() = (*ry) * CMapM<T>(px + i * h * w, h, w);
    MapM<T>(out.data() + i * out_h * out_w, out_h, out_w).noalias() = tmp * rx->transpose();
  }
  return make_result<T>("resize_bilinear", {n, out_h, out_w}, std::move(out), {x},
                        [=](Node<T>& node) {
                          T* gx = node.inputs[0]->grad_data();
                          Mat<T> t;
                          for (int64_t i = 0; i < n; ++i) {
                            t.noalias() = ry->transpose() *
                                          CMapM<T>(node.grad.data() + i * out_h * out_w, out_h, out_w);
                            MapM<T>(gx + i * h * w, h, w).noalias() += t * (*rx);
                          }
                        });
}

#define SEGVIT_INSTANTIATE_OPS(T)                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> transpose(const Tensor<T>&);                                       \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> scale(const Tensor<T>&, T);                                        \
  template Tensor<T> sum(const Tensor<T>&);                                             \
  template Tensor<T> mean(const Tensor<T>&);                                            \
  template Tensor<T> sum_axis(const Tensor<T>&, int64_t);                               \
  template Tensor<T> softmax(const Tensor<T>&, int64_t);                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                         \
  template Tensor<T> gelu(const Tensor<T>&);                                            \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                  \
  template Tensor<T> split_heads(const Tensor<T>&, int64_t);                            \
  template Tensor<T> merge_heads(const Tensor<T>&);                                     \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<int64_t>&);        \
  template Tensor<T> resize_bilinear(const Tensor<T>&, int64_t, int64_t);

SEGVIT_INSTANTIATE_OPS(float)
SEGVIT_INSTANTIATE_OPS(double)

}  // namespace segvit
