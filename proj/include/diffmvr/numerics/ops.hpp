#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "diffmvr/numerics/tensor.hpp"

// Differentiable tensor operations. Every op returns a fresh tensor and, when
// recording, installs a closure that pushes the output gradient into the
// parents that require it.

namespace diffmvr {

namespace detail {

template <class T>
T* grad_ptr(TensorNode<T>& node) {
  if (!node.requires_grad) return nullptr;
  node.ensure_grad();
  return node.grad.data();
}

template <class T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// C[MxN] += A[MxK] * B[KxN]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[MxN] += A^T * B where A is stored KxM.
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      if (av == T{0}) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[MxN] += A * B^T where B is stored NxK.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, n, k, a, bt.data(), c);
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return BasicTensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](auto& self) {
    for (auto& parent : self.parents) {
      if (T* g = detail::grad_ptr(*parent)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return BasicTensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (T* g = detail::grad_ptr(*self.parents[1])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return BasicTensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](auto& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (T* g = detail::grad_ptr(pa)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (T* g = detail::grad_ptr(pb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return BasicTensor<T>::make_result(a.shape(), std::move(out), {a}, [factor](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

template <class T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + offset;
  return BasicTensor<T>::make_result(a.shape(), std::move(out), {a}, [](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

/// Adds a vector along `axis`, broadcasting over every other axis.
template <class T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis);
  if (bias.numel() != s.extent) {
    throw DimensionError("add_bias: bias of " + shape_str(bias.shape()) + " vs axis extent " +
                         std::to_string(s.extent));
  }
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const std::size_t base = (o * s.extent + e) * s.inner;
      const T b = bias[e];
      for (std::size_t i = 0; i < s.inner; ++i) out[base + i] = x[base + i] + b;
    }
  }
  return BasicTensor<T>::make_result(x.shape(), std::move(out), {x, bias}, [s](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (T* g = detail::grad_ptr(*self.parents[1])) {
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t base = (o * s.extent + e) * s.inner;
          T acc{0};
          for (std::size_t i = 0; i < s.inner; ++i) acc += self.grad[base + i];
          g[e] += acc;
        }
      }
    }
  });
}

namespace detail {

template <class T, class F, class DF>
BasicTensor<T> unary(const BasicTensor<T>& a, F f, DF df_from_xy) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
  return BasicTensor<T>::make_result(a.shape(), std::move(out), {a}, [df_from_xy](auto& self) {
    auto& pa = *self.parents[0];
    if (T* g = grad_ptr(pa)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[i] += self.grad[i] * df_from_xy(pa.data[i], self.data[i]);
      }
    }
  });
}

}  // namespace detail

template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& a) {
  return detail::unary(
      a, [](T x) { return T{1} / (T{1} + std::exp(-x)); },
      [](T, T y) { return y * (T{1} - y); });
}

/// x * sigmoid(x)
template <class T>
BasicTensor<T> silu(const BasicTensor<T>& a) {
  return detail::unary(
      a, [](T x) { return x / (T{1} + std::exp(-x)); },
      [](T x, T) {
        const T s = T{1} / (T{1} + std::exp(-x));
        return s * (T{1} + x * (T{1} - s));
      });
}

template <class T>
BasicTensor<T> exp(const BasicTensor<T>& a) {
  return detail::unary(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
BasicTensor<T> tanh(const BasicTensor<T>& a) {
  return detail::unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

template <class T>
BasicTensor<T> square(const BasicTensor<T>& a) {
  return detail::unary(
      a, [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

// ---------------------------------------------------------------------------
// Reductions (accumulated in double)

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a[i]);
  return BasicTensor<T>::make_result(Shape{}, {static_cast<T>(acc)}, {a}, [](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      const T up = self.grad[0];
      for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) g[i] += up;
    }
  });
}

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
  return scale(sum(a), T{1} / static_cast<T>(a.numel()));
}

/// Squared Euclidean norm of all entries.
template <class T>
BasicTensor<T> sum_squares(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a[i]) * a[i];
  return BasicTensor<T>::make_result(Shape{}, {static_cast<T>(acc)}, {a}, [](auto& self) {
    auto& pa = *self.parents[0];
    if (T* g = detail::grad_ptr(pa)) {
      const T up = T{2} * self.grad[0];
      for (std::size_t i = 0; i < pa.data.size(); ++i) g[i] += up * pa.data[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return BasicTensor<T>::make_result(std::move(shape), std::move(out), {a}, [](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects a matrix, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  }
  return BasicTensor<T>::make_result(Shape{c, r}, std::move(out), {a}, [r, c](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

/// Concatenates along the leading axis; trailing extents must agree.
template <class T>
BasicTensor<T> concat0(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat0 of an empty list");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t lead = 0;
  std::vector<T> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rank() != tail.size() + 1 || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
      throw DimensionError("concat0: incompatible " + shape_str(p.shape()));
    }
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    lead += p.dim(0);
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return BasicTensor<T>::make_result(std::move(shape), std::move(out), parts,
                                     [offsets](auto& self) {
                                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                         auto& p = *self.parents[k];
                                         if (T* g = detail::grad_ptr(p)) {
                                           for (std::size_t i = 0; i < p.data.size(); ++i) {
                                             g[i] += self.grad[offsets[k] + i];
                                           }
                                         }
                                       }
                                     });
}

/// Rows [begin, end) of the leading axis.
template <class T>
BasicTensor<T> slice0(const BasicTensor<T>& a, std::size_t begin, std::size_t end) {
  if (a.rank() == 0 || begin >= end || end > a.dim(0)) {
    throw DimensionError("slice0: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") on " + shape_str(a.shape()));
  }
  const std::size_t row = a.numel() / a.dim(0);
  Shape shape = a.shape();
  shape[0] = end - begin;
  std::vector<T> out(a.data().begin() + begin * row, a.data().begin() + end * row);
  const std::size_t offset = begin * row;
  return BasicTensor<T>::make_result(std::move(shape), std::move(out), {a}, [offset](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T{0});
  detail::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
  return BasicTensor<T>::make_result(Shape{m, n}, std::move(out), {a, b}, [m, k, n](auto& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (T* g = detail::grad_ptr(pa)) detail::gemm_nt(m, k, n, self.grad.data(), pb.data.data(), g);
    if (T* g = detail::grad_ptr(pb)) detail::gemm_tn(k, n, m, pa.data.data(), self.grad.data(), g);
  });
}

/// x[n x in] * w[in x out] + b[out]
template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  return add_bias(matmul(x, w), b, 1);
}

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis);
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      T mx = x[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, x[base + e * s.inner]);
      T total{0};
      for (std::size_t e = 0; e < s.extent; ++e) {
        const T v = std::exp(x[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  return BasicTensor<T>::make_result(x.shape(), std::move(out), {x}, [s](auto& self) {
    if (T* g = detail::grad_ptr(*self.parents[0])) {
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          T dot{0};
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t idx = base + e * s.inner;
            dot += self.grad[idx] * self.data[idx];
          }
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t idx = base + e * s.inner;
            g[idx] += self.data[idx] * (self.grad[idx] - dot);
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Image ops on [C x H x W]

enum class PadMode { kReflect, kZero };

namespace detail {

inline long reflect_index(long i, long n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// Maps every im2col slot to a flat input index, or -1 for zero padding.
inline std::vector<std::int32_t> im2col_index(std::size_t c, std::size_t h, std::size_t w,
                                              std::size_t k, std::size_t stride, std::size_t pad,
                                              PadMode mode, std::size_t oh, std::size_t ow) {
  std::vector<std::int32_t> idx(c * k * k * oh * ow);
  std::size_t slot = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
          long y = static_cast<long>(oy * stride + ki) - static_cast<long>(pad);
          bool y_out = y < 0 || y >= static_cast<long>(h);
          if (y_out && mode == PadMode::kReflect) {
            y = reflect_index(y, static_cast<long>(h));
            y_out = false;
          }
          for (std::size_t ox = 0; ox < ow; ++ox) {
            long x = static_cast<long>(ox * stride + kj) - static_cast<long>(pad);
            bool x_out = x < 0 || x >= static_cast<long>(w);
            if (x_out && mode == PadMode::kReflect) {
              x = reflect_index(x, static_cast<long>(w));
              x_out = false;
            }
            idx[slot++] = (y_out || x_out)
                              ? -1
                              : static_cast<std::int32_t>((ch * h + static_cast<std::size_t>(y)) * w +
                                                          static_cast<std::size_t>(x));
          }
        }
      }
    }
  }
  return idx;
}

}  // namespace detail

/// 2-D cross-correlation (the kernel is not flipped).
///
/// x: [C_in x H x W], kernel: [C_out x C_in x k x k], odd k.
/// Output extent: (H + 2*pad - k) / stride + 1. Reflect padding mirrors
/// without repeating the edge sample and needs pad < H, W.
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel, std::size_t stride = 1,
                      std::size_t pad = 0, PadMode mode = PadMode::kReflect) {
  if (x.rank() != 3 || kernel.rank() != 4 || kernel.dim(1) != x.dim(0) ||
      kernel.dim(2) != kernel.dim(3)) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " kernel " +
                         shape_str(kernel.shape()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t o = kernel.dim(0), k = kernel.dim(2);
  if (k % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  if (mode == PadMode::kReflect && pad > 0 && (pad >= h || pad >= w)) {
    throw DimensionError("conv2d: reflect pad " + std::to_string(pad) + " too large for " +
                         shape_str(x.shape()));
  }
  if (h + 2 * pad < k || w + 2 * pad < k) {
    throw DimensionError("conv2d: zero-size output for " + shape_str(x.shape()));
  }
  const std::size_t oh = (h + 2 * pad - k) / stride + 1;
  const std::size_t ow = (w + 2 * pad - k) / stride + 1;
  const std::size_t rows = c * k * k, cols_n = oh * ow;

  auto index = std::make_shared<std::vector<std::int32_t>>(
      detail::im2col_index(c, h, w, k, stride, pad, mode, oh, ow));
  auto cols = std::make_shared<std::vector<T>>(rows * cols_n);
  for (std::size_t i = 0; i < cols->size(); ++i) {
    const auto src = (*index)[i];
    (*cols)[i] = src < 0 ? T{0} : x[static_cast<std::size_t>(src)];
  }
  std::vector<T> out(o * cols_n, T{0});
  detail::gemm_nn(o, cols_n, rows, kernel.data().data(), cols->data(), out.data());

  return BasicTensor<T>::make_result(
      Shape{o, oh, ow}, std::move(out), {x, kernel}, [index, cols, o, rows, cols_n](auto& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        if (T* g = detail::grad_ptr(pk)) {
          detail::gemm_nt(o, rows, cols_n, self.grad.data(), cols->data(), g);
        }
        if (T* g = detail::grad_ptr(px)) {
          std::vector<T> dcols(rows * cols_n, T{0});
          detail::gemm_tn(rows, cols_n, o, pk.data.data(), self.grad.data(), dcols.data());
          for (std::size_t i = 0; i < dcols.size(); ++i) {
            const auto dst = (*index)[i];
            if (dst >= 0) g[static_cast<std::size_t>(dst)] += dcols[i];
          }
        }
      });
}

/// Nearest-neighbour 2x upsampling of [C x H x W].
template <class T>
BasicTensor<T> upsample2x(const BasicTensor<T>& x) {
  if (x.rank() != 3) throw DimensionError("upsample2x expects [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<T> out(c * 4 * h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) {
        out[(ch * 2 * h + y) * 2 * w + xx] = x[(ch * h + y / 2) * w + xx / 2];
      }
    }
  }
  return BasicTensor<T>::make_result(Shape{c, 2 * h, 2 * w}, std::move(out), {x},
                                     [c, h, w](auto& self) {
                                       if (T* g = detail::grad_ptr(*self.parents[0])) {
                                         for (std::size_t ch = 0; ch < c; ++ch) {
                                           for (std::size_t y = 0; y < 2 * h; ++y) {
                                             for (std::size_t xx = 0; xx < 2 * w; ++xx) {
                                               g[(ch * h + y / 2) * w + xx / 2] +=
                                                   self.grad[(ch * 2 * h + y) * 2 * w + xx];
                                             }
                                           }
                                         }
                                       }
                                     });
}

/// Non-overlapping average pooling by an integer factor.
template <class T>
BasicTensor<T> avg_pool(const BasicTensor<T>& x, std::size_t factor) {
  if (x.rank() != 3 || factor == 0 || x.dim(1) % factor || x.dim(2) % factor) {
    throw DimensionError("avg_pool: " + shape_str(x.shape()) + " by " + std::to_string(factor));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h / factor, ow = w / factor;
  const T inv = T{1} / static_cast<T>(factor * factor);
  std::vector<T> out(c * oh * ow, T{0});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        out[(ch * oh + y / factor) * ow + xx / factor] += x[(ch * h + y) * w + xx] * inv;
      }
    }
  }
  return BasicTensor<T>::make_result(
      Shape{c, oh, ow}, std::move(out), {x}, [c, h, w, oh, ow, factor, inv](auto& self) {
        if (T* g = detail::grad_ptr(*self.parents[0])) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t y = 0; y < h; ++y) {
              for (std::size_t xx = 0; xx < w; ++xx) {
                g[(ch * h + y) * w + xx] += self.grad[(ch * oh + y / factor) * ow + xx / factor] * inv;
              }
            }
          }
        }
      });
}

/// Group normalization over [C x ...]: statistics per group of C/G channels,
/// followed by a per-channel affine map.
template <class T>
BasicTensor<T> group_norm(const BasicTensor<T>& x, std::size_t groups, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, T eps = T(1e-5)) {
  if (x.rank() < 2) throw DimensionError("group_norm expects [C, ...]");
  const std::size_t c = x.dim(0);
  if (groups == 0 || c % groups || gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("group_norm: channels " + std::to_string(c) + " groups " +
                         std::to_string(groups));
  }
  const std::size_t spatial = x.numel() / c;
  const std::size_t per_group = c / groups;
  const std::size_t n = per_group * spatial;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(groups);
  std::vector<T> out(x.numel());
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * n;
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[base + i];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[base + i] - m;
      v += d * d;
    }
    v /= static_cast<double>(n);
    const T is = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
    (*inv_std)[g] = is;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = base + i;
      const std::size_t ch = idx / spatial;
      (*xhat)[idx] = static_cast<T>((x[idx] - m) * is);
      out[idx] = (*xhat)[idx] * gamma[ch] + beta[ch];
    }
  }
  return BasicTensor<T>::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xhat, inv_std, groups, spatial, n, c](auto& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* dy = self.grad.data();
        if (T* g = detail::grad_ptr(pg)) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            T acc{0};
            for (std::size_t i = 0; i < spatial; ++i) acc += dy[ch * spatial + i] * (*xhat)[ch * spatial + i];
            g[ch] += acc;
          }
        }
        if (T* g = detail::grad_ptr(pb)) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            T acc{0};
            for (std::size_t i = 0; i < spatial; ++i) acc += dy[ch * spatial + i];
            g[ch] += acc;
          }
        }
        if (T* g = detail::grad_ptr(px)) {
          const T nn = static_cast<T>(n);
          for (std::size_t grp = 0; grp < groups; ++grp) {
            const std::size_t base = grp * n;
            T sum_d{0}, sum_dx{0};
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t idx = base + i;
              const T d = dy[idx] * pg.data[idx / spatial];
              sum_d += d;
              sum_dx += d * (*xhat)[idx];
            }
            const T is = (*inv_std)[grp];
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t idx = base + i;
              const T d = dy[idx] * pg.data[idx / spatial];
              g[idx] += is / nn * (nn * d - sum_d - (*xhat)[idx] * sum_dx);
            }
          }
        }
      });
}

}  // namespace diffmvr
