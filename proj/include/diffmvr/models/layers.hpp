#pragma once

#include <cmath>
#include <string>

#include "diffmvr/numerics/adam.hpp"
#include "diffmvr/numerics/ops.hpp"
#include "diffmvr/numerics/rng.hpp"

namespace diffmvr {

template <class T>
BasicTensor<T> init_normal(Rng& rng, const Shape& shape, double stddev) {
  BasicTensor<T> t = rng.normal_tensor<T>(shape, stddev);
  t.set_requires_grad(true);
  return t;
}

template <class T>
BasicTensor<T> init_constant(const Shape& shape, T value) {
  return BasicTensor<T>::full(shape, value, true);
}

template <class T>
struct Conv2dLayer {
  BasicTensor<T> weight;  // [out x in x k x k]
  BasicTensor<T> bias;    // [out]
  std::size_t stride = 1;
  std::size_t pad = 1;

  static Conv2dLayer make(Rng& rng, std::size_t in, std::size_t out, std::size_t k = 3,
                          std::size_t stride = 1, double gain = 1.0) {
    Conv2dLayer layer;
    layer.weight = init_normal<T>(rng, Shape{out, in, k, k}, gain / std::sqrt(static_cast<double>(in * k * k)));
    layer.bias = init_constant<T>(Shape{out}, T{0});
    layer.stride = stride;
    layer.pad = k / 2;
    return layer;
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x) const {
    // Reflect padding needs pad < extent; a 1x1 map falls back to zeros.
    const PadMode mode = (pad < x.dim(1) && pad < x.dim(2)) ? PadMode::kReflect : PadMode::kZero;
    return add_bias(conv2d(x, weight, stride, pad, mode), bias, 0);
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <class T>
struct LinearLayer {
  BasicTensor<T> weight;  // [in x out]
  BasicTensor<T> bias;    // [out]

  static LinearLayer make(Rng& rng, std::size_t in, std::size_t out, double gain = 1.0) {
    LinearLayer layer;
    layer.weight = init_normal<T>(rng, Shape{in, out}, gain / std::sqrt(static_cast<double>(in)));
    layer.bias = init_constant<T>(Shape{out}, T{0});
    return layer;
  }

  /// x: [n x in] -> [n x out]
  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return linear(x, weight, bias); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <class T>
struct GroupNormLayer {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  std::size_t groups = 4;

  static GroupNormLayer make(std::size_t channels, std::size_t groups) {
    return {init_constant<T>(Shape{channels}, T{1}), init_constant<T>(Shape{channels}, T{0}), groups};
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return group_norm(x, groups, gamma, beta); }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
  }
};

}  // namespace diffmvr
