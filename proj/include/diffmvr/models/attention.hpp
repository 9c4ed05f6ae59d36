#pragma once

#include <cmath>
#include <optional>

#include "diffmvr/models/guidance_encoder.hpp"
#include "diffmvr/models/layers.hpp"

namespace diffmvr {

/// Guidance consumed by every cross-attention layer of one frame.
///
/// With only `first` set the layer attends to a single source. With both set
/// the two attention outputs are fused with weights (alpha1, alpha2)
/// normalized to sum to one; a source with weight exactly zero is skipped.
template <class T>
struct GuidanceInput {
  std::optional<GuidanceTokens<T>> first;
  std::optional<GuidanceTokens<T>> second;
  double alpha1 = 1.0;
  double alpha2 = 0.0;

  bool empty() const { return !first.has_value(); }
};

/// softmax(Q K^T / sqrt(D)) V for Q: [n x D], tokens [k x D].
template <class T>
BasicTensor<T> attend(const BasicTensor<T>& query, const GuidanceTokens<T>& tokens) {
  if (query.rank() != 2 || tokens.keys.rank() != 2 || query.dim(1) != tokens.keys.dim(1) ||
      tokens.values.dim(1) != tokens.keys.dim(1)) {
    throw DimensionError("attention: query " + shape_str(query.shape()) + " keys " +
                         shape_str(tokens.keys.shape()));
  }
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(query.dim(1))));
  BasicTensor<T> scores = scale(matmul(query, transpose(tokens.keys)), inv_sqrt_d);
  return matmul(softmax(scores, 1), tokens.values);
}

/// alpha1 * A1 + alpha2 * A2 with normalized weights, evaluated as
/// A1 + w2 * (A2 - A1) so identical sources reproduce A1 bit for bit.
template <class T>
BasicTensor<T> fused_attention(const BasicTensor<T>& query, const GuidanceInput<T>& guides) {
  if (!guides.first) throw ContractError("fused attention without guidance tokens");
  if (!guides.second) return attend(query, *guides.first);
  const double total = guides.alpha1 + guides.alpha2;
  if (!(guides.alpha1 >= 0.0 && guides.alpha2 >= 0.0 && total > 0.0)) {
    throw ConfigError("fusion weights must be non-negative with a positive sum");
  }
  const double w2 = guides.alpha2 / total;
  if (w2 == 0.0) return attend(query, *guides.first);
  if (w2 == 1.0) return attend(query, *guides.second);
  BasicTensor<T> a1 = attend(query, *guides.first);
  BasicTensor<T> a2 = attend(query, *guides.second);
  return add(a1, scale(sub(a2, a1), static_cast<T>(w2)));
}

/// Q = y_feat W_q, then fused attention over both guidance sources.
template <class T>
BasicTensor<T> cross_attention(const LinearLayer<T>& query_proj, const BasicTensor<T>& features,
                               const GuidanceInput<T>& guides) {
  return fused_attention(query_proj(features), guides);
}

/// Residual cross-attention over a [C x H x W] feature map.
template <class T>
struct CrossAttentionBlock {
  GroupNormLayer<T> norm;
  LinearLayer<T> query, out;

  static CrossAttentionBlock make(Rng& rng, std::size_t channels, std::size_t width) {
    return {GroupNormLayer<T>::make(channels, 4), LinearLayer<T>::make(rng, channels, width),
            LinearLayer<T>::make(rng, width, channels, 0.5)};
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x, const GuidanceInput<T>& guides) const {
    if (guides.empty()) return x;
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    BasicTensor<T> tokens = transpose(reshape(norm(x), Shape{c, h * w}));
    BasicTensor<T> attended = out(cross_attention(query, tokens, guides));
    return add(x, reshape(transpose(attended), Shape{c, h, w}));
  }

  void collect(ParamList<T>& list, const std::string& prefix) const {
    norm.collect(list, prefix + ".norm");
    query.collect(list, prefix + ".query");
    out.collect(list, prefix + ".out");
  }
};

}  // namespace diffmvr
