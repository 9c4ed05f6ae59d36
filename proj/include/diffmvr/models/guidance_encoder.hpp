#pragma once

#include "diffmvr/models/config.hpp"
#include "diffmvr/models/layers.hpp"

namespace diffmvr {

enum class GuidanceSource { kSymmetric, kPast };

/// Image embedding network; one instance per guidance source.
template <class T>
struct GuidanceEncoder {
  Conv2dLayer<T> conv1, conv2, conv3;
  LinearLayer<T> head;

  static GuidanceEncoder make(Rng& rng, const ModelConfig& cfg) {
    GuidanceEncoder e;
    e.conv1 = Conv2dLayer<T>::make(rng, cfg.channels, 16, 3, 2);
    e.conv2 = Conv2dLayer<T>::make(rng, 16, 32, 3, 2);
    e.conv3 = Conv2dLayer<T>::make(rng, 32, 32, 3, 2);
    const std::size_t cells = (cfg.side / 8) * (cfg.side / 8);
    e.head = LinearLayer<T>::make(rng, 32 * cells, cfg.embed_dim);
    return e;
  }

  /// [c x p x p] -> [1 x p_e]
  BasicTensor<T> operator()(const BasicTensor<T>& image) const {
    BasicTensor<T> h = silu(conv1(image));
    h = silu(conv2(h));
    h = silu(conv3(h));
    return head(reshape(h, Shape{1, h.numel()}));
  }

  void collect(ParamList<T>& out, const std::string& prefix) const {
    conv1.collect(out, prefix + ".conv1");
    conv2.collect(out, prefix + ".conv2");
    conv3.collect(out, prefix + ".conv3");
    head.collect(out, prefix + ".head");
  }
};

/// Key/value tokens derived from one guidance image.
template <class T>
struct GuidanceTokens {
  BasicTensor<T> keys;    // [k x D]
  BasicTensor<T> values;  // [k x D]
  GuidanceSource source = GuidanceSource::kSymmetric;
};

/// f_mlp: R^{p_e} -> R^{p'} with p' = 2kD, split into k key and k value tokens.
template <class T>
struct TokenProjector {
  LinearLayer<T> hidden, out;
  std::size_t token_count = 8, token_width = 32;

  static TokenProjector make(Rng& rng, const ModelConfig& cfg) {
    cfg.validate();
    TokenProjector p;
    p.hidden = LinearLayer<T>::make(rng, cfg.embed_dim, 2 * cfg.embed_dim);
    p.out = LinearLayer<T>::make(rng, 2 * cfg.embed_dim, cfg.projected_dim());
    p.token_count = cfg.token_count;
    p.token_width = cfg.token_width;
    return p;
  }

  GuidanceTokens<T> operator()(const BasicTensor<T>& embedding, GuidanceSource source) const {
    if (embedding.rank() != 2 || embedding.dim(0) != 1 || embedding.dim(1) != hidden.weight.dim(0)) {
      throw DimensionError("project_tokens: embedding " + shape_str(embedding.shape()));
    }
    BasicTensor<T> expanded = out(silu(hidden(embedding)));
    BasicTensor<T> tokens = reshape(expanded, Shape{2 * token_count, token_width});
    return {slice0(tokens, 0, token_count), slice0(tokens, token_count, 2 * token_count), source};
  }

  void collect(ParamList<T>& out_list, const std::string& prefix) const {
    hidden.collect(out_list, prefix + ".hidden");
    out.collect(out_list, prefix + ".out");
  }
};

}  // namespace diffmvr
