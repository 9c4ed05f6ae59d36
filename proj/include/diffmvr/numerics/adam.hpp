#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffmvr/numerics/tensor.hpp"

namespace diffmvr {

template <class T>
struct NamedParam {
  std::string name;
  BasicTensor<T> tensor;
};

template <class T>
using ParamList = std::vector<NamedParam<T>>;

template <class T>
void zero_grads(ParamList<T>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers live here, one pair per
/// parameter, in the order the parameter list was given.
template <class T>
class Adam {
 public:
  Adam(ParamList<T> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
      first_.emplace_back(p.tensor.numel(), 0.0);
      second_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  void step() {
    for (const auto& p : params_) {
      if (!p.tensor.has_grad()) throw ContractError("adam step: parameter '" + p.name + "' has no gradient");
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& tensor = params_[k].tensor;
      auto values = tensor.mutable_data();
      auto grads = tensor.grad();
      auto& m = first_[k];
      auto& v = second_[k];
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grads[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double update = config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        values[i] = static_cast<T>(values[i] - update);
      }
    }
  }

  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  ParamList<T> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long steps_ = 0;
};

}  // namespace diffmvr
