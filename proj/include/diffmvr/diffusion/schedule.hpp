#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffmvr/models/vae.hpp"

namespace diffmvr {

/// Tables indexed by timestep T = 0..t_max; entry 0 is the clean boundary
/// (beta 0, alpha_bar 1).
struct NoiseSchedule {
  int t_max = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;

  void check_timestep(int timestep, int lowest) const;
  /// FNV-1a over t_max and the beta table, as 16 hex digits.
  std::string hash() const;
};

/// Linear betas from beta_start (T=1) to beta_end (T=t_max);
/// sigma_T = sqrt(beta_T) for T > 1 and sigma_1 = 0.
NoiseSchedule build_schedule(int t_max = 50, double beta_start = 1e-4, double beta_end = 0.02);

/// y_T = sqrt(abar_T) y + sqrt(1 - abar_T) eps. T = 0 returns y unchanged.
template <class T>
LatentMap<T> forward_diffuse(const LatentMap<T>& y, int timestep, const BasicTensor<T>& eps,
                             const NoiseSchedule& sched) {
  sched.check_timestep(timestep, 0);
  if (y.kind != LatentKind::kClean) throw ContractError("forward_diffuse expects a clean latent");
  detail::require_same_shape(y.values, eps, "forward_diffuse");
  if (timestep == 0) return y;
  const double abar = sched.alpha_bar[timestep];
  BasicTensor<T> noisy = add(scale(y.values, static_cast<T>(std::sqrt(abar))),
                             scale(eps, static_cast<T>(std::sqrt(1.0 - abar))));
  return {noisy, LatentKind::kNoisy, timestep};
}

/// One ancestral step T -> T-1:
/// (1/sqrt(alpha_T)) (y - (1 - alpha_T)/sqrt(1 - abar_T) eps_hat) + sigma_T z.
/// Evaluated elementwise in double; z is ignored when sigma_T = 0.
template <class T>
LatentMap<T> reverse_step(const LatentMap<T>& y, int timestep, const BasicTensor<T>& eps_hat,
                          const NoiseSchedule& sched, const BasicTensor<T>& z) {
  sched.check_timestep(timestep, 1);
  detail::require_same_shape(y.values, eps_hat, "reverse_step");
  detail::require_same_shape(y.values, z, "reverse_step");
  const double a = sched.alpha[timestep];
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  const double coef = (1.0 - a) / std::sqrt(1.0 - sched.alpha_bar[timestep]);
  const double sigma = sched.sigma[timestep];
  std::vector<T> out(y.values.numel());
  auto yv = y.values.data();
  auto ev = eps_hat.data();
  auto zv = z.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = inv_sqrt_a * (static_cast<double>(yv[i]) - coef * static_cast<double>(ev[i]));
    if (sigma != 0.0) v += sigma * static_cast<double>(zv[i]);
    out[i] = static_cast<T>(v);
  }
  const int next = timestep - 1;
  return {BasicTensor<T>::from(y.values.shape(), std::move(out)), next == 0 ? LatentKind::kClean : LatentKind::kNoisy,
          next == 0 ? std::nullopt : std::optional<int>(next)};
}

/// (y_T - sqrt(1 - abar_T) eps) / sqrt(abar_T).
template <class T>
BasicTensor<T> recover_x0(const LatentMap<T>& noisy, const BasicTensor<T>& eps, const NoiseSchedule& sched) {
  const int timestep = noisy.timestep.value_or(0);
  sched.check_timestep(timestep, 0);
  const double abar = sched.alpha_bar[timestep];
  return scale(sub(noisy.values, scale(eps, static_cast<T>(std::sqrt(1.0 - abar)))),
               static_cast<T>(1.0 / std::sqrt(abar)));
}

}  // namespace diffmvr
