#include "diffmvr/diffusion/schedule.hpp"

#include <cstdint>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace diffmvr {

void NoiseSchedule::check_timestep(int timestep, int lowest) const {
  if (timestep < lowest || timestep > t_max) {
    throw ContractError("timestep " + std::to_string(timestep) + " outside [" + std::to_string(lowest) + ", " +
                        std::to_string(t_max) + "]");
  }
}

std::string NoiseSchedule::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int64_t steps = t_max;
  mix(&steps, sizeof steps);
  for (double b : beta) mix(&b, sizeof b);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

NoiseSchedule build_schedule(int t_max, double beta_start, double beta_end) {
  if (t_max < 1) throw ConfigError("schedule needs t_max >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.t_max = t_max;
  s.beta.assign(t_max + 1, 0.0);
  s.alpha.assign(t_max + 1, 1.0);
  s.alpha_bar.assign(t_max + 1, 1.0);
  s.sigma.assign(t_max + 1, 0.0);
  for (int t = 1; t <= t_max; ++t) {
    const double frac = t_max == 1 ? 0.0 : static_cast<double>(t - 1) / (t_max - 1);
    s.beta[t] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.sigma[t] = t == 1 ? 0.0 : std::sqrt(s.beta[t]);
  }
  return s;
}

}  // namespace diffmvr
