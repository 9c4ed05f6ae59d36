#include "diffmvr/diffusion/losses.hpp"

namespace diffmvr {

GuidanceMode parse_guidance_mode(const std::string& name) {
  if (name == "dual") return GuidanceMode::kDual;
  if (name == "sym" || name == "symmetric") return GuidanceMode::kSymmetric;
  if (name == "past") return GuidanceMode::kPast;
  if (name == "present") return GuidanceMode::kPresent;
  throw ConfigError("unknown guidance mode '" + name + "' (dual|sym|past|present)");
}

std::string guidance_mode_name(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kDual:
      return "dual";
    case GuidanceMode::kSymmetric:
      return "sym";
    case GuidanceMode::kPast:
      return "past";
    case GuidanceMode::kPresent:
      return "present";
  }
  return "dual";
}

}  // namespace diffmvr
