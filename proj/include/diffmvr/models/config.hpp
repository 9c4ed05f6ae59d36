#pragma once

#include <cstddef>
#include <string>

#include "diffmvr/error.hpp"

namespace diffmvr {

/// Architecture hyperparameters shared by every network.
struct ModelConfig {
  std::size_t side = 32;            // p
  std::size_t channels = 3;         // c
  std::size_t latent_channels = 4;  // c_z
  std::size_t embed_dim = 64;       // p_e, guidance embedding width
  std::size_t token_count = 8;      // k
  std::size_t token_width = 32;     // D
  std::size_t proj_dim = 0;         // p'; 0 means 2 * k * D
  std::size_t unet_channels0 = 16;
  std::size_t unet_channels1 = 32;
  std::size_t time_dim = 32;
  int t_max = 50;

  std::size_t latent_side() const { return side / 4; }
  std::size_t projected_dim() const { return proj_dim == 0 ? 2 * token_count * token_width : proj_dim; }

  void validate() const {
    if (side < 16 || side % 8 != 0) throw ConfigError("frame side must be a multiple of 8, at least 16");
    if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
    if (token_count == 0 || token_width == 0 || embed_dim == 0) throw ConfigError("token sizes must be positive");
    if (projected_dim() != 2 * token_count * token_width) {
      throw ConfigError("projection width " + std::to_string(projected_dim()) + " is not 2*k*D = " +
                        std::to_string(2 * token_count * token_width));
    }
    if (unet_channels0 % 4 != 0 || unet_channels1 % 4 != 0) {
      throw ConfigError("U-Net widths must be multiples of the 4 norm groups");
    }
    if (t_max < 1) throw ConfigError("t_max must be at least 1");
  }
};

}  // namespace diffmvr
