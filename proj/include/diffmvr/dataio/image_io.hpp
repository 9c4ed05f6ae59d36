#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "diffmvr/dataio/video.hpp"

namespace diffmvr {

/// Round-half-up quantization of a [0,1] value to 8 bits; out-of-range
/// values are a ContractError, never clamped.
std::uint8_t quantize_u8(float value);

/// Writes [1|3 x H x W] as gray or RGB PNG.
void write_png(const Tensor& image, const std::filesystem::path& path);

/// Reads an 8-bit gray/RGB(A) PNG into [c x H x W] scaled by 1/255 (alpha dropped).
Tensor read_png(const std::filesystem::path& path);

/// Writes frame_%04d.png (RGB8), mask_%04d.png (gray {0,255}) and
/// overlay_%04d.png (frame tinted red where masked); truth_%04d.png when present.
void export_frames(const VideoSequence& video, const std::filesystem::path& dir);

/// Re-imports a directory written by export_frames (or annotated by hand
/// with the same naming). Masks are binarized at 0.5.
VideoSequence import_frames(const std::filesystem::path& dir);

/// Tiles equally shaped images into a grid (row-major), 1 px white gutters.
Tensor tile_grid(const std::vector<std::vector<Tensor>>& rows);

}  // namespace diffmvr
