#pragma once

#include <filesystem>
#include <iosfwd>

#include "diffmvr/numerics/tensor.hpp"

namespace diffmvr {

// Raw tensor container:
//   magic "VTEN1" (5 bytes) | u8 rank | rank x u32 LE extents | f32 LE payload (row-major)

void write_raw(std::ostream& out, const Tensor& t);
Tensor read_raw(std::istream& in);

void write_raw(const Tensor& t, const std::filesystem::path& path);
Tensor read_raw(const std::filesystem::path& path);

}  // namespace diffmvr
