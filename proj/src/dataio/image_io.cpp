#include "diffmvr/dataio/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <string>

namespace diffmvr {

namespace {

std::string indexed_name(const char* stem, std::size_t t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu.png", stem, t);
  return buf;
}

}  // namespace

std::uint8_t quantize_u8(float value) {
  if (!(value >= 0.0f && value <= 1.0f)) {
    throw ContractError("pixel value " + std::to_string(value) + " outside [0,1]");
  }
  return static_cast<std::uint8_t>(std::floor(static_cast<double>(value) * 255.0 + 0.5));
}

void write_png(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw DimensionError("write_png expects [1|3 x H x W], got " + shape_str(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> pixels(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        pixels[(y * w + x) * c + ch] = quantize_u8(image[(ch * h + y) * w + x]);
      }
    }
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + png.message);
  }
}

Tensor read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read " + path.string() + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t c = color ? 3 : 1, h = png.height, w = png.width;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    throw FormatError("cannot decode " + path.string() + ": " + png.message);
  }
  std::vector<float> values(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        values[(ch * h + y) * w + x] = static_cast<float>(pixels[(y * w + x) * c + ch]) / 255.0f;
      }
    }
  }
  return Tensor::from(Shape{c, h, w}, std::move(values));
}

void export_frames(const VideoSequence& video, const std::filesystem::path& dir) {
  video.validate();
  std::filesystem::create_directories(dir);
  for (std::size_t t = 0; t < video.size(); ++t) {
    const Tensor& frame = video.frames[t];
    const Tensor& mask = video.masks[t];
    write_png(frame, dir / indexed_name("frame", t));
    write_png(mask, dir / indexed_name("mask", t));
    const std::size_t c = frame.dim(0), plane = mask.numel();
    std::vector<float> overlay(3 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const float v = frame[(c == 3 ? ch : 0) * plane + i];
        const float tint = ch == 0 ? 1.0f : 0.0f;
        overlay[ch * plane + i] = mask[i] != 0.0f ? 0.5f * v + 0.5f * tint : v;
      }
    }
    write_png(Tensor::from(Shape{3, frame.dim(1), frame.dim(2)}, std::move(overlay)),
              dir / indexed_name("overlay", t));
    if (video.has_truth()) write_png(video.truth[t], dir / indexed_name("truth", t));
  }
}

VideoSequence import_frames(const std::filesystem::path& dir) {
  VideoSequence video;
  for (std::size_t t = 0;; ++t) {
    const auto frame_path = dir / indexed_name("frame", t);
    if (!std::filesystem::exists(frame_path)) break;
    video.frames.push_back(read_png(frame_path));
    const auto mask_path = dir / indexed_name("mask", t);
    if (std::filesystem::exists(mask_path)) {
      Tensor raw = read_png(mask_path);
      std::vector<float> bin(raw.dim(1) * raw.dim(2));
      for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = raw[i] >= 0.5f ? 1.0f : 0.0f;
      video.masks.push_back(Tensor::from(Shape{1, raw.dim(1), raw.dim(2)}, std::move(bin)));
    } else {
      const auto& f = video.frames.back();
      video.masks.push_back(Tensor::zeros(Shape{1, f.dim(1), f.dim(2)}));
    }
    const auto truth_path = dir / indexed_name("truth", t);
    if (std::filesystem::exists(truth_path)) video.truth.push_back(read_png(truth_path));
  }
  if (video.frames.empty()) throw IoError("no frame_0000.png in " + dir.string());
  if (!video.truth.empty() && video.truth.size() != video.frames.size()) video.truth.clear();
  video.validate();
  return video;
}

Tensor tile_grid(const std::vector<std::vector<Tensor>>& rows) {
  if (rows.empty() || rows[0].empty()) throw ContractError("tile_grid: empty grid");
  const std::size_t h = rows[0][0].dim(1), w = rows[0][0].dim(2);
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const std::size_t gh = rows.size() * (h + 1) + 1, gw = cols * (w + 1) + 1;
  std::vector<float> out(3 * gh * gw, 1.0f);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t col = 0; col < rows[r].size(); ++col) {
      const Tensor& img = rows[r][col];
      if (img.dim(1) != h || img.dim(2) != w) throw DimensionError("tile_grid: mixed image sizes");
      const std::size_t c = img.dim(0);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t gy = r * (h + 1) + 1 + y, gx = col * (w + 1) + 1 + x;
            out[(ch * gh + gy) * gw + gx] = img[((c == 3 ? ch : 0) * h + y) * w + x];
          }
        }
      }
    }
  }
  return Tensor::from(Shape{3, gh, gw}, std::move(out));
}

}  // namespace diffmvr
