#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "diffmvr/dataio/video.hpp"

namespace diffmvr {

/// One manifest row: `clip_id<TAB>path<TAB>N<TAB>p`, path relative to the manifest.
struct ManifestRecord {
  std::string clip_id;
  std::string path;
  std::size_t frames = 0;
  std::size_t side = 0;
};

void write_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// Stores a clip as frames.vten / masks.vten / truth.vten ([N x c x p x p]).
void save_clip(const VideoSequence& video, const std::filesystem::path& dir);

/// Loads a clip directory: raw tensors when present, otherwise per-frame
/// PNGs (frame_%04d.png + mask_%04d.png), the annotation-ingestion path.
VideoSequence load_clip(const std::filesystem::path& dir);

/// Loads every clip listed in a manifest, in manifest order.
std::vector<VideoSequence> load_manifest_clips(const std::filesystem::path& manifest);

}  // namespace diffmvr
