#include "diffmvr/dataio/manifest.hpp"

#include <fstream>
#include <sstream>

#include "diffmvr/dataio/image_io.hpp"
#include "diffmvr/dataio/raw_io.hpp"

namespace diffmvr {

void write_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    out << r.clip_id << '\t' << r.path << '\t' << r.frames << '\t' << r.side << '\n';
  }
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    try {
      records.push_back({fields[0], fields[1], std::stoul(fields[2]), std::stoul(fields[3])});
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad integer field");
    }
  }
  return records;
}

namespace {

Tensor stack(const std::vector<Tensor>& items) {
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  std::vector<float> values;
  values.reserve(shape_numel(shape));
  for (const auto& t : items) values.insert(values.end(), t.data().begin(), t.data().end());
  return Tensor::from(std::move(shape), std::move(values));
}

std::vector<Tensor> unstack(const Tensor& t) {
  if (t.rank() != 4) throw FormatError("clip tensor must be [N x c x p x p], got " + shape_str(t.shape()));
  const Shape item(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = shape_numel(item);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    out.push_back(Tensor::from(item, std::vector<float>(t.data().begin() + i * n, t.data().begin() + (i + 1) * n)));
  }
  return out;
}

}  // namespace

void save_clip(const VideoSequence& video, const std::filesystem::path& dir) {
  video.validate();
  std::filesystem::create_directories(dir);
  write_raw(stack(video.frames), dir / "frames.vten");
  write_raw(stack(video.masks), dir / "masks.vten");
  if (video.has_truth()) write_raw(stack(video.truth), dir / "truth.vten");
}

VideoSequence load_clip(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "frames.vten")) return import_frames(dir);
  VideoSequence video;
  video.frames = unstack(read_raw(dir / "frames.vten"));
  video.masks = unstack(read_raw(dir / "masks.vten"));
  if (std::filesystem::exists(dir / "truth.vten")) video.truth = unstack(read_raw(dir / "truth.vten"));
  video.validate();
  return video;
}

std::vector<VideoSequence> load_manifest_clips(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  std::vector<VideoSequence> clips;
  for (const auto& r : read_manifest(manifest)) {
    VideoSequence v = load_clip(base / r.path);
    if (v.size() != r.frames || v.side() != r.side) {
      throw FormatError("clip " + r.clip_id + " does not match its manifest record");
    }
    clips.push_back(std::move(v));
  }
  return clips;
}

}  // namespace diffmvr
