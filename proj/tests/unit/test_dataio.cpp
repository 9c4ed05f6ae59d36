#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "diffmvr/dataio/image_io.hpp"
#include "diffmvr/dataio/manifest.hpp"
#include "diffmvr/dataio/raw_io.hpp"
#include "diffmvr/dataio/synth.hpp"
#include "diffmvr/numerics/rng.hpp"

using namespace diffmvr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("diffmvr_dataio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

double mask_mean(const Tensor& m) {
  double s = 0.0;
  for (float v : m.data()) s += v;
  return s / static_cast<double>(m.numel());
}

}  // namespace

TEST(Synth, ZeroCoverageScheduleGivesCleanClip) {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.coverage.assign(cfg.frames, 0.0);
  const VideoSequence v = generate_clip(cfg);
  for (std::size_t t = 0; t < v.size(); ++t) {
    EXPECT_TRUE(bit_equal(v.frames[t], v.truth[t]));
    EXPECT_EQ(mask_mean(v.masks[t]), 0.0);
  }
}

TEST(Synth, SameSeedSameClip) {
  SynthConfig cfg;
  cfg.seed = 17;
  cfg.mask_style = MaskStyle::kEllipse;
  const VideoSequence a = generate_clip(cfg), b = generate_clip(cfg);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_TRUE(bit_equal(a.frames[t], b.frames[t]));
    EXPECT_TRUE(bit_equal(a.masks[t], b.masks[t]));
    EXPECT_TRUE(bit_equal(a.truth[t], b.truth[t]));
  }
}

TEST(Synth, MaskMatchesOccluderFootprintAndSchedule) {
  for (MaskStyle style : {MaskStyle::kRectangle, MaskStyle::kEllipse}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SynthConfig cfg;
      cfg.seed = seed;
      cfg.mask_style = style;
      const GeneratedClip clip = generate_clip_with_geometry(cfg);
      const double p2 = static_cast<double>(cfg.side * cfg.side);
      for (std::size_t t = 0; t < clip.video.size(); ++t) {
        const FrameGeometry& g = clip.geometry[t];
        std::size_t inside = 0;
        for (int y = 0; y < static_cast<int>(cfg.side); ++y) {
          for (int x = 0; x < static_cast<int>(cfg.side); ++x) {
            const bool occ = g.target_coverage > 0.0 && occluder_contains(g, x, y);
            inside += occ;
            EXPECT_EQ(clip.video.masks[t][static_cast<std::size_t>(y) * cfg.side + x], occ ? 1.0f : 0.0f);
          }
        }
        const double cov = mask_mean(clip.video.masks[t]);
        EXPECT_NEAR(cov, inside / p2, 1.0 / p2);
        if (g.target_coverage == 0.0) continue;
        // One occluder row of slack.
        const double row = style == MaskStyle::kRectangle ? g.rect_w : 2.0 * g.ell_a + 2.0;
        EXPECT_LE(std::abs(cov - g.target_coverage), row / p2) << "seed " << seed << " frame " << t;
      }
    }
  }
}

TEST(Synth, TruthAgreesOutsideMaskAndObjectIsSymmetric) {
  SynthConfig cfg;
  cfg.seed = 5;
  const GeneratedClip clip = generate_clip_with_geometry(cfg);
  const VideoSequence& v = clip.video;
  const std::size_t p = cfg.side, plane = p * p;
  bool has_clean = false;
  for (std::size_t t = 0; t < v.size(); ++t) {
    has_clean = has_clean || v.coverage(t) < cfg.clean_threshold;
    for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) {
        if (v.masks[t][i] == 0.0f) {
          EXPECT_EQ(v.frames[t][ch * plane + i], v.truth[t][ch * plane + i]);
        }
      }
    }
    // Inside the disk the texture depends on |dx| only, so mirrored columns agree.
    const int a = clip.geometry[t].axis;
    for (std::size_t y = 0; y < p; ++y) {
      for (int x = 0; x < a; ++x) {
        const int mx = 2 * a - 1 - x;
        if (mx >= static_cast<int>(p)) continue;
        const double dx = x + 0.5 - a, dy = y + 0.5 - clip.geometry[t].center_y;
        if (dx * dx + dy * dy > clip.geometry[t].radius * clip.geometry[t].radius) continue;
        for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
          EXPECT_EQ(v.truth[t][ch * plane + y * p + x], v.truth[t][ch * plane + y * p + mx]);
        }
      }
    }
  }
  EXPECT_TRUE(has_clean);
}

TEST(Synth, ImpossibleSchedulesAreConfigErrors) {
  SynthConfig cfg;
  cfg.coverage = {0.2, 0.3, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2};
  EXPECT_THROW(generate_clip(cfg), ConfigError);
  cfg.coverage = {0.0, 0.7, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2};
  EXPECT_THROW(generate_clip(cfg), ConfigError);
  cfg.coverage = {0.0, 0.2};
  EXPECT_THROW(generate_clip(cfg), ConfigError);
}

TEST(RawIo, RoundTripIsBitExact) {
  const fs::path dir = scratch("raw");
  Rng rng(1);
  for (const Shape& s : {Shape{7}, Shape{2, 3}, Shape{3, 4, 5}, Shape{2, 1, 3, 2}}) {
    Tensor t = rng.normal_tensor<float>(s, 10.0);
    t.mutable_data()[0] = -0.0f;
    write_raw(t, dir / "t.vten");
    EXPECT_TRUE(bit_equal(t, read_raw(dir / "t.vten")));
  }
}

TEST(RawIo, LayoutIsLittleEndian) {
  std::ostringstream out;
  write_raw(out, Tensor::from({2}, {1.0f, -2.0f}));
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 5u + 1u + 4u + 8u);
  EXPECT_EQ(bytes.substr(0, 5), "VTEN1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2);
  // 1.0f = 0x3F800000 little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[13]), 0x3F);
}

TEST(RawIo, CorruptFilesAreFormatErrors) {
  const fs::path dir = scratch("raw_bad");
  std::ofstream(dir / "empty.vten").close();
  EXPECT_THROW(read_raw(dir / "empty.vten"), FormatError);

  std::ofstream(dir / "magic.vten") << "VTEN2xxxx";
  EXPECT_THROW(read_raw(dir / "magic.vten"), FormatError);

  // Header says 2x3 but only 5 floats follow.
  std::ostringstream good;
  write_raw(good, Tensor::zeros({2, 3}));
  const std::string bytes = good.str();
  std::ofstream(dir / "short.vten", std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  EXPECT_THROW(read_raw(dir / "short.vten"), FormatError);
  std::ofstream(dir / "long.vten", std::ios::binary) << bytes << "xxxx";
  EXPECT_THROW(read_raw(dir / "long.vten"), FormatError);
}

TEST(ImageIo, QuantizationRoundsHalfUpAndRejectsRange) {
  EXPECT_EQ(quantize_u8(0.5f), 128);
  EXPECT_EQ(quantize_u8(0.0f), 0);
  EXPECT_EQ(quantize_u8(1.0f), 255);
  EXPECT_THROW(quantize_u8(1.01f), ContractError);
  EXPECT_THROW(quantize_u8(-0.01f), ContractError);
}

TEST(ImageIo, ExportImportRoundTrip) {
  const fs::path dir = scratch("png");
  SynthConfig cfg;
  cfg.seed = 9;
  VideoSequence v = generate_clip(cfg);
  v.frames[0] = Tensor::full(v.frames[0].shape(), 0.5f);
  export_frames(v, dir);
  std::size_t frames = 0;
  for (const auto& e : fs::directory_iterator(dir)) frames += e.path().filename().string().rfind("frame_", 0) == 0;
  EXPECT_EQ(frames, v.size());
  EXPECT_TRUE(fs::exists(dir / "frame_0000.png"));
  EXPECT_TRUE(fs::exists(dir / "mask_0007.png"));
  EXPECT_TRUE(fs::exists(dir / "overlay_0003.png"));

  const Tensor gray = read_png(dir / "frame_0000.png");
  for (float x : gray.data()) EXPECT_FLOAT_EQ(x, 128.0f / 255.0f);

  const VideoSequence back = import_frames(dir);
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t t = 0; t < v.size(); ++t) {
    for (std::size_t i = 0; i < v.frames[t].numel(); ++i) {
      EXPECT_LE(std::abs(back.frames[t][i] - v.frames[t][i]), 1.0f / 255.0f);
    }
    EXPECT_TRUE(bit_equal(back.masks[t], v.masks[t]));
  }
}

TEST(ImageIo, OutOfRangeExportIsContractError) {
  VideoSequence v;
  v.frames = {Tensor::full({3, 8, 8}, 1.5f)};
  v.masks = {Tensor::zeros({1, 8, 8})};
  EXPECT_THROW(export_frames(v, scratch("png_bad")), ContractError);
}

TEST(Manifest, RoundTripAndClipStorage) {
  const fs::path dir = scratch("manifest");
  SynthConfig cfg;
  cfg.seed = 2;
  const VideoSequence v = generate_clip(cfg);
  save_clip(v, dir / "clips/a");
  write_manifest({{"a", "clips/a", v.size(), v.side()}}, dir / "m.tsv");
  const auto records = read_manifest(dir / "m.tsv");
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].clip_id, "a");
  EXPECT_EQ(records[0].frames, 8u);
  const auto clips = load_manifest_clips(dir / "m.tsv");
  ASSERT_EQ(clips.size(), 1u);
  for (std::size_t t = 0; t < v.size(); ++t) {
    EXPECT_TRUE(bit_equal(clips[0].frames[t], v.frames[t]));
    EXPECT_TRUE(bit_equal(clips[0].truth[t], v.truth[t]));
  }

  std::ofstream(dir / "bad.tsv") << "a\tclips/a\t8\n";
  EXPECT_THROW(read_manifest(dir / "bad.tsv"), FormatError);
}

TEST(Manifest, PngDirectoriesAreIngested) {
  const fs::path dir = scratch("ingest");
  SynthConfig cfg;
  cfg.seed = 4;
  const VideoSequence v = generate_clip(cfg);
  export_frames(v, dir / "clip");
  const VideoSequence back = load_clip(dir / "clip");
  EXPECT_EQ(back.size(), v.size());
  EXPECT_TRUE(back.has_truth());
}
