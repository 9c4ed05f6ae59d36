#include <cstdio>
#include <fstream>
#include <sstream>

#include "diffmvr/metrics/metrics.hpp"

namespace diffmvr {

namespace {

std::vector<double> embed(const ModelParams<float>& encoder, const Tensor& frame) {
  const Tensor z = encode_guidance(encoder, frame, GuidanceSource::kSymmetric);
  return {z.data().begin(), z.data().end()};
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

FeatureSet extract_features(const std::vector<VideoSequence>& clips, const ModelParams<float>& encoder,
                            FeatureLevel level) {
  NoGradGuard no_grad;
  FeatureSet out;
  for (const auto& clip : clips) {
    if (level == FeatureLevel::kFrame) {
      for (const auto& f : clip.frames) out.push_back(embed(encoder, f));
      continue;
    }
    if (clip.size() < kVideoFeatureFrames) throw ContractError("clip too short for video features");
    std::vector<double> joined;
    for (std::size_t k = 0; k < kVideoFeatureFrames; ++k) {
      const std::size_t t = k * clip.size() / kVideoFeatureFrames;
      const auto e = embed(encoder, clip.frames[t]);
      joined.insert(joined.end(), e.begin(), e.end());
    }
    out.push_back(std::move(joined));
  }
  return out;
}

VideoSequence truth_sequence(const VideoSequence& clip) {
  if (!clip.has_truth()) throw ContractError("clip has no ground truth");
  VideoSequence out;
  out.frames = clip.truth;
  out.masks = clip.masks;
  out.fps = clip.fps;
  return out;
}

MetricReport evaluate(const std::vector<VideoSequence>& inpainted, const std::vector<VideoSequence>& truth,
                      const ModelParams<float>& encoder, const std::vector<std::string>& clip_ids,
                      const std::string& fingerprint) {
  if (inpainted.empty() || inpainted.size() != truth.size()) {
    throw ContractError("evaluate needs equally many inpainted and truth clips");
  }
  MetricReport report;
  report.fingerprint = fingerprint;
  FeatureSet all_a, all_b;
  std::vector<double> frame_ssim, frame_ssim_masked;
  for (std::size_t i = 0; i < inpainted.size(); ++i) {
    const VideoSequence& a = inpainted[i];
    const VideoSequence& b = truth[i];
    if (a.size() != b.size() || a.masks.size() != a.size()) {
      throw ContractError("clip " + std::to_string(i) + ": inpainted and truth are misaligned");
    }
    ClipMetrics m;
    m.clip_id = i < clip_ids.size() ? clip_ids[i] : std::to_string(i);
    std::vector<double> s, sm;
    for (std::size_t t = 0; t < a.size(); ++t) {
      s.push_back(ssim(a.frames[t], b.frames[t]));
      if (a.occluded(t)) sm.push_back(ssim_masked(a.frames[t], b.frames[t], a.masks[t]));
    }
    m.ssim = mean_of(s);
    m.ssim_masked = sm.empty() ? 1.0 : mean_of(sm);
    frame_ssim.insert(frame_ssim.end(), s.begin(), s.end());
    frame_ssim_masked.insert(frame_ssim_masked.end(), sm.begin(), sm.end());
    m.tc = tc_score(a);
    VideoSequence tb = b;
    tb.masks = a.masks;
    m.tc_truth = tc_score(tb);
    const FeatureSet fa = extract_features({a}, encoder, FeatureLevel::kFrame);
    const FeatureSet fb = extract_features({b}, encoder, FeatureLevel::kFrame);
    m.fid_proxy = frechet_distance(fa, fb);
    all_a.insert(all_a.end(), fa.begin(), fa.end());
    all_b.insert(all_b.end(), fb.begin(), fb.end());
    report.clips.push_back(m);
  }

  std::vector<double> clip_ssim, clip_tc, clip_tc_truth, clip_fid;
  for (const auto& m : report.clips) {
    clip_ssim.push_back(m.ssim);
    clip_tc.push_back(m.tc);
    clip_tc_truth.push_back(m.tc_truth);
    clip_fid.push_back(m.fid_proxy);
  }
  report.fid_proxy = frechet_distance(all_a, all_b);
  report.ssim = mean_of(frame_ssim);
  report.ssim_masked = frame_ssim_masked.empty() ? 1.0 : mean_of(frame_ssim_masked);
  report.tc = mean_of(clip_tc);
  report.tc_truth = mean_of(clip_tc_truth);
  report.video_fid_proxy = mean_of(clip_fid);
  report.video_ssim = mean_of(clip_ssim);
  report.video_tc = report.tc;
  report.fvd_proxy = frechet_distance(extract_features(inpainted, encoder, FeatureLevel::kVideo),
                                      extract_features(truth, encoder, FeatureLevel::kVideo));
  return report;
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "clip,fid_proxy,ssim,ssim_masked,tc,tc_truth\n";
  for (const auto& m : report.clips) {
    out << m.clip_id << ',' << m.fid_proxy << ',' << m.ssim << ',' << m.ssim_masked << ',' << m.tc << ','
        << m.tc_truth << '\n';
  }
  out << "frame_level," << report.fid_proxy << ',' << report.ssim << ',' << report.ssim_masked << ',' << report.tc
      << ',' << report.tc_truth << '\n';
  out << "video_level," << report.video_fid_proxy << ',' << report.video_ssim << ",," << report.video_tc << ",\n";
  out << "fvd_proxy," << report.fvd_proxy << ",,,,\n";
  out << "fingerprint," << report.fingerprint << ",,,,\n";
  if (!out) throw IoError("write failed: " + path.string());
}

std::string format_report_table(const MetricReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %12s %10s %10s %10s\n", "frame-level", "fid_proxy", "ssim", "ssim_mask",
                "tc");
  os << line;
  std::snprintf(line, sizeof line, "%-12s %12.4f %10.4f %10.4f %10.4f\n", "", report.fid_proxy, report.ssim,
                report.ssim_masked, report.tc);
  os << line;
  std::snprintf(line, sizeof line, "%-12s %12s %10s %10s %12s\n", "video-level", "fid_proxy", "ssim", "tc",
                "fvd_proxy");
  os << line;
  std::snprintf(line, sizeof line, "%-12s %12.4f %10.4f %10.4f %12.4f\n", "", report.video_fid_proxy,
                report.video_ssim, report.video_tc, report.fvd_proxy);
  os << line;
  if (!report.fingerprint.empty()) os << "fingerprint " << report.fingerprint << '\n';
  return os.str();
}

}  // namespace diffmvr
