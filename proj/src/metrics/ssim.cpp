#include <cmath>

#include "diffmvr/metrics/metrics.hpp"

namespace diffmvr {

namespace {

// Box sums over all kSsimWindow x kSsimWindow windows of one plane, via a
// summed-area table.
class WindowSums {
 public:
  WindowSums(const std::vector<double>& plane, std::size_t h, std::size_t w) : w_(w), table_((h + 1) * (w + 1), 0.0) {
    for (std::size_t y = 0; y < h; ++y) {
      double row = 0.0;
      for (std::size_t x = 0; x < w; ++x) {
        row += plane[y * w + x];
        table_[(y + 1) * (w + 1) + x + 1] = table_[y * (w + 1) + x + 1] + row;
      }
    }
  }
  double at(std::size_t y, std::size_t x) const {
    const std::size_t k = kSsimWindow, s = w_ + 1;
    return table_[(y + k) * s + x + k] - table_[y * s + x + k] - table_[(y + k) * s + x] + table_[y * s + x];
  }

 private:
  std::size_t w_;
  std::vector<double> table_;
};

double ssim_impl(const Tensor& a, const Tensor& b, const Tensor* mask) {
  detail::require_same_shape(a, b, "ssim");
  if (a.rank() != 3 || a.dim(1) < kSsimWindow || a.dim(2) < kSsimWindow) {
    throw DimensionError("ssim needs [c x h x w] with h, w >= 7, got " + shape_str(a.shape()));
  }
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), plane = h * w;
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<bool> use(oh * ow, true);
  if (mask) {
    if (mask->numel() != plane) throw DimensionError("ssim mask does not match the image plane");
    std::vector<double> m(mask->data().begin(), mask->data().end());
    WindowSums ms(m, h, w);
    bool any = false;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        use[y * ow + x] = ms.at(y, x) > 0.0;
        any = any || use[y * ow + x];
      }
    }
    if (!any) use.assign(use.size(), true);
  }

  const double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> pa(plane), pb(plane), aa(plane), bb(plane), ab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = a[ch * plane + i];
      pb[i] = b[ch * plane + i];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    WindowSums sa(pa, h, w), sb(pb, h, w), saa(aa, h, w), sbb(bb, h, w), sab(ab, h, w);
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        if (!use[y * ow + x]) continue;
        const double mu_a = sa.at(y, x) / n, mu_b = sb.at(y, x) / n;
        const double var_a = saa.at(y, x) / n - mu_a * mu_a;
        const double var_b = sbb.at(y, x) / n - mu_b * mu_b;
        const double cov = sab.at(y, x) / n - mu_a * mu_b;
        total += ((2 * mu_a * mu_b + kSsimC1) * (2 * cov + kSsimC2)) /
                 ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) { return ssim_impl(a, b, nullptr); }

double ssim_masked(const Tensor& a, const Tensor& b, const Tensor& mask) { return ssim_impl(a, b, &mask); }

double tc_score(const VideoSequence& video) {
  if (video.size() < 2) throw ContractError("tc_score needs at least two frames");
  const bool masked = !video.masks.empty();
  const std::size_t c = video.channels(), plane = video.side() * video.side();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t t = 1; t < video.size(); ++t) {
    const Tensor& prev = video.frames[t - 1];
    const Tensor& cur = video.frames[t];
    detail::require_same_shape(prev, cur, "tc_score");
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (masked && video.masks[t - 1][i] == 0.0f && video.masks[t][i] == 0.0f) continue;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = static_cast<double>(cur[ch * plane + i]) - prev[ch * plane + i];
        sq += d * d;
        ++n;
      }
    }
    if (n == 0) continue;
    total += std::sqrt(sq / static_cast<double>(n));
    ++pairs;
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

}  // namespace diffmvr
