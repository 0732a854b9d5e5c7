#include "flowfuse/flowmath.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowfuse {

ErrorMap endpoint_error_map(const FlowField& est, const FlowField& gt) {
  if (est.width != gt.width || est.height != gt.height)
    throw ConsistencyError("endpoint_error_map: dimension mismatch");
  ErrorMap m(est.width, est.height);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.valid[i] = est.valid[i] && gt.valid[i];
    if (m.valid[i]) {
      const float du = est.u[i] - gt.u[i];
      const float dv = est.v[i] - gt.v[i];
      m.e[i] = std::sqrt(du * du + dv * dv);
    }
  }
  return m;
}

double aee(const ErrorMap& err) {
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    if (err.valid[i]) {
      sum += err.e[i];
      ++count;
    }
  }
  if (count == 0) throw MetricError("aee: no valid pixels");
  return sum / static_cast<double>(count);
}

double fl_outlier_rate(const ErrorMap& err, const FlowField& gt,
                       double tau_px, double tau_rel) {
  if (err.width != gt.width || err.height != gt.height)
    throw ConsistencyError("fl_outlier_rate: dimension mismatch");
  std::int64_t count = 0, outliers = 0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    if (!err.valid[i] || !gt.valid[i]) continue;
    ++count;
    const double mag = std::sqrt(static_cast<double>(gt.u[i]) * gt.u[i] +
                                 static_cast<double>(gt.v[i]) * gt.v[i]);
    if (err.e[i] > tau_px && err.e[i] > tau_rel * mag) ++outliers;
  }
  if (count == 0) throw MetricError("fl_outlier_rate: no valid pixels");
  return static_cast<double>(outliers) / static_cast<double>(count);
}

FlowStats flow_stats(const FlowField& est, const FlowField& gt) {
  const ErrorMap m = endpoint_error_map(est, gt);
  FlowStats s;
  s.aee = aee(m);
  s.fl_rate = fl_outlier_rate(m, gt);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.valid[i]) ++s.valid_count;
  return s;
}

std::pair<ImageBuffer, std::vector<std::uint8_t>> warp_backward(
    const ImageBuffer& img, const FlowField& flow) {
  if (img.width != flow.width || img.height != flow.height)
    throw ConsistencyError("warp_backward: dimension mismatch");
  const int w = img.width, h = img.height, c = img.channels;
  ImageBuffer out(w, h, c);
  std::vector<std::uint8_t> inbound(static_cast<std::size_t>(w) * h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = flow.idx(x, y);
      float sx = static_cast<float>(x) + flow.u[i];
      float sy = static_cast<float>(y) + flow.v[i];
      if (sx < 0.f || sx > static_cast<float>(w - 1) ||
          sy < 0.f || sy > static_cast<float>(h - 1)) {
        inbound[i] = 0;
        sx = std::clamp(sx, 0.f, static_cast<float>(w - 1));
        sy = std::clamp(sy, 0.f, static_cast<float>(h - 1));
      }
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const float fx = sx - static_cast<float>(x0);
      const float fy = sy - static_cast<float>(y0);
      for (int ch = 0; ch < c; ++ch) {
        const float top = img.at(x0, y0, ch) * (1.f - fx) + img.at(x1, y0, ch) * fx;
        const float bot = img.at(x0, y1, ch) * (1.f - fx) + img.at(x1, y1, ch) * fx;
        out.at(x, y, ch) = top * (1.f - fy) + bot * fy;
      }
    }
  }
  return {std::move(out), std::move(inbound)};
}

namespace {

// HSV (h in [0,360)) to RGB, s,v in [0,1].
void hsv_to_rgb(float hdeg, float s, float v, float& r, float& g, float& b) {
  const float c = v * s;
  const float hp = hdeg / 60.f;
  const float x = c * (1.f - std::fabs(std::fmod(hp, 2.f) - 1.f));
  float r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1)      { r1 = c; g1 = x; }
  else if (hp < 2) { r1 = x; g1 = c; }
  else if (hp < 3) { g1 = c; b1 = x; }
  else if (hp < 4) { g1 = x; b1 = c; }
  else if (hp < 5) { r1 = x; b1 = c; }
  else             { r1 = c; b1 = x; }
  const float m = v - c;
  r = r1 + m; g = g1 + m; b = b1 + m;
}

}  // namespace

ImageBuffer flow_to_color(const FlowField& flow, std::optional<double> max_mag) {
  const std::size_t n = flow.size();
  double norm = max_mag.value_or(0.0);
  if (!max_mag) {
    std::vector<float> mags;
    mags.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (flow.valid[i])
        mags.push_back(std::sqrt(flow.u[i] * flow.u[i] + flow.v[i] * flow.v[i]));
    }
    if (!mags.empty()) {
      std::size_t k = static_cast<std::size_t>(0.99 * static_cast<double>(mags.size() - 1));
      std::nth_element(mags.begin(), mags.begin() + k, mags.end());
      norm = mags[k];
    }
  }
  if (norm <= 0.0) norm = 1.0;

  ImageBuffer out(flow.width, flow.height, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const int x = static_cast<int>(i % flow.width);
    const int y = static_cast<int>(i / flow.width);
    if (!flow.valid[i]) {
      out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = 0.f;
      continue;
    }
    const float u = flow.u[i], v = flow.v[i];
    const float mag = std::sqrt(u * u + v * v);
    float ang = std::atan2(-v, -u) / 3.14159265358979323846f * 180.f + 180.f;  // [0,360)
    if (ang >= 360.f) ang -= 360.f;
    const float sat = std::min(1.f, static_cast<float>(mag / norm));
    float r, g, b;
    hsv_to_rgb(ang, sat, 1.f, r, g, b);
    out.at(x, y, 0) = r;
    out.at(x, y, 1) = g;
    out.at(x, y, 2) = b;
  }
  return out;
}

}  // namespace flowfuse
