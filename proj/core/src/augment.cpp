#include "flowfuse/augment.hpp"

#include <algorithm>
#include <cmath>

namespace flowfuse {

ImageBuffer crop_image(const ImageBuffer& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
    throw RangeError("crop_image: crop exceeds source");
  ImageBuffer out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
  return out;
}

FlowField crop_flow(const FlowField& f, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > f.width || y0 + h > f.height)
    throw RangeError("crop_flow: crop exceeds source");
  FlowField out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t si = f.idx(x0 + x, y0 + y);
      const std::size_t di = out.idx(x, y);
      out.u[di] = f.u[si];
      out.v[di] = f.v[si];
      out.valid[di] = f.valid[si];
    }
  return out;
}

ImageBuffer flip_image(const ImageBuffer& img, bool horizontal, bool vertical) {
  ImageBuffer out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int sx = horizontal ? img.width - 1 - x : x;
      const int sy = vertical ? img.height - 1 - y : y;
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  return out;
}

FlowField flip_flow(const FlowField& f, bool horizontal, bool vertical) {
  FlowField out(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const int sx = horizontal ? f.width - 1 - x : x;
      const int sy = vertical ? f.height - 1 - y : y;
      const std::size_t si = f.idx(sx, sy);
      const std::size_t di = out.idx(x, y);
      out.u[di] = horizontal ? -f.u[si] : f.u[si];
      out.v[di] = vertical ? -f.v[si] : f.v[si];
      out.valid[di] = f.valid[si];
    }
  return out;
}

namespace {

void color_jitter(ImageBuffer& img, double brightness, double contrast, double gamma) {
  for (float& v : img.data) {
    double x = static_cast<double>(v);
    x = std::pow(std::clamp(x, 0.0, 1.0), gamma);
    x = (x - 0.5) * contrast + 0.5 + brightness;
    v = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
}

}  // namespace

Sample augment_sample(const Sample& in, const AugmentConfig& cfg, Rng& rng) {
  Sample out = in;

  int x0 = 0, y0 = 0;
  bool do_crop = cfg.enable_crop;
  if (do_crop) {
    if (cfg.crop_w > in.image0.width || cfg.crop_h > in.image0.height)
      throw RangeError("augment_sample: crop larger than source");
    x0 = static_cast<int>(rng.uniform_int(0, in.image0.width - cfg.crop_w));
    y0 = static_cast<int>(rng.uniform_int(0, in.image0.height - cfg.crop_h));
  }
  const bool fh = cfg.flip_h_prob > 0.0 && rng.bernoulli(cfg.flip_h_prob);
  const bool fv = cfg.flip_v_prob > 0.0 && rng.bernoulli(cfg.flip_v_prob);

  auto tx_image = [&](const ImageBuffer& img) {
    ImageBuffer r = do_crop ? crop_image(img, x0, y0, cfg.crop_w, cfg.crop_h) : img;
    if (fh || fv) r = flip_image(r, fh, fv);
    return r;
  };
  auto tx_flow = [&](const FlowField& f) {
    FlowField r = do_crop ? crop_flow(f, x0, y0, cfg.crop_w, cfg.crop_h) : f;
    if (fh || fv) r = flip_flow(r, fh, fv);
    return r;
  };

  out.image0 = tx_image(in.image0);
  out.image1 = tx_image(in.image1);
  if (in.gt) out.gt = tx_flow(*in.gt);
  for (std::size_t i = 0; i < in.methods.size(); ++i)
    out.methods[i].second = tx_flow(in.methods[i].second);

  if (cfg.enable_color) {
    for (ImageBuffer* img : {&out.image0, &out.image1}) {
      const double brightness = rng.uniform(-cfg.brightness_range, cfg.brightness_range);
      const double contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
      const double gamma = rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
      color_jitter(*img, brightness, contrast, gamma);
    }
  }
  return out;
}

}  // namespace flowfuse
