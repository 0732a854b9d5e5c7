#pragma once

#include <optional>
#include <vector>

#include "flowfuse/flow_types.hpp"
#include "flowfuse/rng.hpp"

namespace flowfuse {

struct AugmentConfig {
  bool enable_crop = false;
  int crop_w = 64;
  int crop_h = 64;
  double flip_h_prob = 0.0;
  double flip_v_prob = 0.0;
  bool enable_color = false;
  double brightness_range = 0.0;   // additive offset drawn from [-r, r]
  double contrast_lo = 1.0, contrast_hi = 1.0;
  double gamma_lo = 1.0, gamma_hi = 1.0;
};

struct Sample {
  ImageBuffer image0;
  ImageBuffer image1;
  std::optional<FlowField> gt;
  std::vector<std::pair<std::string, FlowField>> methods;
};

// One crop/flip decision shared by every raster in the sample; flips negate
// the matching flow channel. Color jitter is drawn independently per image
// and never touches flow. Draw order from `rng` is fixed: crop x, crop y,
// flip h, flip v, then per-image color parameters.
Sample augment_sample(const Sample& in, const AugmentConfig& cfg, Rng& rng);

// Deterministic primitives, exposed for tests.
ImageBuffer crop_image(const ImageBuffer& img, int x0, int y0, int w, int h);
FlowField crop_flow(const FlowField& f, int x0, int y0, int w, int h);
ImageBuffer flip_image(const ImageBuffer& img, bool horizontal, bool vertical);
FlowField flip_flow(const FlowField& f, bool horizontal, bool vertical);

}  // namespace flowfuse
