#pragma once

#include <optional>
#include <utility>

#include "flowfuse/flow_types.hpp"

namespace flowfuse {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-pixel Euclidean norm of (est - gt); valid = est.valid AND gt.valid.
ErrorMap endpoint_error_map(const FlowField& est, const FlowField& gt);

// Mean of e over valid pixels. 64-bit accumulation, row-major order.
double aee(const ErrorMap& err);

// KITTI Fl: fraction of valid pixels with e > tau_px AND e > tau_rel*|gt|.
// F1-noc is obtained by pre-masking err.valid with a non-occluded mask.
double fl_outlier_rate(const ErrorMap& err, const FlowField& gt,
                       double tau_px = 3.0, double tau_rel = 0.05);

FlowStats flow_stats(const FlowField& est, const FlowField& gt);

// Bilinear backward warp: out(x,y) = img sampled at (x+u, y+v), sample
// coordinates clamped to the image; inbound=false where the unclamped
// coordinate left [0,W-1]x[0,H-1].
std::pair<ImageBuffer, std::vector<std::uint8_t>> warp_backward(
    const ImageBuffer& img, const FlowField& flow);

// Hue = direction, saturation = magnitude / max_mag (default: 99th percentile
// of valid magnitudes). Invalid pixels render black; zero flow renders white.
ImageBuffer flow_to_color(const FlowField& flow,
                          std::optional<double> max_mag = std::nullopt);

}  // namespace flowfuse
