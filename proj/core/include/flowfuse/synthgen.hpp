#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flowfuse/flow_types.hpp"
#include "flowfuse/flowio.hpp"

namespace flowfuse {

struct SceneSpec {
  int width = 96;
  int height = 96;
  int min_rects = 1;
  int max_rects = 4;
  int noise_octaves = 3;
  double noise_amplitude = 0.5;
  double max_shift = 12.0;  // per-rect |u|,|v| bound, pixels
  std::uint64_t seed = 0;
  // Resample (bounded, deterministic) until the scene has at least one
  // occluded pixel with nonzero ground-truth flow, so occlusion-targeted
  // corruptions always produce a real error. Ignored when max_rects == 0.
  bool require_informative_occlusion = true;
};

struct SceneData {
  ImageBuffer image0;
  ImageBuffer image1;
  FlowField gt;
  std::vector<std::uint8_t> occluded;
};

SceneData gen_scene(const SceneSpec& spec);

enum class CorruptionKind { kSmooth, kNoisy, kPatchOutlier, kZeroOccluded };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kSmooth;
  std::string name = "smooth";
  double blur_sigma = 2.0;       // smooth
  // Large enough that the warp mismatch of a noisy flow clearly exceeds the
  // texture variation at the value-noise feature scale; subpixel jitter is
  // photometrically invisible and would leave the assessment net no signal.
  double noise_sigma = 3.0;      // noisy
  int patch_count = 3;           // patch_outlier
  int patch_size = 16;           // patch_outlier (square side)
  double patch_magnitude = 8.0;  // patch_outlier
  std::uint64_t seed = 0;
};

CorruptionSpec corruption_from_name(const std::string& name);

FlowField corrupt_flow(const FlowField& gt, const std::vector<std::uint8_t>& occluded,
                       const ImageBuffer& image0, const CorruptionSpec& spec);

// Writes out_dir/{NNNNNN_img0.ppm, NNNNNN_img1.ppm, NNNNNN_gt.flo,
// NNNNNN_<method>.flo} plus manifest.json. Per-scene seeds derive from the
// master seed by scene index; per-method seeds add a method-index offset.
DatasetManifest gen_dataset(int count, const SceneSpec& scene_template,
                            const std::vector<CorruptionSpec>& corruptions,
                            std::uint64_t master_seed,
                            const std::filesystem::path& out_dir);

}  // namespace flowfuse
