#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowfuse/assess.hpp"
#include "flowfuse/flow_types.hpp"
#include "flowfuse/flowio.hpp"

namespace flowfuse {

struct FlowBundle {
  ImageBuffer image0;
  ImageBuffer image1;
  std::vector<std::pair<std::string, FlowField>> methods;  // ordered, names unique
  std::optional<FlowField> gt;
};

FlowBundle make_bundle(LoadedBundle&& loaded);

// Per-pixel method index after fusion; decided=false where no method was a
// valid candidate.
struct SelectionMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> idx;
  std::vector<std::uint8_t> decided;

  SelectionMap() = default;
  SelectionMap(int w, int h)
      : width(w), height(h),
        idx(static_cast<std::size_t>(w) * h, 0),
        decided(static_cast<std::size_t>(w) * h, 0) {}
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
};

// Per-pixel argmin over the maps valid at that pixel; ties break to the
// lowest method index.
SelectionMap select_min_error(const std::vector<ErrorMap>& errors);

// Copy (u,v) from the selected method per pixel; invalid where undecided or
// where the chosen method's pixel is invalid.
FlowField compose(const FlowBundle& bundle, const SelectionMap& sel);

// Fusion on ground-truth errors: the per-pixel lower envelope of the inputs.
std::pair<FlowField, SelectionMap> oracle_fuse(const FlowBundle& bundle);

struct PredictedFusion {
  FlowField flow;
  SelectionMap selection;
  std::vector<ErrorMap> predicted_errors;
};

PredictedFusion predicted_fuse(const FlowBundle& bundle, const AssessModel& model);

// Writes out_dir/NNNNNN.flo per entry plus out_dir/manifest.json whose gt
// paths point at the fused fields. Entries with < 2 methods are skipped with
// a warning recorded in the returned manifest's notes.
DatasetManifest export_proxy(const DatasetManifest& dataset, const AssessModel& model,
                             const std::filesystem::path& out_dir);

// Rand. Mix baseline: per entry, one uniformly chosen method's flow becomes
// the proxy ground truth.
DatasetManifest export_random_mix(const DatasetManifest& dataset, std::uint64_t seed,
                                  const std::filesystem::path& out_dir);

// Single-method proxy: every entry's proxy is the named method's flow.
DatasetManifest export_single_method(const DatasetManifest& dataset,
                                     const std::string& method_name,
                                     const std::filesystem::path& out_dir);

}  // namespace flowfuse
