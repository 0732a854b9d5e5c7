#include "flowfuse/fusion.hpp"

#include <iostream>
#include <sstream>

#include "flowfuse/flowmath.hpp"
#include "flowfuse/rng.hpp"

namespace flowfuse {

FlowBundle make_bundle(LoadedBundle&& loaded) {
  FlowBundle b;
  b.image0 = std::move(loaded.image0);
  b.image1 = std::move(loaded.image1);
  b.methods = std::move(loaded.methods);
  b.gt = std::move(loaded.gt);
  return b;
}

SelectionMap select_min_error(const std::vector<ErrorMap>& errors) {
  if (errors.size() < 2)
    throw ConsistencyError("select_min_error: need at least 2 error maps");
  const int w = errors[0].width, h = errors[0].height;
  for (const ErrorMap& m : errors)
    if (m.width != w || m.height != h)
      throw ConsistencyError("select_min_error: dimension mismatch");

  SelectionMap sel(w, h);
  const int n = static_cast<int>(errors.size());
  for (std::size_t p = 0; p < sel.size(); ++p) {
    int best = -1;
    float best_e = 0.f;
    for (int i = 0; i < n; ++i) {
      const ErrorMap& m = errors[static_cast<std::size_t>(i)];
      if (!m.valid[p]) continue;
      if (best < 0 || m.e[p] < best_e) {  // strict <: ties keep the lowest index
        best = i;
        best_e = m.e[p];
      }
    }
    if (best >= 0) {
      sel.idx[p] = best;
      sel.decided[p] = 1;
    }
  }
  return sel;
}

FlowField compose(const FlowBundle& bundle, const SelectionMap& sel) {
  const int w = bundle.image0.width, h = bundle.image0.height;
  if (sel.width != w || sel.height != h)
    throw ConsistencyError("compose: selection dimension mismatch");
  FlowField out(w, h);
  const int n = static_cast<int>(bundle.methods.size());
  for (std::size_t p = 0; p < sel.size(); ++p) {
    if (!sel.decided[p]) {
      out.valid[p] = 0;
      continue;
    }
    const std::int32_t i = sel.idx[p];
    if (i < 0 || i >= n)
      throw std::logic_error("compose: selection index out of range");
    const FlowField& f = bundle.methods[static_cast<std::size_t>(i)].second;
    out.u[p] = f.u[p];
    out.v[p] = f.v[p];
    out.valid[p] = f.valid[p];
  }
  return out;
}

std::pair<FlowField, SelectionMap> oracle_fuse(const FlowBundle& bundle) {
  if (!bundle.gt) throw ConsistencyError("oracle_fuse: bundle has no ground truth");
  std::vector<ErrorMap> errors;
  errors.reserve(bundle.methods.size());
  for (const auto& [name, flow] : bundle.methods)
    errors.push_back(endpoint_error_map(flow, *bundle.gt));
  SelectionMap sel = select_min_error(errors);
  FlowField fused = compose(bundle, sel);
  return {std::move(fused), std::move(sel)};
}

PredictedFusion predicted_fuse(const FlowBundle& bundle, const AssessModel& model) {
  PredictedFusion r;
  r.predicted_errors =
      predict_error_maps(model, bundle.image0, bundle.image1, bundle.methods);
  r.selection = select_min_error(r.predicted_errors);
  r.flow = compose(bundle, r.selection);
  return r;
}

namespace {

std::string entry_name(std::size_t index) {
  std::ostringstream s;
  s.width(6);
  s.fill('0');
  s << index;
  return s.str() + ".flo";
}

DatasetManifest export_with(
    const DatasetManifest& dataset, const std::filesystem::path& out_dir,
    const std::function<FlowField(const FlowBundle&, std::size_t)>& fuse_one,
    const std::string& notes_prefix) {
  std::filesystem::create_directories(out_dir);
  DatasetManifest out;
  out.seed = dataset.seed;
  out.base_dir = out_dir;
  std::ostringstream notes;
  notes << notes_prefix;
  for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
    const ManifestEntry& src = dataset.entries[i];
    if (src.methods.size() < 2) {
      std::cerr << "warning: entry " << i << " has fewer than 2 method flows; skipped\n";
      notes << " skipped_entry=" << i << ";";
      continue;
    }
    FlowBundle bundle = make_bundle(load_bundle(dataset, i));
    const FlowField fused = fuse_one(bundle, i);
    const std::string name = entry_name(i);
    write_flo_file(out_dir / name, fused);

    ManifestEntry e;
    // images stay where they are; reference them absolutely from the new manifest
    const auto abs = [&](const std::string& rel) {
      std::filesystem::path p(rel);
      return (p.is_absolute() ? p : dataset.base_dir / p).lexically_normal().string();
    };
    e.image0 = abs(src.image0);
    e.image1 = abs(src.image1);
    e.gt = name;
    for (const auto& [mname, mpath] : src.methods) e.methods.emplace_back(mname, abs(mpath));
    out.entries.push_back(std::move(e));
  }
  out.notes = notes.str();
  write_manifest(out_dir / "manifest.json", out);
  return out;
}

}  // namespace

DatasetManifest export_proxy(const DatasetManifest& dataset, const AssessModel& model,
                             const std::filesystem::path& out_dir) {
  return export_with(
      dataset, out_dir,
      [&](const FlowBundle& b, std::size_t) { return predicted_fuse(b, model).flow; },
      "proxy=fusionnet-" + to_string(model.config.mode) + ";");
}

DatasetManifest export_random_mix(const DatasetManifest& dataset, std::uint64_t seed,
                                  const std::filesystem::path& out_dir) {
  Rng rng(Rng::derive(seed, 0x726d6978ULL));
  return export_with(
      dataset, out_dir,
      [&](const FlowBundle& b, std::size_t) {
        const std::size_t i = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(b.methods.size()) - 1));
        return b.methods[i].second;
      },
      "proxy=rand-mix;");
}

DatasetManifest export_single_method(const DatasetManifest& dataset,
                                     const std::string& method_name,
                                     const std::filesystem::path& out_dir) {
  return export_with(
      dataset, out_dir,
      [&](const FlowBundle& b, std::size_t entry) -> FlowField {
        for (const auto& [name, flow] : b.methods)
          if (name == method_name) return flow;
        throw ConsistencyError("export_single_method: entry " + std::to_string(entry) +
                               " has no method named '" + method_name + "'");
      },
      "proxy=single-" + method_name + ";");
}

}  // namespace flowfuse
