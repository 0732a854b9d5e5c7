#include "flowfuse/dataset.hpp"

namespace flowfuse {

std::vector<Sample> load_samples(const DatasetManifest& manifest) {
  std::vector<Sample> samples;
  samples.reserve(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    LoadedBundle b = load_bundle(manifest, i);
    Sample s;
    s.image0 = std::move(b.image0);
    s.image1 = std::move(b.image1);
    s.gt = std::move(b.gt);
    s.methods = std::move(b.methods);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace flowfuse
