#pragma once

#include <vector>

#include "flowfuse/augment.hpp"
#include "flowfuse/flowio.hpp"

namespace flowfuse {

// Load every manifest entry into memory.
std::vector<Sample> load_samples(const DatasetManifest& manifest);

}  // namespace flowfuse
