#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "flowfuse/dataset.hpp"
#include "flowfuse/flowmath.hpp"
#include "flowfuse/fusion.hpp"
#include "flowfuse/synthgen.hpp"

using namespace flowfuse;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("zero rects gives a static scene with zero flow") {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.min_rects = 0;
  spec.max_rects = 0;
  spec.seed = 4;
  const SceneData s = gen_scene(spec);
  CHECK(s.image0.data == s.image1.data);
  for (float u : s.gt.u) CHECK(u == 0.f);
  for (float v : s.gt.v) CHECK(v == 0.f);
  for (auto o : s.occluded) CHECK(o == 0);
}

TEST_CASE("scene flow is piecewise constant with integer shifts in range") {
  SceneSpec spec;
  spec.width = 48;
  spec.height = 48;
  spec.seed = 7;
  const SceneData s = gen_scene(spec);
  for (std::size_t i = 0; i < s.gt.size(); ++i) {
    CHECK(s.gt.u[i] == std::round(s.gt.u[i]));
    CHECK(s.gt.v[i] == std::round(s.gt.v[i]));
    CHECK(std::fabs(s.gt.u[i]) <= spec.max_shift);
    CHECK(std::fabs(s.gt.v[i]) <= spec.max_shift);
  }
}

TEST_CASE("warping image1 by gt reproduces image0 on non-occluded pixels") {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.seed = 11;
  const SceneData s = gen_scene(spec);
  const auto [warped, inbound] = warp_backward(s.image1, s.gt);
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const std::size_t i = s.gt.idx(x, y);
      if (s.occluded[i] || !inbound[i]) continue;
      for (int c = 0; c < 3; ++c)
        total += std::fabs(warped.at(x, y, c) - s.image0.at(x, y, c));
      ++count;
    }
  REQUIRE(count > 0);
  CHECK(total / (3.0 * static_cast<double>(count)) < 0.02);
}

TEST_CASE("informative occlusion guarantee holds for many seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec spec;
    spec.width = 48;
    spec.height = 48;
    spec.seed = seed;
    const SceneData s = gen_scene(spec);
    bool informative = false;
    for (std::size_t i = 0; i < s.gt.size(); ++i)
      if (s.occluded[i] && (s.gt.u[i] != 0.f || s.gt.v[i] != 0.f)) informative = true;
    CHECK(informative);
  }
}

TEST_CASE("scene generation is bit-identical per seed") {
  SceneSpec spec;
  spec.width = 40;
  spec.height = 40;
  spec.seed = 13;
  const SceneData a = gen_scene(spec);
  const SceneData b = gen_scene(spec);
  CHECK(a.image0.data == b.image0.data);
  CHECK(a.image1.data == b.image1.data);
  CHECK(a.gt.u == b.gt.u);
  CHECK(a.occluded == b.occluded);

  spec.seed = 14;
  const SceneData c = gen_scene(spec);
  CHECK(a.image0.data != c.image0.data);
}

TEST_CASE("smooth corruption with vanishing sigma is the identity") {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.seed = 17;
  const SceneData s = gen_scene(spec);
  CorruptionSpec c = corruption_from_name("smooth");
  c.blur_sigma = 0.0;
  const FlowField out = corrupt_flow(s.gt, s.occluded, s.image0, c);
  CHECK(out.u == s.gt.u);
  CHECK(out.v == s.gt.v);
}

TEST_CASE("smooth corruption preserves a globally constant field") {
  FlowField f(16, 16);
  for (float& u : f.u) u = 3.f;
  const CorruptionSpec c = corruption_from_name("smooth");
  const FlowField out = corrupt_flow(f, std::vector<std::uint8_t>(f.size(), 0),
                                     ImageBuffer(16, 16, 3), c);
  for (float u : out.u) CHECK(u == doctest::Approx(3.0).epsilon(1e-4));
  for (float v : out.v) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("noisy corruption perturbs with roughly the configured sigma") {
  FlowField f(64, 64);
  CorruptionSpec c = corruption_from_name("noisy");
  c.seed = 23;
  const FlowField out = corrupt_flow(f, std::vector<std::uint8_t>(f.size(), 0),
                                     ImageBuffer(64, 64, 3), c);
  double sum = 0.0, sq = 0.0;
  for (float u : out.u) { sum += u; sq += static_cast<double>(u) * u; }
  const double n = static_cast<double>(f.size());
  CHECK(std::fabs(sum / n) < 0.05);
  CHECK(std::sqrt(sq / n) == doctest::Approx(c.noise_sigma).epsilon(0.1));

  CorruptionSpec c2 = c;
  c2.seed = 24;
  const FlowField out2 = corrupt_flow(f, std::vector<std::uint8_t>(f.size(), 0),
                                      ImageBuffer(64, 64, 3), c2);
  CHECK(out.u != out2.u);
}

TEST_CASE("zerocc only zeroes occluded pixels") {
  SceneSpec spec;
  spec.width = 48;
  spec.height = 48;
  spec.seed = 29;
  const SceneData s = gen_scene(spec);
  const FlowField out = corrupt_flow(s.gt, s.occluded, s.image0,
                                     corruption_from_name("zerocc"));
  for (std::size_t i = 0; i < s.gt.size(); ++i) {
    if (s.occluded[i]) {
      CHECK(out.u[i] == 0.f);
      CHECK(out.v[i] == 0.f);
    } else {
      CHECK(out.u[i] == s.gt.u[i]);
      CHECK(out.v[i] == s.gt.v[i]);
    }
  }

  // with no occlusions it's the identity
  const FlowField same = corrupt_flow(s.gt, std::vector<std::uint8_t>(s.gt.size(), 0),
                                      s.image0, corruption_from_name("zerocc"));
  CHECK(same.u == s.gt.u);
}

TEST_CASE("patch corruption damages exactly the patch squares") {
  FlowField f(64, 64);
  CorruptionSpec c = corruption_from_name("patch");
  c.patch_count = 1;
  c.patch_size = 8;
  c.seed = 31;
  const FlowField out = corrupt_flow(f, std::vector<std::uint8_t>(f.size(), 0),
                                     ImageBuffer(64, 64, 3), c);
  std::size_t damaged = 0;
  double mag = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = std::hypot(out.u[i] - f.u[i], out.v[i] - f.v[i]);
    if (d > 0.0) {
      ++damaged;
      mag = d;
    }
  }
  CHECK(damaged == 64);  // one 8x8 square
  CHECK(mag == doctest::Approx(c.patch_magnitude).epsilon(1e-4));
}

TEST_CASE("gen_dataset writes the full file set and a valid manifest") {
  const fs::path dir = fs::temp_directory_path() / "flowfuse_test_synth_ds";
  fs::remove_all(dir);
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  const std::vector<CorruptionSpec> corr = {
      corruption_from_name("smooth"), corruption_from_name("noisy"),
      corruption_from_name("patch"), corruption_from_name("zerocc")};
  const DatasetManifest m = gen_dataset(3, spec, corr, 555, dir);
  CHECK(m.entries.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(m.entries[static_cast<std::size_t>(i)].methods.size() == 4);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", i);
    CHECK(fs::exists(dir / (std::string(buf) + "_img0.ppm")));
    CHECK(fs::exists(dir / (std::string(buf) + "_img1.ppm")));
    CHECK(fs::exists(dir / (std::string(buf) + "_gt.flo")));
    CHECK(fs::exists(dir / (std::string(buf) + "_zerocc.flo")));
  }
  const std::vector<Sample> samples = load_samples(read_manifest(dir / "manifest.json"));
  CHECK(samples.size() == 3);
  CHECK(samples[0].methods[0].first == "smooth");
}

TEST_CASE("regenerating a dataset reproduces every byte") {
  const fs::path d1 = fs::temp_directory_path() / "flowfuse_test_synth_a";
  const fs::path d2 = fs::temp_directory_path() / "flowfuse_test_synth_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  const std::vector<CorruptionSpec> corr = {corruption_from_name("noisy"),
                                            corruption_from_name("patch")};
  (void)gen_dataset(2, spec, corr, 777, d1);
  (void)gen_dataset(2, spec, corr, 777, d2);
  for (const auto& entry : fs::directory_iterator(d1)) {
    const fs::path name = entry.path().filename();
    if (name == "manifest.json") continue;  // differs only in base paths
    CHECK(slurp(entry.path()) == slurp(d2 / name));
  }
}

TEST_CASE("oracle fusion strictly beats every corruption on a generated scene") {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.seed = 99;
  const SceneData s = gen_scene(spec);
  FlowBundle b;
  b.image0 = s.image0;
  b.image1 = s.image1;
  b.gt = s.gt;
  for (const char* name : {"smooth", "noisy", "patch", "zerocc"}) {
    CorruptionSpec c = corruption_from_name(name);
    c.seed = Rng::derive(spec.seed, 1);
    b.methods.emplace_back(name, corrupt_flow(s.gt, s.occluded, s.image0, c));
  }
  const auto [fused, sel] = oracle_fuse(b);
  const double fused_aee = aee(endpoint_error_map(fused, s.gt));
  for (const auto& [name, f] : b.methods) {
    const double method_aee = aee(endpoint_error_map(f, s.gt));
    CHECK(fused_aee < method_aee);
  }
}
