#include "flowfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flowfuse/rng.hpp"

namespace flowfuse {

namespace {

// Multi-octave value noise in [0,1], 3 channels, with a per-texture tint.
ImageBuffer value_noise_texture(int w, int h, int octaves, double amplitude, Rng& rng) {
  std::vector<double> acc(static_cast<std::size_t>(w) * h * 3, 0.0);
  double amp = amplitude;
  for (int o = 0; o < octaves; ++o) {
    const int cell = std::max(2, 16 >> o);
    const int gw = w / cell + 2, gh = h / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh * 3);
    for (double& g : grid) g = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < h; ++y) {
      const double gy = static_cast<double>(y) / cell;
      const int y0 = static_cast<int>(gy);
      const double fy = gy - y0;
      for (int x = 0; x < w; ++x) {
        const double gx = static_cast<double>(x) / cell;
        const int x0 = static_cast<int>(gx);
        const double fx = gx - x0;
        for (int c = 0; c < 3; ++c) {
          const auto g = [&](int xi, int yi) {
            return grid[(static_cast<std::size_t>(yi) * gw + xi) * 3 + c];
          };
          const double top = g(x0, y0) * (1 - fx) + g(x0 + 1, y0) * fx;
          const double bot = g(x0, y0 + 1) * (1 - fx) + g(x0 + 1, y0 + 1) * fx;
          acc[(static_cast<std::size_t>(y) * w + x) * 3 + c] += amp * (top * (1 - fy) + bot * fy);
        }
      }
    }
    amp *= 0.5;
  }
  double tint[3];
  for (double& t : tint) t = rng.uniform(0.25, 0.75);
  ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = tint[c] + acc[(static_cast<std::size_t>(y) * w + x) * 3 + c];
        img.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  return img;
}

struct Rect {
  int x0, y0, w, h;
  int tx, ty;  // integer translation keeps rendering and warping exact
  ImageBuffer texture;

  bool contains0(int x, int y) const {
    return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
  }
  bool contains1(int x, int y) const {
    return x >= x0 + tx && x < x0 + tx + w && y >= y0 + ty && y < y0 + ty + h;
  }
};

SceneData render_scene(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const int w = spec.width, h = spec.height;
  const ImageBuffer background =
      value_noise_texture(w, h, spec.noise_octaves, spec.noise_amplitude, rng);

  const int nrects = spec.max_rects > 0
                         ? static_cast<int>(rng.uniform_int(spec.min_rects, spec.max_rects))
                         : 0;
  std::vector<Rect> rects;
  const int shift = static_cast<int>(spec.max_shift);
  for (int r = 0; r < nrects; ++r) {
    Rect rect;
    rect.w = static_cast<int>(rng.uniform_int(16, std::min(40, w - 2)));
    rect.h = static_cast<int>(rng.uniform_int(16, std::min(40, h - 2)));
    rect.x0 = static_cast<int>(rng.uniform_int(0, w - rect.w));
    rect.y0 = static_cast<int>(rng.uniform_int(0, h - rect.h));
    rect.tx = static_cast<int>(rng.uniform_int(-shift, shift));
    rect.ty = static_cast<int>(rng.uniform_int(-shift, shift));
    rect.texture = value_noise_texture(rect.w, rect.h, spec.noise_octaves,
                                       spec.noise_amplitude, rng);
    rects.push_back(std::move(rect));
  }

  // depth order: higher index is on top
  const auto owner0 = [&](int x, int y) {
    for (int r = nrects - 1; r >= 0; --r)
      if (rects[static_cast<std::size_t>(r)].contains0(x, y)) return r;
    return -1;
  };
  const auto owner1 = [&](int x, int y) {
    for (int r = nrects - 1; r >= 0; --r)
      if (rects[static_cast<std::size_t>(r)].contains1(x, y)) return r;
    return -1;
  };

  SceneData scene;
  scene.image0 = ImageBuffer(w, h, 3);
  scene.image1 = ImageBuffer(w, h, 3);
  scene.gt = FlowField(w, h);
  scene.occluded.assign(static_cast<std::size_t>(w) * h, 0);

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int o0 = owner0(x, y);
      for (int c = 0; c < 3; ++c)
        scene.image0.at(x, y, c) =
            o0 >= 0 ? rects[static_cast<std::size_t>(o0)].texture.at(
                          x - rects[static_cast<std::size_t>(o0)].x0,
                          y - rects[static_cast<std::size_t>(o0)].y0, c)
                    : background.at(x, y, c);
      const int o1 = owner1(x, y);
      for (int c = 0; c < 3; ++c)
        scene.image1.at(x, y, c) =
            o1 >= 0 ? rects[static_cast<std::size_t>(o1)].texture.at(
                          x - rects[static_cast<std::size_t>(o1)].x0 -
                              rects[static_cast<std::size_t>(o1)].tx,
                          y - rects[static_cast<std::size_t>(o1)].y0 -
                              rects[static_cast<std::size_t>(o1)].ty, c)
                    : background.at(x, y, c);

      const std::size_t p = scene.gt.idx(x, y);
      if (o0 >= 0) {
        scene.gt.u[p] = static_cast<float>(rects[static_cast<std::size_t>(o0)].tx);
        scene.gt.v[p] = static_cast<float>(rects[static_cast<std::size_t>(o0)].ty);
      }
      const int qx = x + static_cast<int>(scene.gt.u[p]);
      const int qy = y + static_cast<int>(scene.gt.v[p]);
      if (qx < 0 || qx >= w || qy < 0 || qy >= h || owner1(qx, qy) != o0)
        scene.occluded[p] = 1;
    }
  return scene;
}

bool has_informative_occlusion(const SceneData& s) {
  for (std::size_t p = 0; p < s.gt.size(); ++p)
    if (s.occluded[p] && (s.gt.u[p] != 0.f || s.gt.v[p] != 0.f)) return true;
  return false;
}

}  // namespace

SceneData gen_scene(const SceneSpec& spec) {
  if (spec.max_rects == 0 || !spec.require_informative_occlusion)
    return render_scene(spec, spec.seed);
  SceneData scene;
  for (int attempt = 0; attempt < 64; ++attempt) {
    scene = render_scene(spec, attempt == 0 ? spec.seed : Rng::derive(spec.seed, attempt));
    if (has_informative_occlusion(scene)) return scene;
  }
  return scene;  // best effort after the attempt cap
}

CorruptionSpec corruption_from_name(const std::string& name) {
  CorruptionSpec s;
  s.name = name;
  if (name == "smooth") s.kind = CorruptionKind::kSmooth;
  else if (name == "noisy") s.kind = CorruptionKind::kNoisy;
  else if (name == "patch") s.kind = CorruptionKind::kPatchOutlier;
  else if (name == "zerocc") s.kind = CorruptionKind::kZeroOccluded;
  else throw FormatError("unknown corruption: '" + name + "'");
  return s;
}

namespace {

FlowField gaussian_blur_flow(const FlowField& gt, double sigma) {
  if (sigma < 1e-6) return gt;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= ksum;

  const int w = gt.width, h = gt.height;
  FlowField tmp(w, h), out(w, h);
  tmp.valid = gt.valid;
  out.valid = gt.valid;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double su = 0, sv = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int xi = std::clamp(x + i, 0, w - 1);
        su += kernel[static_cast<std::size_t>(i + radius)] * gt.u[gt.idx(xi, y)];
        sv += kernel[static_cast<std::size_t>(i + radius)] * gt.v[gt.idx(xi, y)];
      }
      tmp.u[tmp.idx(x, y)] = static_cast<float>(su);
      tmp.v[tmp.idx(x, y)] = static_cast<float>(sv);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double su = 0, sv = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int yi = std::clamp(y + i, 0, h - 1);
        su += kernel[static_cast<std::size_t>(i + radius)] * tmp.u[tmp.idx(x, yi)];
        sv += kernel[static_cast<std::size_t>(i + radius)] * tmp.v[tmp.idx(x, yi)];
      }
      out.u[out.idx(x, y)] = static_cast<float>(su);
      out.v[out.idx(x, y)] = static_cast<float>(sv);
    }
  return out;
}

}  // namespace

FlowField corrupt_flow(const FlowField& gt, const std::vector<std::uint8_t>& occluded,
                       const ImageBuffer& image0, const CorruptionSpec& spec) {
  if (occluded.size() != gt.size() ||
      image0.width != gt.width || image0.height != gt.height)
    throw ConsistencyError("corrupt_flow: dimension mismatch");
  Rng rng(spec.seed);
  switch (spec.kind) {
    case CorruptionKind::kSmooth:
      return gaussian_blur_flow(gt, spec.blur_sigma);
    case CorruptionKind::kNoisy: {
      FlowField out = gt;
      for (std::size_t p = 0; p < out.size(); ++p) {
        out.u[p] += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
        out.v[p] += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
      }
      return out;
    }
    case CorruptionKind::kPatchOutlier: {
      FlowField out = gt;
      const int size = std::min({spec.patch_size, gt.width, gt.height});
      for (int k = 0; k < spec.patch_count; ++k) {
        const int px = static_cast<int>(rng.uniform_int(0, gt.width - size));
        const int py = static_cast<int>(rng.uniform_int(0, gt.height - size));
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const float wu = static_cast<float>(spec.patch_magnitude * std::cos(angle));
        const float wv = static_cast<float>(spec.patch_magnitude * std::sin(angle));
        for (int y = py; y < py + size; ++y)
          for (int x = px; x < px + size; ++x) {
            out.u[out.idx(x, y)] = gt.u[out.idx(x, y)] + wu;
            out.v[out.idx(x, y)] = gt.v[out.idx(x, y)] + wv;
          }
      }
      return out;
    }
    case CorruptionKind::kZeroOccluded: {
      FlowField out = gt;
      for (std::size_t p = 0; p < out.size(); ++p)
        if (occluded[p]) { out.u[p] = 0.f; out.v[p] = 0.f; }
      return out;
    }
  }
  throw std::logic_error("corrupt_flow: unreachable");
}

DatasetManifest gen_dataset(int count, const SceneSpec& scene_template,
                            const std::vector<CorruptionSpec>& corruptions,
                            std::uint64_t master_seed,
                            const std::filesystem::path& out_dir) {
  if (corruptions.size() < 2)
    throw ConsistencyError("gen_dataset: need at least 2 corruption specs");
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.seed = static_cast<std::int64_t>(master_seed);
  manifest.base_dir = out_dir;
  manifest.notes = "synthgen toy dataset";

  for (int i = 0; i < count; ++i) {
    SceneSpec spec = scene_template;
    // per-scene seed: derive(master, 2*i); per-method seed: derive(master, 2*i+1) + k
    spec.seed = Rng::derive(master_seed, static_cast<std::uint64_t>(2 * i));
    const SceneData scene = gen_scene(spec);

    std::ostringstream stem_s;
    stem_s.width(6);
    stem_s.fill('0');
    stem_s << i;
    const std::string stem = stem_s.str();

    write_image_file(out_dir / (stem + "_img0.ppm"), scene.image0);
    write_image_file(out_dir / (stem + "_img1.ppm"), scene.image1);
    write_flo_file(out_dir / (stem + "_gt.flo"), scene.gt);

    ManifestEntry e;
    e.image0 = stem + "_img0.ppm";
    e.image1 = stem + "_img1.ppm";
    e.gt = stem + "_gt.flo";
    for (std::size_t k = 0; k < corruptions.size(); ++k) {
      CorruptionSpec cspec = corruptions[k];
      cspec.seed = Rng::derive(master_seed, static_cast<std::uint64_t>(2 * i + 1)) +
                   static_cast<std::uint64_t>(k);
      const FlowField mf = corrupt_flow(scene.gt, scene.occluded, scene.image0, cspec);
      const std::string fname = stem + "_" + cspec.name + ".flo";
      write_flo_file(out_dir / fname, mf);
      e.methods.emplace_back(cspec.name, fname);
    }
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace flowfuse
