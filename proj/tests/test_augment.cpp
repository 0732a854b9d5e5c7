#include "doctest.h"

#include <cmath>

#include "flowfuse/augment.hpp"
#include "flowfuse/flowmath.hpp"
#include "flowfuse/rng.hpp"

using namespace flowfuse;

namespace {

ImageBuffer random_image(int w, int h, Rng& rng) {
  ImageBuffer img(w, h, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

FlowField random_field(int w, int h, Rng& rng) {
  FlowField f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = static_cast<float>(rng.uniform(-5.0, 5.0));
    f.v[i] = static_cast<float>(rng.uniform(-5.0, 5.0));
  }
  return f;
}

Sample random_sample(int w, int h, Rng& rng) {
  Sample s;
  s.image0 = random_image(w, h, rng);
  s.image1 = random_image(w, h, rng);
  s.gt = random_field(w, h, rng);
  s.methods = {{"a", random_field(w, h, rng)}, {"b", random_field(w, h, rng)}};
  return s;
}

}  // namespace

TEST_CASE("horizontal flip negates u, vertical flip negates v") {
  FlowField f(2, 1);
  f.u[0] = 2.f;
  f.v[0] = 3.f;
  const FlowField h = flip_flow(f, true, false);
  CHECK(h.u[h.idx(1, 0)] == -2.f);
  CHECK(h.v[h.idx(1, 0)] == 3.f);
  const FlowField v = flip_flow(f, false, true);
  CHECK(v.u[0] == 2.f);
  CHECK(v.v[0] == -3.f);

  // double flip restores the field
  const FlowField round = flip_flow(flip_flow(f, true, true), true, true);
  CHECK(round.u == f.u);
  CHECK(round.v == f.v);
}

TEST_CASE("image flip mirrors pixel positions") {
  Rng rng(3);
  const ImageBuffer img = random_image(4, 3, rng);
  const ImageBuffer h = flip_image(img, true, false);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(h.at(x, y, c) == img.at(3 - x, y, c));
  const ImageBuffer v = flip_image(img, false, true);
  CHECK(v.at(1, 0, 0) == img.at(1, 2, 0));
}

TEST_CASE("crop extracts the requested window and keeps flow vectors") {
  Rng rng(5);
  const ImageBuffer img = random_image(8, 8, rng);
  const ImageBuffer ci = crop_image(img, 2, 3, 4, 2);
  CHECK(ci.width == 4);
  CHECK(ci.height == 2);
  CHECK(ci.at(0, 0, 1) == img.at(2, 3, 1));
  CHECK(ci.at(3, 1, 2) == img.at(5, 4, 2));

  FlowField f(8, 8);
  for (float& u : f.u) u = 1.5f;
  const FlowField cf = crop_flow(f, 2, 3, 4, 2);
  CHECK(cf.width == 4);
  for (float u : cf.u) CHECK(u == 1.5f);

  CHECK_THROWS_AS(crop_image(img, 6, 6, 4, 4), RangeError);
  CHECK_THROWS_AS(crop_flow(f, 0, 0, 9, 2), RangeError);
}

TEST_CASE("augmentation with all knobs disabled is the identity") {
  Rng sample_rng(7), aug_rng(8);
  const Sample s = random_sample(6, 6, sample_rng);
  const Sample out = augment_sample(s, AugmentConfig{}, aug_rng);
  CHECK(out.image0.data == s.image0.data);
  CHECK(out.image1.data == s.image1.data);
  CHECK(out.gt->u == s.gt->u);
  CHECK(out.methods[1].second.v == s.methods[1].second.v);
}

TEST_CASE("augmentation is deterministic given the rng state") {
  Rng sample_rng(9);
  const Sample s = random_sample(12, 12, sample_rng);
  AugmentConfig cfg;
  cfg.enable_crop = true;
  cfg.crop_w = 8;
  cfg.crop_h = 8;
  cfg.flip_h_prob = 0.5;
  cfg.flip_v_prob = 0.5;
  cfg.enable_color = true;
  cfg.brightness_range = 0.1;
  cfg.contrast_lo = 0.8;
  cfg.contrast_hi = 1.2;
  cfg.gamma_lo = 0.9;
  cfg.gamma_hi = 1.1;

  Rng r1(77), r2(77);
  const Sample a = augment_sample(s, cfg, r1);
  const Sample b = augment_sample(s, cfg, r2);
  CHECK(a.image0.data == b.image0.data);
  CHECK(a.image1.data == b.image1.data);
  CHECK(a.gt->u == b.gt->u);
  CHECK(a.methods[0].second.u == b.methods[0].second.u);
  CHECK(a.image0.width == 8);
}

TEST_CASE("every raster in a sample gets the same crop and flip") {
  Rng sample_rng(11);
  Sample s = random_sample(10, 10, sample_rng);
  // make gt recognizable: u equals the source x coordinate
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) s.gt->u[s.gt->idx(x, y)] = static_cast<float>(x);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      s.image0.at(x, y, 0) = static_cast<float>(x) / 10.f;

  AugmentConfig cfg;
  cfg.enable_crop = true;
  cfg.crop_w = 4;
  cfg.crop_h = 4;
  Rng rng(13);
  const Sample out = augment_sample(s, cfg, rng);
  // image0's red channel and gt.u encode the same source column
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const float col = out.image0.at(x, y, 0) * 10.f;
      CHECK(out.gt->u[out.gt->idx(x, y)] == doctest::Approx(col));
    }
}

TEST_CASE("error maps commute with a shared flip") {
  Rng rng(17);
  const FlowField est = random_field(6, 5, rng);
  const FlowField gt = random_field(6, 5, rng);
  const ErrorMap before = endpoint_error_map(est, gt);
  const ErrorMap after =
      endpoint_error_map(flip_flow(est, true, true), flip_flow(gt, true, true));
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x)
      CHECK(after.e[after.idx(x, y)] ==
            doctest::Approx(before.e[before.idx(5 - x, 4 - y)]));
}

TEST_CASE("color jitter never touches flow and differs between images") {
  Rng sample_rng(19);
  const Sample s = random_sample(6, 6, sample_rng);
  AugmentConfig cfg;
  cfg.enable_color = true;
  cfg.brightness_range = 0.2;
  Rng rng(21);
  const Sample out = augment_sample(s, cfg, rng);
  CHECK(out.gt->u == s.gt->u);
  CHECK(out.methods[0].second.u == s.methods[0].second.u);
  // brightness offsets are drawn per image
  const float d0 = out.image0.at(0, 0, 0) - s.image0.at(0, 0, 0);
  const float d1 = out.image1.at(0, 0, 0) - s.image1.at(0, 0, 0);
  CHECK(d0 != d1);
}

TEST_CASE("crop larger than the sample is rejected") {
  Rng sample_rng(23);
  const Sample s = random_sample(6, 6, sample_rng);
  AugmentConfig cfg;
  cfg.enable_crop = true;
  cfg.crop_w = 8;
  cfg.crop_h = 8;
  Rng rng(25);
  CHECK_THROWS_AS(augment_sample(s, cfg, rng), RangeError);
}
