#include "doctest.h"

#include <cmath>

#include "flowfuse/flowmath.hpp"
#include "flowfuse/rng.hpp"

using namespace flowfuse;

namespace {

FlowField random_field(int w, int h, Rng& rng, double invalid_prob = 0.0) {
  FlowField f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = static_cast<float>(rng.uniform(-10.0, 10.0));
    f.v[i] = static_cast<float>(rng.uniform(-10.0, 10.0));
    if (invalid_prob > 0.0 && rng.bernoulli(invalid_prob)) f.valid[i] = 0;
  }
  return f;
}

}  // namespace

TEST_CASE("endpoint error is the Euclidean distance") {
  FlowField est(1, 1), gt(1, 1);
  gt.u[0] = 3.f;
  gt.v[0] = 4.f;
  const ErrorMap m = endpoint_error_map(est, gt);
  CHECK(m.e[0] == doctest::Approx(5.0));
}

TEST_CASE("endpoint error of a field against itself is zero; symmetric") {
  Rng rng(2);
  const FlowField f = random_field(5, 4, rng);
  const FlowField g = random_field(5, 4, rng);
  const ErrorMap self = endpoint_error_map(f, f);
  for (float e : self.e) CHECK(e == 0.f);
  const ErrorMap fg = endpoint_error_map(f, g);
  const ErrorMap gf = endpoint_error_map(g, f);
  CHECK(fg.e == gf.e);
}

TEST_CASE("endpoint error matches a per-pixel scalar recomputation") {
  Rng rng(7);
  const FlowField est = random_field(4, 4, rng, 0.2);
  const FlowField gt = random_field(4, 4, rng, 0.2);
  const ErrorMap m = endpoint_error_map(est, gt);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const std::size_t i = m.idx(x, y);
      const bool valid = est.valid[i] && gt.valid[i];
      CHECK(static_cast<bool>(m.valid[i]) == valid);
      if (valid) {
        const double du = static_cast<double>(est.u[i]) - gt.u[i];
        const double dv = static_cast<double>(est.v[i]) - gt.v[i];
        CHECK(m.e[i] == static_cast<float>(std::sqrt(static_cast<float>(du * du + dv * dv))));
      }
    }
}

TEST_CASE("endpoint error dimension mismatch") {
  CHECK_THROWS_AS(endpoint_error_map(FlowField(2, 2), FlowField(3, 2)), ConsistencyError);
}

TEST_CASE("aee averages over valid pixels only") {
  ErrorMap m(2, 1);
  m.e = {1.0f, 100.0f};
  m.valid = {1, 0};
  CHECK(aee(m) == doctest::Approx(1.0));

  ErrorMap uniform(3, 3);
  for (float& e : uniform.e) e = 2.5f;
  CHECK(aee(uniform) == doctest::Approx(2.5));

  ErrorMap empty(2, 2);
  empty.valid = {0, 0, 0, 0};
  CHECK_THROWS_AS(aee(empty), MetricError);
}

TEST_CASE("fl outlier definition") {
  FlowField gt(1, 1);
  ErrorMap m(1, 1);

  gt.u[0] = 10.f;  // |gt| = 10
  m.e[0] = 4.f;
  CHECK(fl_outlier_rate(m, gt) == doctest::Approx(1.0));  // 4>3 and 4>0.5
  m.e[0] = 2.9f;
  CHECK(fl_outlier_rate(m, gt) == doctest::Approx(0.0));  // fails 3px test
  gt.u[0] = 100.f;
  m.e[0] = 4.f;
  CHECK(fl_outlier_rate(m, gt) == doctest::Approx(0.0));  // 4 < 5% of 100
}

TEST_CASE("fl rate is monotone in e and invariant to joint rescaling") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = 5, h = 5;
    const FlowField gt = random_field(w, h, rng);
    ErrorMap m(w, h);
    for (float& e : m.e) e = static_cast<float>(rng.uniform(0.0, 8.0));
    const double base = fl_outlier_rate(m, gt);

    ErrorMap bumped = m;
    for (float& e : bumped.e) e += 0.5f;
    CHECK(fl_outlier_rate(bumped, gt) >= base);

    const double s = 3.0;
    ErrorMap scaled = m;
    FlowField gts = gt;
    for (float& e : scaled.e) e *= static_cast<float>(s);
    for (std::size_t i = 0; i < gts.size(); ++i) { gts.u[i] *= s; gts.v[i] *= s; }
    CHECK(fl_outlier_rate(scaled, gts, 3.0 * s, 0.05) == doctest::Approx(base));
  }
}

TEST_CASE("warp with zero flow is the identity, all inbound") {
  Rng rng(4);
  ImageBuffer img(6, 5, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  const FlowField zero(6, 5);
  const auto [out, inbound] = warp_backward(img, zero);
  CHECK(out.data == img.data);
  for (auto b : inbound) CHECK(b == 1);
}

TEST_CASE("warp shifts columns and clamps at the border") {
  ImageBuffer img(3, 1, 1);
  img.at(0, 0, 0) = 0.f;
  img.at(1, 0, 0) = 10.f / 255.f;
  img.at(2, 0, 0) = 20.f / 255.f;
  FlowField flow(3, 1);
  for (float& u : flow.u) u = 1.f;
  const auto [out, inbound] = warp_backward(img, flow);
  CHECK(out.at(0, 0, 0) == doctest::Approx(10.f / 255.f));
  CHECK(out.at(1, 0, 0) == doctest::Approx(20.f / 255.f));
  CHECK(out.at(2, 0, 0) == doctest::Approx(20.f / 255.f));  // clamped
  CHECK(inbound[0] == 1);
  CHECK(inbound[2] == 0);
}

TEST_CASE("warp interpolates at the bilinear midpoint") {
  ImageBuffer img(2, 1, 1);
  img.at(0, 0, 0) = 0.f;
  img.at(1, 0, 0) = 10.f / 255.f;
  FlowField flow(2, 1);
  flow.u[0] = 0.5f;
  const auto [out, inbound] = warp_backward(img, flow);
  CHECK(out.at(0, 0, 0) == doctest::Approx(5.f / 255.f));
}

TEST_CASE("integer in-bounds flows reduce warp to exact lookup") {
  Rng rng(31);
  ImageBuffer img(8, 8, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  FlowField flow(8, 8);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    flow.u[i] = static_cast<float>(rng.uniform_int(-2, 2));
    flow.v[i] = static_cast<float>(rng.uniform_int(-2, 2));
  }
  const auto [out, inbound] = warp_backward(img, flow);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const std::size_t i = flow.idx(x, y);
      const int sx = x + static_cast<int>(flow.u[i]);
      const int sy = y + static_cast<int>(flow.v[i]);
      if (sx < 0 || sx >= 8 || sy < 0 || sy >= 8) continue;
      for (int c = 0; c < 3; ++c)
        CHECK(std::fabs(out.at(x, y, c) - img.at(sx, sy, c)) <= 1e-6f);
    }
}

TEST_CASE("flow color coding: white center, black invalid, complementary hues") {
  FlowField zero(2, 2);
  const ImageBuffer white = flow_to_color(zero, 1.0);
  for (float v : white.data) CHECK(v == doctest::Approx(1.0));

  FlowField invalid(2, 2);
  for (auto& b : invalid.valid) b = 0;
  const ImageBuffer black = flow_to_color(invalid, 1.0);
  for (float v : black.data) CHECK(v == doctest::Approx(0.0));

  FlowField lr(2, 1);
  lr.u[0] = 4.f;
  lr.u[1] = -4.f;
  const ImageBuffer c = flow_to_color(lr, 4.0);
  // full saturation: at least one channel at zero, one at max
  for (int px = 0; px < 2; ++px) {
    float lo = 1.f, hi = 0.f;
    for (int ch = 0; ch < 3; ++ch) {
      lo = std::min(lo, c.at(px, 0, ch));
      hi = std::max(hi, c.at(px, 0, ch));
    }
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(1.0));
  }
  // complementary: hues differ by 180 degrees => channel patterns swap extremes
  CHECK(c.at(0, 0, 0) != doctest::Approx(c.at(1, 0, 0)));
}
