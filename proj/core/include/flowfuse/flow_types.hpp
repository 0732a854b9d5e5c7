#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowfuse {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense 2-channel displacement field with per-pixel validity.
// u positive = rightward, v positive = downward. Row-major storage.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;
  std::vector<std::uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h),
        u(static_cast<std::size_t>(w) * h, 0.f),
        v(static_cast<std::size_t>(w) * h, 0.f),
        valid(static_cast<std::size_t>(w) * h, 1) {}

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
};

// Image with values in [0,1]; interleaved per-pixel channels, row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.f) {}

  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Per-pixel error values (nonnegative in L1/ground-truth mode; unconstrained
// ranking scores in hinge mode).
struct ErrorMap {
  int width = 0;
  int height = 0;
  std::vector<float> e;
  std::vector<std::uint8_t> valid;

  ErrorMap() = default;
  ErrorMap(int w, int h)
      : width(w), height(h),
        e(static_cast<std::size_t>(w) * h, 0.f),
        valid(static_cast<std::size_t>(w) * h, 1) {}

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
};

struct FlowStats {
  double aee = 0.0;
  double fl_rate = 0.0;
  std::int64_t valid_count = 0;
};

}  // namespace flowfuse
