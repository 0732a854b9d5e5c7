#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace flowfuse {

// NCHW float tensor.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.f) {}

  std::size_t size() const { return data.size(); }

  float& at(int ni, int ci, int yi, int xi) {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + yi) * w + xi];
  }
  const float& at(int ni, int ci, int yi, int xi) const {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + yi) * w + xi];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flowfuse
