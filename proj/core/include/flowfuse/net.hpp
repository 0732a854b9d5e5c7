#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowfuse/rng.hpp"
#include "flowfuse/tensor.hpp"

namespace flowfuse {

// 2D convolution layer. Weights laid out [out_c][in_c][ky][kx].
struct ConvLayer {
  int in_c = 0, out_c = 0, kernel = 3, stride = 1, pad = 1;
  std::vector<float> weights;
  std::vector<float> bias;

  void init(int in, int out, int k, int s, int p, Rng& rng);
  std::size_t param_count() const { return weights.size() + bias.size(); }
};

Tensor conv_forward(const ConvLayer& layer, const Tensor& x);
// d_in is accumulated from scratch (overwritten); d_w/d_b are accumulated into.
void conv_backward(const ConvLayer& layer, const Tensor& x, const Tensor& d_out,
                   Tensor& d_in, std::vector<float>& d_w, std::vector<float>& d_b);

void leaky_relu_inplace(Tensor& t, float slope);
// Backward through leaky-ReLU using the activation output to recover the sign.
void leaky_relu_backward_inplace(const Tensor& activated, Tensor& grad, float slope);

Tensor upsample2x_nearest(const Tensor& x);
Tensor upsample2x_backward(const Tensor& d_out);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d_cat, int c_a, Tensor& d_a, Tensor& d_b);

// Encoder-decoder with skip connections:
//  - `levels` encoder blocks: 3x3 conv stride 2 (channels base, 2*base, ...),
//    leaky-ReLU;
//  - `levels` decoder blocks: 2x nearest upsample, concat the encoder output
//    at the matching resolution (the raw network input for the final,
//    full-resolution block), 3x3 conv stride 1, leaky-ReLU;
//  - final 1x1 conv to out_c, no output nonlinearity.
// Input H and W must be divisible by 2^levels.
struct UNetConfig {
  int in_c = 0;
  int out_c = 0;
  int levels = 3;
  int base_channels = 16;
  float leaky_slope = 0.1f;
};

struct UNet {
  UNetConfig cfg;
  std::uint64_t init_seed = 0;
  std::vector<ConvLayer> encoder;
  std::vector<ConvLayer> decoder;
  ConvLayer head;

  void init(const UNetConfig& config, std::uint64_t seed);
  std::size_t param_count() const;

  // Flat parameter order: encoder convs, decoder convs, head; each conv
  // contributes weights then bias. Used by checkpoints and the optimizer.
  std::vector<float> flatten_params() const;
  void load_params(const std::vector<float>& flat);
};

// Saved activations for one forward pass, needed by backward.
struct UNetTape {
  Tensor input;
  std::vector<Tensor> enc_out;   // post-activation per encoder block
  std::vector<Tensor> dec_cat;   // concatenated decoder inputs
  std::vector<Tensor> dec_out;   // post-activation per decoder block
  Tensor output;
};

Tensor unet_forward(const UNet& net, const Tensor& x, UNetTape* tape = nullptr);

struct UNetGrads {
  std::vector<std::vector<float>> enc_w, enc_b;
  std::vector<std::vector<float>> dec_w, dec_b;
  std::vector<float> head_w, head_b;

  void init_like(const UNet& net);
  void add(const UNetGrads& other);
  void scale(float s);
  std::vector<float> flatten() const;
};

// Reverse-mode gradients of all parameters given d(loss)/d(output).
void unet_backward(const UNet& net, const UNetTape& tape, const Tensor& d_out,
                   UNetGrads& grads);

struct AdamState {
  std::vector<float> m, v;
  std::int64_t t = 0;
  void init(std::size_t n) { m.assign(n, 0.f); v.assign(n, 0.f); t = 0; }
};

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

void adam_step(std::vector<float>& params, const std::vector<float>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace flowfuse
