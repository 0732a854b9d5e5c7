#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "flowfuse/augment.hpp"
#include "flowfuse/flow_types.hpp"
#include "flowfuse/net.hpp"

namespace flowfuse {

enum class AssessMode { kL1, kHinge };

std::string to_string(AssessMode mode);
AssessMode assess_mode_from_string(const std::string& s);

// Flow channels are divided by this before entering the network.
constexpr float kFlowNormalizer = 20.0f;

struct ModelConfig {
  AssessMode mode = AssessMode::kL1;
  int num_methods = 2;  // N; used in hinge mode
  int levels = 3;
  int base_channels = 16;
  float leaky_slope = 0.1f;

  int in_channels() const {
    return mode == AssessMode::kL1 ? 11 : 6 + 5 * num_methods;
  }
  int out_channels() const { return mode == AssessMode::kL1 ? 1 : num_methods; }
};

struct AssessModel {
  ModelConfig config;
  UNet net;
  std::uint64_t seed = 0;
  std::int64_t iterations_trained = 0;

  static AssessModel create(const ModelConfig& cfg, std::uint64_t seed);
};

struct TrainConfig {
  std::int64_t iterations = 1000;
  int batch_size = 8;
  int crop_w = 64;
  int crop_h = 64;
  float learning_rate = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float margin = 1.0f;
  std::uint64_t seed = 0;
  AugmentConfig augment{.flip_h_prob = 0.5, .flip_v_prob = 0.5};
};

// [image0(3) | image1(3) | warp(image1, flow)(3) | flow/20 (2)] -> 11 channels.
Tensor assemble_input_l1(const ImageBuffer& image0, const ImageBuffer& image1,
                         const FlowField& flow);

// [image0(3) | image1(3)] then per method [warped(3) | flow/20 (2)] -> 6+5N.
Tensor assemble_input_hinge(const ImageBuffer& image0, const ImageBuffer& image1,
                            const std::vector<const FlowField*>& flows);

// Mean |e_gt - pred| over valid pixels; subgradient of |.| at 0 is 0.
// d_pred gets d(loss)/d(pred) for the single-channel prediction.
double loss_l1(const Tensor& pred, const ErrorMap& e_gt, Tensor& d_pred);

// Multi-class hinge: per valid pixel, with j = argmin of ground-truth error
// (ties -> lowest index), sum over i != j of max(0, m + e_j - e_i), averaged
// over valid pixels. Predictions are the N channels of `pred`.
double loss_hinge(const Tensor& pred, const std::vector<const ErrorMap*>& e_gt,
                  float margin, Tensor& d_pred);

struct TrainLogEntry {
  std::int64_t iteration;
  double loss;
};

// In-memory training set; every sample must carry gt and >= 2 method flows.
AssessModel train_assessment(const std::vector<Sample>& data, const ModelConfig& mcfg,
                             const TrainConfig& tcfg,
                             std::vector<TrainLogEntry>* log = nullptr);

// L1 mode: one forward pass per method; hinge mode: one joint pass.
// Output validity mirrors each method's flow validity.
std::vector<ErrorMap> predict_error_maps(
    const AssessModel& model, const ImageBuffer& image0, const ImageBuffer& image1,
    const std::vector<std::pair<std::string, FlowField>>& methods);

// Checkpoint: uint32-LE header length, JSON header (kind, config, seed,
// iterations), then parameters as raw float32-LE in flatten_params order.
void save_checkpoint(const std::filesystem::path& path, const AssessModel& model);
AssessModel load_checkpoint(const std::filesystem::path& path);

}  // namespace flowfuse
