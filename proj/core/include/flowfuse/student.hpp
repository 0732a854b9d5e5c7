#pragma once

#include <filesystem>
#include <vector>

#include "flowfuse/assess.hpp"
#include "flowfuse/flow_types.hpp"
#include "flowfuse/net.hpp"

namespace flowfuse {

// Small direct flow regressor: [image0(3) | image1(3)] -> flow/20 (2 channels).
struct StudentConfig {
  int levels = 3;
  int base_channels = 16;
  float leaky_slope = 0.1f;
};

struct StudentModel {
  StudentConfig config;
  UNet net;
  std::uint64_t seed = 0;
  std::int64_t iterations_trained = 0;

  static StudentModel create(const StudentConfig& cfg, std::uint64_t seed);
};

Tensor assemble_student_input(const ImageBuffer& image0, const ImageBuffer& image1);

// Mean endpoint error between prediction (network output * 20) and gt over
// valid pixels, with d(loss)/d(raw output) in d_pred.
double loss_epe(const Tensor& pred, const FlowField& gt, Tensor& d_pred);

// Supervised training against each sample's gt. When `init` is given the
// loop starts from those weights (finetuning); otherwise from a fresh
// initialization. Supervision by proxy ground truth is the same loop with
// the proxy manifest's gt fields.
StudentModel train_student(const std::vector<Sample>& data, const StudentConfig& scfg,
                           const TrainConfig& tcfg, const StudentModel* init = nullptr,
                           std::vector<TrainLogEntry>* log = nullptr);

FlowField predict_flow(const StudentModel& model, const ImageBuffer& image0,
                       const ImageBuffer& image1);

struct EvalResult {
  std::vector<FlowStats> per_entry;
  FlowStats aggregate;  // micro-average, weighted by valid pixel count
};

EvalResult eval_student(const StudentModel& model, const std::vector<Sample>& data);

void save_student_checkpoint(const std::filesystem::path& path, const StudentModel& model);
StudentModel load_student_checkpoint(const std::filesystem::path& path);

}  // namespace flowfuse
