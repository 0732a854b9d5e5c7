#include "flowfuse/assess.hpp"

#include <algorithm>
#include <cmath>

#include "flowfuse/checkpoint.hpp"
#include "flowfuse/flowmath.hpp"

namespace flowfuse {

std::string to_string(AssessMode mode) {
  return mode == AssessMode::kL1 ? "l1" : "hinge";
}

AssessMode assess_mode_from_string(const std::string& s) {
  if (s == "l1") return AssessMode::kL1;
  if (s == "hinge") return AssessMode::kHinge;
  throw FormatError("unknown assess mode: '" + s + "' (expected l1 or hinge)");
}

AssessModel AssessModel::create(const ModelConfig& cfg, std::uint64_t seed) {
  AssessModel m;
  m.config = cfg;
  m.seed = seed;
  UNetConfig ncfg;
  ncfg.in_c = cfg.in_channels();
  ncfg.out_c = cfg.out_channels();
  ncfg.levels = cfg.levels;
  ncfg.base_channels = cfg.base_channels;
  ncfg.leaky_slope = cfg.leaky_slope;
  m.net.init(ncfg, seed);
  return m;
}

namespace {

// Copy an interleaved image into tensor channel planes [c0, c0+3).
// Grayscale images are replicated across the three planes.
void blit_image(Tensor& t, int ni, int c0, const ImageBuffer& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(ni, c0 + c, y, x) = img.at(x, y, img.channels == 1 ? 0 : c);
}

void blit_flow(Tensor& t, int ni, int c0, const FlowField& flow) {
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const std::size_t i = flow.idx(x, y);
      t.at(ni, c0, y, x) = flow.u[i] / kFlowNormalizer;
      t.at(ni, c0 + 1, y, x) = flow.v[i] / kFlowNormalizer;
    }
}

void check_dims(int w, int h, const ImageBuffer& img, const char* what) {
  if (img.width != w || img.height != h)
    throw ConsistencyError(std::string("assemble_input: dimension mismatch on ") + what);
}

}  // namespace

Tensor assemble_input_l1(const ImageBuffer& image0, const ImageBuffer& image1,
                         const FlowField& flow) {
  const int w = image0.width, h = image0.height;
  check_dims(w, h, image1, "image1");
  if (flow.width != w || flow.height != h)
    throw ConsistencyError("assemble_input_l1: flow dimension mismatch");
  Tensor t(1, 11, h, w);
  blit_image(t, 0, 0, image0);
  blit_image(t, 0, 3, image1);
  blit_image(t, 0, 6, warp_backward(image1, flow).first);
  blit_flow(t, 0, 9, flow);
  return t;
}

Tensor assemble_input_hinge(const ImageBuffer& image0, const ImageBuffer& image1,
                            const std::vector<const FlowField*>& flows) {
  const int n = static_cast<int>(flows.size());
  if (n < 2) throw ConsistencyError("assemble_input_hinge: need at least 2 methods");
  const int w = image0.width, h = image0.height;
  check_dims(w, h, image1, "image1");
  Tensor t(1, 6 + 5 * n, h, w);
  blit_image(t, 0, 0, image0);
  blit_image(t, 0, 3, image1);
  for (int i = 0; i < n; ++i) {
    const FlowField& f = *flows[static_cast<std::size_t>(i)];
    if (f.width != w || f.height != h)
      throw ConsistencyError("assemble_input_hinge: flow dimension mismatch");
    blit_image(t, 0, 6 + 5 * i, warp_backward(image1, f).first);
    blit_flow(t, 0, 6 + 5 * i + 3, f);
  }
  return t;
}

double loss_l1(const Tensor& pred, const ErrorMap& e_gt, Tensor& d_pred) {
  if (pred.c != 1 || pred.h != e_gt.height || pred.w != e_gt.width)
    throw ShapeError("loss_l1: shape mismatch");
  d_pred = Tensor(pred.n, pred.c, pred.h, pred.w);
  std::int64_t count = 0;
  for (std::size_t i = 0; i < e_gt.size(); ++i)
    if (e_gt.valid[i]) ++count;
  if (count == 0) throw MetricError("loss_l1: no valid pixels");
  double sum = 0.0;
  const float inv = 1.0f / static_cast<float>(count);
  for (int y = 0; y < pred.h; ++y)
    for (int x = 0; x < pred.w; ++x) {
      const std::size_t i = e_gt.idx(x, y);
      if (!e_gt.valid[i]) continue;
      const float diff = pred.at(0, 0, y, x) - e_gt.e[i];
      sum += std::fabs(diff);
      if (diff > 0.f) d_pred.at(0, 0, y, x) = inv;
      else if (diff < 0.f) d_pred.at(0, 0, y, x) = -inv;
      // diff == 0: subgradient 0
    }
  return sum / static_cast<double>(count);
}

double loss_hinge(const Tensor& pred, const std::vector<const ErrorMap*>& e_gt,
                  float margin, Tensor& d_pred) {
  const int n = pred.c;
  if (static_cast<int>(e_gt.size()) != n || n < 2)
    throw ShapeError("loss_hinge: prediction channels must match N >= 2 error maps");
  if (margin <= 0.f) throw RangeError("loss_hinge: margin must be positive");
  for (const ErrorMap* m : e_gt)
    if (m->height != pred.h || m->width != pred.w)
      throw ShapeError("loss_hinge: shape mismatch");

  d_pred = Tensor(pred.n, pred.c, pred.h, pred.w);
  std::int64_t count = 0;
  for (int y = 0; y < pred.h; ++y)
    for (int x = 0; x < pred.w; ++x) {
      bool all_valid = true;
      for (const ErrorMap* m : e_gt)
        if (!m->valid[m->idx(x, y)]) { all_valid = false; break; }
      if (all_valid) ++count;
    }
  if (count == 0) throw MetricError("loss_hinge: no valid pixels");

  double sum = 0.0;
  const float inv = 1.0f / static_cast<float>(count);
  for (int y = 0; y < pred.h; ++y)
    for (int x = 0; x < pred.w; ++x) {
      bool all_valid = true;
      for (const ErrorMap* m : e_gt)
        if (!m->valid[m->idx(x, y)]) { all_valid = false; break; }
      if (!all_valid) continue;
      int j = 0;
      float best = e_gt[0]->e[e_gt[0]->idx(x, y)];
      for (int i = 1; i < n; ++i) {
        const float e = e_gt[static_cast<std::size_t>(i)]->e[e_gt[0]->idx(x, y)];
        if (e < best) { best = e; j = i; }
      }
      const float ej = pred.at(0, j, y, x);
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        const float term = margin + ej - pred.at(0, i, y, x);
        if (term > 0.f) {
          sum += term;
          d_pred.at(0, j, y, x) += inv;
          d_pred.at(0, i, y, x) -= inv;
        }
      }
    }
  return sum / static_cast<double>(count);
}

namespace {

void validate_training_data(const std::vector<Sample>& data, const ModelConfig& mcfg,
                            const TrainConfig& tcfg) {
  if (data.empty()) throw ConsistencyError("train_assessment: empty dataset");
  for (const Sample& s : data) {
    if (!s.gt) throw ConsistencyError("train_assessment: sample without ground truth");
    if (s.methods.size() < 2)
      throw ConsistencyError("train_assessment: sample with fewer than 2 method flows");
    if (mcfg.mode == AssessMode::kHinge &&
        static_cast<int>(s.methods.size()) != mcfg.num_methods)
      throw ConsistencyError("train_assessment: method count does not match model config N");
    if (tcfg.crop_w > s.image0.width || tcfg.crop_h > s.image0.height)
      throw RangeError("train_assessment: crop larger than scene");
  }
  const int div = 1 << mcfg.levels;
  if (tcfg.crop_w % div != 0 || tcfg.crop_h % div != 0)
    throw ShapeError("train_assessment: crop must be divisible by 2^levels");
}

}  // namespace

AssessModel train_assessment(const std::vector<Sample>& data, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, std::vector<TrainLogEntry>* log) {
  validate_training_data(data, mcfg, tcfg);
  AssessModel model = AssessModel::create(mcfg, tcfg.seed);

  Rng rng(Rng::derive(tcfg.seed, 0x7261696eULL));
  AugmentConfig aug = tcfg.augment;
  aug.enable_crop = true;
  aug.crop_w = tcfg.crop_w;
  aug.crop_h = tcfg.crop_h;

  std::vector<float> params = model.net.flatten_params();
  AdamState adam;
  adam.init(params.size());
  const AdamConfig acfg{tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.eps};

  UNetGrads grads, sample_grads;
  grads.init_like(model.net);
  sample_grads.init_like(model.net);

  for (std::int64_t iter = 0; iter < tcfg.iterations; ++iter) {
    grads.init_like(model.net);
    double batch_loss = 0.0;
    for (int b = 0; b < tcfg.batch_size; ++b) {
      const std::size_t scene =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
      const Sample aug_sample = augment_sample(data[scene], aug, rng);

      Tensor x, d_pred;
      double loss;
      if (mcfg.mode == AssessMode::kL1) {
        const std::size_t mi = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(aug_sample.methods.size()) - 1));
        const FlowField& mf = aug_sample.methods[mi].second;
        x = assemble_input_l1(aug_sample.image0, aug_sample.image1, mf);
        // The head regresses errors in flow-normalized units: a sign-gradient
        // L1 moves the output by at most ~lr per Adam step, so pixel-unit
        // targets (several px) sit far outside the reachable range at desk
        // scale. predict_error_maps rescales back to pixels.
        ErrorMap e_gt = endpoint_error_map(mf, *aug_sample.gt);
        for (float& e : e_gt.e) e /= kFlowNormalizer;
        UNetTape tape;
        Tensor pred = unet_forward(model.net, x, &tape);
        loss = loss_l1(pred, e_gt, d_pred);
        sample_grads.init_like(model.net);
        unet_backward(model.net, tape, d_pred, sample_grads);
      } else {
        std::vector<const FlowField*> flows;
        std::vector<ErrorMap> e_maps;
        for (const auto& [name, f] : aug_sample.methods) flows.push_back(&f);
        for (const FlowField* f : flows)
          e_maps.push_back(endpoint_error_map(*f, *aug_sample.gt));
        std::vector<const ErrorMap*> e_ptrs;
        for (const ErrorMap& m : e_maps) e_ptrs.push_back(&m);
        x = assemble_input_hinge(aug_sample.image0, aug_sample.image1, flows);
        UNetTape tape;
        Tensor pred = unet_forward(model.net, x, &tape);
        loss = loss_hinge(pred, e_ptrs, tcfg.margin, d_pred);
        sample_grads.init_like(model.net);
        unet_backward(model.net, tape, d_pred, sample_grads);
      }
      batch_loss += loss;
      grads.add(sample_grads);
    }
    grads.scale(1.0f / static_cast<float>(tcfg.batch_size));
    adam_step(params, grads.flatten(), adam, acfg);
    model.net.load_params(params);
    if (log) log->push_back({iter, batch_loss / tcfg.batch_size});
  }
  model.iterations_trained = tcfg.iterations;
  return model;
}

std::vector<ErrorMap> predict_error_maps(
    const AssessModel& model, const ImageBuffer& image0, const ImageBuffer& image1,
    const std::vector<std::pair<std::string, FlowField>>& methods) {
  const int n = static_cast<int>(methods.size());
  if (n < 2) throw ConsistencyError("predict_error_maps: need at least 2 methods");
  if (model.config.mode == AssessMode::kHinge && n != model.config.num_methods)
    throw ConsistencyError("predict_error_maps: method count does not match model config N");

  std::vector<ErrorMap> out;
  if (model.config.mode == AssessMode::kL1) {
    for (const auto& [name, flow] : methods) {
      const Tensor x = assemble_input_l1(image0, image1, flow);
      const Tensor pred = unet_forward(model.net, x);
      ErrorMap m(flow.width, flow.height);
      for (int y = 0; y < pred.h; ++y)
        for (int xx = 0; xx < pred.w; ++xx) {
          // undo the flow-normalized training units (see train_assessment)
          m.e[m.idx(xx, y)] = pred.at(0, 0, y, xx) * kFlowNormalizer;
          m.valid[m.idx(xx, y)] = flow.valid[flow.idx(xx, y)];
        }
      out.push_back(std::move(m));
    }
  } else {
    std::vector<const FlowField*> flows;
    for (const auto& [name, f] : methods) flows.push_back(&f);
    const Tensor x = assemble_input_hinge(image0, image1, flows);
    const Tensor pred = unet_forward(model.net, x);
    for (int i = 0; i < n; ++i) {
      const FlowField& flow = methods[static_cast<std::size_t>(i)].second;
      ErrorMap m(flow.width, flow.height);
      for (int y = 0; y < pred.h; ++y)
        for (int xx = 0; xx < pred.w; ++xx) {
          m.e[m.idx(xx, y)] = pred.at(0, i, y, xx);
          m.valid[m.idx(xx, y)] = flow.valid[flow.idx(xx, y)];
        }
      out.push_back(std::move(m));
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const AssessModel& model) {
  nlohmann::ordered_json header;
  header["kind"] = "assess";
  header["mode"] = to_string(model.config.mode);
  header["num_methods"] = model.config.num_methods;
  header["levels"] = model.config.levels;
  header["base_channels"] = model.config.base_channels;
  header["leaky_slope"] = model.config.leaky_slope;
  header["seed"] = model.seed;
  header["iterations"] = model.iterations_trained;
  const std::vector<float> params = model.net.flatten_params();
  header["param_count"] = params.size();
  write_checkpoint_file(path, header, params);
}

AssessModel load_checkpoint(const std::filesystem::path& path) {
  auto [header, params] = read_checkpoint_file(path);
  if (header.value("kind", "") != "assess")
    throw FormatError("checkpoint is not an assessment model: " + path.string());
  ModelConfig cfg;
  cfg.mode = assess_mode_from_string(header.at("mode").get<std::string>());
  cfg.num_methods = header.at("num_methods").get<int>();
  cfg.levels = header.at("levels").get<int>();
  cfg.base_channels = header.at("base_channels").get<int>();
  cfg.leaky_slope = header.at("leaky_slope").get<float>();
  AssessModel model = AssessModel::create(cfg, header.at("seed").get<std::uint64_t>());
  model.iterations_trained = header.at("iterations").get<std::int64_t>();
  model.net.load_params(params);
  return model;
}

}  // namespace flowfuse
