#include "flowfuse/student.hpp"

#include <cmath>

#include "flowfuse/checkpoint.hpp"
#include "flowfuse/flowmath.hpp"

namespace flowfuse {

StudentModel StudentModel::create(const StudentConfig& cfg, std::uint64_t seed) {
  StudentModel m;
  m.config = cfg;
  m.seed = seed;
  UNetConfig ncfg;
  ncfg.in_c = 6;
  ncfg.out_c = 2;
  ncfg.levels = cfg.levels;
  ncfg.base_channels = cfg.base_channels;
  ncfg.leaky_slope = cfg.leaky_slope;
  m.net.init(ncfg, seed);
  return m;
}

namespace {

void blit_image(Tensor& t, int c0, const ImageBuffer& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(0, c0 + c, y, x) = img.at(x, y, img.channels == 1 ? 0 : c);
}

}  // namespace

Tensor assemble_student_input(const ImageBuffer& image0, const ImageBuffer& image1) {
  if (image0.width != image1.width || image0.height != image1.height)
    throw ConsistencyError("assemble_student_input: dimension mismatch");
  Tensor t(1, 6, image0.height, image0.width);
  blit_image(t, 0, image0);
  blit_image(t, 3, image1);
  return t;
}

double loss_epe(const Tensor& pred, const FlowField& gt, Tensor& d_pred) {
  if (pred.c != 2 || pred.h != gt.height || pred.w != gt.width)
    throw ShapeError("loss_epe: shape mismatch");
  d_pred = Tensor(pred.n, pred.c, pred.h, pred.w);
  std::int64_t count = 0;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt.valid[i]) ++count;
  if (count == 0) throw MetricError("loss_epe: no valid pixels");

  double sum = 0.0;
  const float inv = 1.0f / static_cast<float>(count);
  for (int y = 0; y < pred.h; ++y)
    for (int x = 0; x < pred.w; ++x) {
      const std::size_t i = gt.idx(x, y);
      if (!gt.valid[i]) continue;
      const float du = pred.at(0, 0, y, x) * kFlowNormalizer - gt.u[i];
      const float dv = pred.at(0, 1, y, x) * kFlowNormalizer - gt.v[i];
      const float d = std::sqrt(du * du + dv * dv);
      sum += d;
      if (d > 1e-8f) {
        d_pred.at(0, 0, y, x) = inv * kFlowNormalizer * du / d;
        d_pred.at(0, 1, y, x) = inv * kFlowNormalizer * dv / d;
      }
    }
  return sum / static_cast<double>(count);
}

StudentModel train_student(const std::vector<Sample>& data, const StudentConfig& scfg,
                           const TrainConfig& tcfg, const StudentModel* init,
                           std::vector<TrainLogEntry>* log) {
  if (data.empty()) throw ConsistencyError("train_student: empty dataset");
  for (const Sample& s : data) {
    if (!s.gt) throw ConsistencyError("train_student: sample without ground truth");
    if (tcfg.crop_w > s.image0.width || tcfg.crop_h > s.image0.height)
      throw RangeError("train_student: crop larger than scene");
  }
  const int div = 1 << scfg.levels;
  if (tcfg.crop_w % div != 0 || tcfg.crop_h % div != 0)
    throw ShapeError("train_student: crop must be divisible by 2^levels");

  StudentModel model = init ? *init : StudentModel::create(scfg, tcfg.seed);

  Rng rng(Rng::derive(tcfg.seed, 0x73747564ULL));
  AugmentConfig aug = tcfg.augment;
  aug.enable_crop = true;
  aug.crop_w = tcfg.crop_w;
  aug.crop_h = tcfg.crop_h;

  std::vector<float> params = model.net.flatten_params();
  AdamState adam;
  adam.init(params.size());
  const AdamConfig acfg{tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.eps};

  UNetGrads grads, sample_grads;
  for (std::int64_t iter = 0; iter < tcfg.iterations; ++iter) {
    grads.init_like(model.net);
    double batch_loss = 0.0;
    for (int b = 0; b < tcfg.batch_size; ++b) {
      const std::size_t scene =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
      const Sample s = augment_sample(data[scene], aug, rng);
      const Tensor x = assemble_student_input(s.image0, s.image1);
      UNetTape tape;
      const Tensor pred = unet_forward(model.net, x, &tape);
      Tensor d_pred;
      batch_loss += loss_epe(pred, *s.gt, d_pred);
      sample_grads.init_like(model.net);
      unet_backward(model.net, tape, d_pred, sample_grads);
      grads.add(sample_grads);
    }
    grads.scale(1.0f / static_cast<float>(tcfg.batch_size));
    adam_step(params, grads.flatten(), adam, acfg);
    model.net.load_params(params);
    if (log) log->push_back({iter, batch_loss / tcfg.batch_size});
  }
  model.iterations_trained += tcfg.iterations;
  return model;
}

FlowField predict_flow(const StudentModel& model, const ImageBuffer& image0,
                       const ImageBuffer& image1) {
  const Tensor x = assemble_student_input(image0, image1);
  const Tensor pred = unet_forward(model.net, x);
  FlowField f(image0.width, image0.height);
  for (int y = 0; y < pred.h; ++y)
    for (int xx = 0; xx < pred.w; ++xx) {
      const std::size_t i = f.idx(xx, y);
      f.u[i] = pred.at(0, 0, y, xx) * kFlowNormalizer;
      f.v[i] = pred.at(0, 1, y, xx) * kFlowNormalizer;
    }
  return f;
}

EvalResult eval_student(const StudentModel& model, const std::vector<Sample>& data) {
  EvalResult r;
  double aee_weighted = 0.0, fl_weighted = 0.0;
  std::int64_t total = 0;
  for (const Sample& s : data) {
    if (!s.gt) throw ConsistencyError("eval_student: sample without ground truth");
    const FlowField pred = predict_flow(model, s.image0, s.image1);
    const FlowStats stats = flow_stats(pred, *s.gt);
    aee_weighted += stats.aee * static_cast<double>(stats.valid_count);
    fl_weighted += stats.fl_rate * static_cast<double>(stats.valid_count);
    total += stats.valid_count;
    r.per_entry.push_back(stats);
  }
  if (total == 0) throw MetricError("eval_student: no valid pixels in dataset");
  r.aggregate.aee = aee_weighted / static_cast<double>(total);
  r.aggregate.fl_rate = fl_weighted / static_cast<double>(total);
  r.aggregate.valid_count = total;
  return r;
}

void save_student_checkpoint(const std::filesystem::path& path, const StudentModel& model) {
  nlohmann::ordered_json header;
  header["kind"] = "student";
  header["levels"] = model.config.levels;
  header["base_channels"] = model.config.base_channels;
  header["leaky_slope"] = model.config.leaky_slope;
  header["seed"] = model.seed;
  header["iterations"] = model.iterations_trained;
  const std::vector<float> params = model.net.flatten_params();
  header["param_count"] = params.size();
  write_checkpoint_file(path, header, params);
}

StudentModel load_student_checkpoint(const std::filesystem::path& path) {
  auto [header, params] = read_checkpoint_file(path);
  if (header.value("kind", "") != "student")
    throw FormatError("checkpoint is not a student model: " + path.string());
  StudentConfig cfg;
  cfg.levels = header.at("levels").get<int>();
  cfg.base_channels = header.at("base_channels").get<int>();
  cfg.leaky_slope = header.at("leaky_slope").get<float>();
  StudentModel model = StudentModel::create(cfg, header.at("seed").get<std::uint64_t>());
  model.iterations_trained = header.at("iterations").get<std::int64_t>();
  model.net.load_params(params);
  return model;
}

}  // namespace flowfuse
