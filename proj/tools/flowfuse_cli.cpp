// flowfuse: command-line front end for the flow fusion toolkit.
// Reports go to stdout as JSON, logs to stderr, artifacts to disk.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowfuse/assess.hpp"
#include "flowfuse/dataset.hpp"
#include "flowfuse/flowio.hpp"
#include "flowfuse/flowmath.hpp"
#include "flowfuse/fusion.hpp"
#include "flowfuse/student.hpp"
#include "flowfuse/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace flowfuse;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FLOWFUSE_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 0;
}

fs::path manifest_path(const fs::path& data) {
  if (fs::is_directory(data)) return data / "manifest.json";
  return data;
}

std::string entry_stem(std::size_t i) {
  std::ostringstream s;
  s.width(6);
  s.fill('0');
  s << i;
  return s.str();
}

// Per-entry work with deterministic merged output order.
template <typename Fn>
void parallel_entries(std::size_t count, int jobs, Fn&& fn) {
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t)
    threads.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < count;
           i += static_cast<std::size_t>(jobs))
        fn(i);
    });
  for (auto& th : threads) th.join();
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

ordered_json stats_json(const FlowStats& s) {
  return {{"aee", s.aee}, {"fl_rate", s.fl_rate}, {"valid_count", s.valid_count}};
}

void emit_report(ordered_json& report, const Timer& timer) {
  report["wall_time_s"] = timer.seconds();
  std::cout << report.dump(2) << "\n";
}

int run_gen_synth(int count, std::uint64_t seed, const fs::path& out,
                  const std::string& methods) {
  Timer timer;
  std::vector<CorruptionSpec> corruptions;
  std::stringstream ss(methods);
  std::string name;
  while (std::getline(ss, name, ',')) corruptions.push_back(corruption_from_name(name));
  SceneSpec spec;
  const DatasetManifest m = gen_dataset(count, spec, corruptions, seed, out);
  ordered_json report;
  report["command"] = "gen-synth";
  report["config"] = {{"count", count}, {"methods", methods}, {"out", out.string()}};
  report["seed"] = seed;
  report["entries_written"] = m.entries.size();
  emit_report(report, timer);
  return 0;
}

int run_train_assess(const fs::path& data, const std::string& mode, std::int64_t iters,
                     std::uint64_t seed, const fs::path& out, double lr, int batch) {
  Timer timer;
  const DatasetManifest manifest = read_manifest(manifest_path(data));
  const std::vector<Sample> samples = load_samples(manifest);
  ModelConfig mcfg;
  mcfg.mode = assess_mode_from_string(mode);
  mcfg.num_methods = samples.empty() ? 2 : static_cast<int>(samples[0].methods.size());
  TrainConfig tcfg;
  tcfg.iterations = iters;
  tcfg.seed = seed;
  tcfg.learning_rate = static_cast<float>(lr);
  tcfg.batch_size = batch;
  std::vector<TrainLogEntry> log;
  const AssessModel model = train_assessment(samples, mcfg, tcfg, &log);
  save_checkpoint(out, model);

  ordered_json report;
  report["command"] = "train-assess";
  report["config"] = {{"mode", mode}, {"iters", iters}, {"lr", lr},
                      {"batch", batch}, {"num_methods", mcfg.num_methods}};
  report["seed"] = seed;
  report["final_loss"] = log.empty() ? 0.0 : log.back().loss;
  report["checkpoint"] = out.string();
  emit_report(report, timer);
  return 0;
}

// mode: "oracle" uses gt errors, otherwise the model predicts them.
int run_fuse_like(const std::string& command, const fs::path& data,
                  const AssessModel* model, const fs::path& out, int jobs,
                  std::uint64_t seed) {
  Timer timer;
  const DatasetManifest manifest = read_manifest(manifest_path(data));
  fs::create_directories(out);

  struct EntryResult {
    ordered_json json;
  };
  std::vector<EntryResult> results(manifest.entries.size());

  parallel_entries(manifest.entries.size(), jobs, [&](std::size_t i) {
    FlowBundle bundle = make_bundle(load_bundle(manifest, i));
    FlowField fused;
    if (command == "oracle") {
      fused = oracle_fuse(bundle).first;
    } else {
      fused = predicted_fuse(bundle, *model).flow;
    }
    const std::string stem = entry_stem(i);
    write_flo_file(out / (stem + ".flo"), fused);
    write_image_file(out / (stem + "_color.ppm"), flow_to_color(fused));

    ordered_json ej;
    ej["entry"] = i;
    if (bundle.gt) {
      ej["fused"] = stats_json(flow_stats(fused, *bundle.gt));
      ordered_json methods = ordered_json::object();
      for (const auto& [name, flow] : bundle.methods)
        methods[name] = stats_json(flow_stats(flow, *bundle.gt));
      ej["methods"] = std::move(methods);
    }
    results[i].json = std::move(ej);
  });

  ordered_json report;
  report["command"] = command;
  report["config"] = {{"data", data.string()}, {"out", out.string()}, {"jobs", jobs}};
  report["seed"] = seed;
  report["entries"] = ordered_json::array();
  double fused_sum = 0.0;
  std::int64_t fused_n = 0;
  std::map<std::string, std::pair<double, std::int64_t>> method_sums;
  for (auto& r : results) {
    if (r.json.contains("fused")) {
      fused_sum += r.json["fused"]["aee"].get<double>() *
                   r.json["fused"]["valid_count"].get<double>();
      fused_n += r.json["fused"]["valid_count"].get<std::int64_t>();
      for (const auto& [name, s] : r.json["methods"].items()) {
        method_sums[name].first +=
            s["aee"].get<double>() * s["valid_count"].get<double>();
        method_sums[name].second += s["valid_count"].get<std::int64_t>();
      }
    }
    report["entries"].push_back(std::move(r.json));
  }
  if (fused_n > 0) {
    ordered_json agg;
    agg["fused_aee"] = fused_sum / static_cast<double>(fused_n);
    ordered_json maee = ordered_json::object();
    for (const auto& [name, acc] : method_sums)
      maee[name] = acc.first / static_cast<double>(acc.second);
    agg["method_aee"] = std::move(maee);
    report["aggregate"] = std::move(agg);
  }
  emit_report(report, timer);
  return 0;
}

int run_export_proxy(const fs::path& data, const fs::path& model_path, const fs::path& out,
                     bool rand_mix, const std::string& single, std::uint64_t seed) {
  Timer timer;
  const DatasetManifest manifest = read_manifest(manifest_path(data));
  DatasetManifest proxy;
  if (rand_mix) {
    proxy = export_random_mix(manifest, seed, out);
  } else if (!single.empty()) {
    proxy = export_single_method(manifest, single, out);
  } else {
    const AssessModel model = load_checkpoint(model_path);
    proxy = export_proxy(manifest, model, out);
  }
  ordered_json report;
  report["command"] = "export-proxy";
  report["config"] = {{"data", data.string()}, {"out", out.string()},
                      {"rand_mix", rand_mix}, {"single", single}};
  report["seed"] = seed;
  report["entries_written"] = proxy.entries.size();
  report["notes"] = proxy.notes;
  emit_report(report, timer);
  return 0;
}

int run_train_student(const fs::path& data, std::int64_t iters, std::uint64_t seed,
                      const fs::path& out, const fs::path& init, double lr, int batch) {
  Timer timer;
  const DatasetManifest manifest = read_manifest(manifest_path(data));
  const std::vector<Sample> samples = load_samples(manifest);
  StudentConfig scfg;
  TrainConfig tcfg;
  tcfg.iterations = iters;
  tcfg.seed = seed;
  tcfg.learning_rate = static_cast<float>(lr);
  tcfg.batch_size = batch;
  std::vector<TrainLogEntry> log;
  StudentModel model;
  if (!init.empty()) {
    const StudentModel base = load_student_checkpoint(init);
    model = train_student(samples, base.config, tcfg, &base, &log);
  } else {
    model = train_student(samples, scfg, tcfg, nullptr, &log);
  }
  save_student_checkpoint(out, model);

  ordered_json report;
  report["command"] = "train-student";
  report["config"] = {{"iters", iters}, {"lr", lr}, {"batch", batch},
                      {"init", init.string()}};
  report["seed"] = seed;
  report["final_loss"] = log.empty() ? 0.0 : log.back().loss;
  report["checkpoint"] = out.string();
  emit_report(report, timer);
  return 0;
}

int run_eval(const fs::path& data, const fs::path& flows_dir, const fs::path& model_path,
             int jobs, std::uint64_t seed) {
  Timer timer;
  const DatasetManifest manifest = read_manifest(manifest_path(data));

  std::vector<ordered_json> per_entry(manifest.entries.size());
  std::vector<FlowStats> stats(manifest.entries.size());

  StudentModel model;
  const bool use_model = !model_path.empty();
  if (use_model) model = load_student_checkpoint(model_path);

  parallel_entries(manifest.entries.size(), jobs, [&](std::size_t i) {
    LoadedBundle b = load_bundle(manifest, i);
    if (!b.gt) throw ConsistencyError("eval: entry " + std::to_string(i) + " has no gt");
    FlowField est;
    if (use_model) {
      est = predict_flow(model, b.image0, b.image1);
    } else {
      est = read_flo_file(flows_dir / (entry_stem(i) + ".flo"));
    }
    stats[i] = flow_stats(est, *b.gt);
    per_entry[i] = {{"entry", i}, {"aee", stats[i].aee}, {"fl_rate", stats[i].fl_rate},
                    {"valid_count", stats[i].valid_count}};
  });

  double aee_sum = 0.0, fl_sum = 0.0;
  std::int64_t total = 0;
  for (const FlowStats& s : stats) {
    aee_sum += s.aee * static_cast<double>(s.valid_count);
    fl_sum += s.fl_rate * static_cast<double>(s.valid_count);
    total += s.valid_count;
  }

  ordered_json report;
  report["command"] = "eval";
  report["config"] = {{"data", data.string()}, {"flows", flows_dir.string()},
                      {"model", model_path.string()}, {"jobs", jobs}};
  report["seed"] = seed;
  report["entries"] = per_entry;
  report["aggregate"] = {
      {"aee", total ? aee_sum / static_cast<double>(total) : 0.0},
      {"fl_rate", total ? fl_sum / static_cast<double>(total) : 0.0},
      {"valid_count", total}};
  emit_report(report, timer);
  return 0;
}

int run_warp(const fs::path& img_path, const fs::path& flow_path, const fs::path& out) {
  Timer timer;
  const ImageBuffer img = read_image_file(img_path);
  const FlowField flow = read_flo_file(flow_path);
  const auto [warped, inbound] = warp_backward(img, flow);
  write_image_file(out, warped);
  ordered_json report;
  report["command"] = "warp";
  report["config"] = {{"img", img_path.string()}, {"flow", flow_path.string()},
                      {"out", out.string()}};
  report["seed"] = 0;
  std::int64_t inb = 0;
  for (std::uint8_t b : inbound) inb += b;
  report["inbound_pixels"] = inb;
  emit_report(report, timer);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowfuse: flow fusion and proxy ground-truth toolkit"};
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a toy dataset");
  int gen_count = 10;
  std::uint64_t gen_seed = default_seed();
  std::string gen_out, gen_methods = "smooth,noisy,patch,zerocc";
  gen->add_option("--count", gen_count, "number of scenes")->required();
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--methods", gen_methods, "comma-separated corruption names");

  // train-assess
  auto* ta = app.add_subcommand("train-assess", "train the assessment network");
  std::string ta_data, ta_mode, ta_out;
  std::int64_t ta_iters = 1000;
  std::uint64_t ta_seed = default_seed();
  double ta_lr = 1e-4;
  int ta_batch = 8;
  ta->add_option("--data", ta_data, "dataset directory or manifest")->required();
  ta->add_option("--mode", ta_mode, "l1 or hinge")->required()
      ->check(CLI::IsMember({"l1", "hinge"}));
  ta->add_option("--iters", ta_iters, "training iterations")->required();
  ta->add_option("--seed", ta_seed, "seed");
  ta->add_option("--out", ta_out, "checkpoint path")->required();
  ta->add_option("--lr", ta_lr, "learning rate");
  ta->add_option("--batch", ta_batch, "batch size");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "fuse method flows with a trained model");
  std::string fuse_data, fuse_model, fuse_out;
  int fuse_jobs = 1;
  fuse->add_option("--data", fuse_data)->required();
  fuse->add_option("--model", fuse_model)->required();
  fuse->add_option("--out", fuse_out)->required();
  fuse->add_option("--jobs", fuse_jobs);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "fuse using ground-truth errors");
  std::string oracle_data, oracle_out;
  int oracle_jobs = 1;
  oracle->add_option("--data", oracle_data)->required();
  oracle->add_option("--out", oracle_out)->required();
  oracle->add_option("--jobs", oracle_jobs);

  // export-proxy
  auto* ep = app.add_subcommand("export-proxy", "export fused flow as proxy ground truth");
  std::string ep_data, ep_model, ep_out, ep_single;
  bool ep_randmix = false;
  std::uint64_t ep_seed = default_seed();
  ep->add_option("--data", ep_data)->required();
  ep->add_option("--model", ep_model, "assessment checkpoint (unless --rand-mix/--single)");
  ep->add_option("--out", ep_out)->required();
  ep->add_flag("--rand-mix", ep_randmix, "per-entry random single-method proxy");
  ep->add_option("--single", ep_single, "fixed single-method proxy by name");
  ep->add_option("--seed", ep_seed, "seed (rand-mix)");

  // train-student
  auto* ts = app.add_subcommand("train-student", "train/finetune the student flow network");
  std::string ts_data, ts_out, ts_init;
  std::int64_t ts_iters = 1000;
  std::uint64_t ts_seed = default_seed();
  double ts_lr = 1e-4;
  int ts_batch = 8;
  ts->add_option("--data", ts_data)->required();
  ts->add_option("--iters", ts_iters)->required();
  ts->add_option("--seed", ts_seed);
  ts->add_option("--out", ts_out)->required();
  ts->add_option("--init", ts_init, "checkpoint to start from");
  ts->add_option("--lr", ts_lr);
  ts->add_option("--batch", ts_batch);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate flows or a student model against gt");
  std::string ev_data, ev_flows, ev_model;
  int ev_jobs = 1;
  std::uint64_t ev_seed = default_seed();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--flows", ev_flows, "directory of NNNNNN.flo estimates");
  ev->add_option("--model", ev_model, "student checkpoint");
  ev->add_option("--jobs", ev_jobs);
  ev->add_option("--seed", ev_seed);

  // warp
  auto* wp = app.add_subcommand("warp", "backward-warp an image by a flow field");
  std::string wp_img, wp_flow, wp_out;
  wp->add_option("--img", wp_img)->required();
  wp->add_option("--flow", wp_flow)->required();
  wp->add_option("--out", wp_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen_synth(gen_count, gen_seed, gen_out, gen_methods);
    if (ta->parsed())
      return run_train_assess(ta_data, ta_mode, ta_iters, ta_seed, ta_out, ta_lr, ta_batch);
    if (fuse->parsed()) {
      const AssessModel model = load_checkpoint(fuse_model);
      // N is fixed by the checkpoint in hinge mode; mismatches against the
      // dataset are usage errors.
      const DatasetManifest m = read_manifest(manifest_path(fuse_data));
      if (model.config.mode == AssessMode::kHinge && !m.entries.empty() &&
          static_cast<int>(m.entries[0].methods.size()) != model.config.num_methods) {
        std::cerr << "error: config mismatch: model expects N=" << model.config.num_methods
                  << " methods, dataset provides " << m.entries[0].methods.size() << "\n";
        return 2;
      }
      return run_fuse_like("fuse", fuse_data, &model, fuse_out, fuse_jobs, default_seed());
    }
    if (oracle->parsed())
      return run_fuse_like("oracle", oracle_data, nullptr, oracle_out, oracle_jobs,
                           default_seed());
    if (ep->parsed()) {
      if (!ep_randmix && ep_single.empty() && ep_model.empty()) {
        std::cerr << "error: export-proxy needs --model, --rand-mix, or --single\n";
        return 2;
      }
      return run_export_proxy(ep_data, ep_model, ep_out, ep_randmix, ep_single, ep_seed);
    }
    if (ts->parsed())
      return run_train_student(ts_data, ts_iters, ts_seed, ts_out, ts_init, ts_lr, ts_batch);
    if (ev->parsed()) {
      if (ev_flows.empty() == ev_model.empty()) {
        std::cerr << "error: eval needs exactly one of --flows or --model\n";
        return 2;
      }
      return run_eval(ev_data, ev_flows, ev_model, ev_jobs, ev_seed);
    }
    if (wp->parsed()) return run_warp(wp_img, wp_flow, wp_out);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
