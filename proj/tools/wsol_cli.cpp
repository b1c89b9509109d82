#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "wsol/config.hpp"
#include "wsol/error.hpp"
#include "wsol/image.hpp"
#include "wsol/pipeline.hpp"

namespace {

using namespace wsol;

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

RunState load_state(const std::string& path) { return from_checkpoint(load_checkpoint(path)); }

int run_pseudogen(const std::string& config_path, const std::string& ckpt, const std::string& out) {
  const auto config = load_config(config_path);
  const RunState state = ckpt.empty() ? make_run_state(config) : load_state(ckpt);
  const auto data = load_data(config);
  auto os = open_out(out);
  dump_pseudo_labels(os, state, data.train);
  return 0;
}

int run_train_init(const std::string& config_path, const std::string& out, const std::string& log_path) {
  const auto config = load_config(config_path);
  const auto data = load_data(config);
  std::ofstream log;
  TrainHooks hooks;
  if (!log_path.empty()) {
    log = open_out(log_path);
    hooks.log = &log;
  }
  hooks.diagnostic_checkpoint = out + ".diag";
  const auto state = train_init(data.train, config, hooks);
  save_checkpoint(out, to_checkpoint(state));
  const auto report = evaluate_model(state, data.test);
  std::cout << "test gt_known_acc " << report.gt_known_acc << '\n';
  return 0;
}

int run_refine(const std::string& config_path, const std::string& init, const std::string& out,
               const std::string& log_path) {
  const auto config = load_config(config_path);
  RunState state = load_state(init);
  if (config_to_string(config) != config_to_string(state.config)) {
    // Method hyperparameters come from the config file; the architecture
    // has to match what the checkpoint was trained with.
    if (config.architecture().id() != state.config.architecture().id())
      throw ConfigError("refine: config architecture differs from the checkpoint");
    state.config = config;
  }
  const auto data = load_data(config);
  std::ofstream log;
  TrainHooks hooks;
  if (!log_path.empty()) {
    log = open_out(log_path);
    hooks.log = &log;
  } else {
    hooks.log = &std::cerr;
  }
  hooks.diagnostic_checkpoint = out + ".diag";
  state = train_refine(data.train, std::move(state), hooks);
  save_checkpoint(out, to_checkpoint(state));
  const auto report = evaluate_model(state, data.test);
  std::cout << "test gt_known_acc " << report.gt_known_acc << '\n';
  return 0;
}

int run_evaluate(const std::string& ckpt, const std::string& split, const std::string& report_path,
                 const std::string& per_image) {
  const RunState state = load_state(ckpt);
  const auto data = load_eval_data(state.config, split);
  const auto records = evaluation_records(state, data);
  auto os = open_out(report_path);
  write_report(os, evaluate(records));
  if (!per_image.empty()) {
    auto pi = open_out(per_image);
    write_per_image(pi, records);
  }
  return 0;
}

int run_visualize(const std::string& ckpt, int n, const std::string& dir, const std::string& split) {
  const RunState state = load_state(ckpt);
  const auto data = load_eval_data(state.config, split);
  std::filesystem::create_directories(dir);
  const auto res = state.config.resolution();
  const auto params = eval_general_params(res);
  const int count = std::min<int>(n, static_cast<int>(data.samples.size()));
  for (int i = 0; i < count; ++i) {
    const auto& s = data.samples[i];
    Image view = apply_general(s.image, std::nullopt, params, res).image;
    const auto p = predict(state, view);
    for (const auto& g : s.gt_boxes) {
      const auto b = apply_general_box(g, params, res);
      if (!b.degenerate) draw_box(view, b.box, {0.0f, 1.0f, 0.0f});
    }
    draw_box(view, p.box, {1.0f, 0.0f, 0.0f});
    write_png((std::filesystem::path(dir) / (s.image_id + ".png")).string(), view);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage weakly supervised object localization"};
  app.require_subcommand(1);

  std::string config, out, ckpt, init, split = "test", report, per_image, log;
  int n = 16;

  auto* pg = app.add_subcommand("pseudogen", "Dump mask-based pseudo boxes for the training split");
  pg->add_option("--config", config)->required();
  pg->add_option("--out", out)->required();
  pg->add_option("--ckpt", ckpt, "Use the EMA classifier from this checkpoint");

  auto* ti = app.add_subcommand("train-init", "Stage 1: classifier + localizer on pseudo boxes");
  ti->add_option("--config", config)->required();
  ti->add_option("--out", out)->required();
  ti->add_option("--log", log, "Per-step log file");

  auto* rf = app.add_subcommand("refine", "Stage 2: consistency refinement of the localizer");
  rf->add_option("--config", config)->required();
  rf->add_option("--init", init)->required();
  rf->add_option("--out", out)->required();
  rf->add_option("--log", log, "Per-step log file");

  auto* ev = app.add_subcommand("evaluate", "GT-Known and Top-1/5 metrics");
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--split", split)->required();
  ev->add_option("--report", report)->required();
  ev->add_option("--per-image", per_image, "Optional per-image records");

  auto* vz = app.add_subcommand("visualize", "Write images with predicted (red) and ground-truth (green) boxes");
  vz->add_option("--ckpt", ckpt)->required();
  vz->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  vz->add_option("--out", out)->required();
  vz->add_option("--split", split);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pg) return run_pseudogen(config, ckpt, out);
    if (*ti) return run_train_init(config, out, log);
    if (*rf) return run_refine(config, init, out, log);
    if (*ev) return run_evaluate(ckpt, split, report, per_image);
    if (*vz) return run_visualize(ckpt, n, out, split);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
