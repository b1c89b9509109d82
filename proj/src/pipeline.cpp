#include "wsol/pipeline.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "wsol/augment.hpp"
#include "wsol/error.hpp"
#include "wsol/image.hpp"
#include "wsol/losses.hpp"

namespace wsol {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kRefineStream = 2;
constexpr std::uint64_t kClassifierInit = 11;
constexpr std::uint64_t kLocalizerInit = 12;

const char* stage_name(Stage s) { return s == Stage::Init ? "init" : "refine"; }

std::vector<std::size_t> batch_indices(const RunState& state, std::size_t n, std::uint64_t stream) {
  const auto perm = epoch_permutation(n, mix_seed({state.config.seed, stream}), state.epoch);
  const std::size_t b = static_cast<std::size_t>(state.config.batch_size);
  const std::size_t lo = static_cast<std::size_t>(state.step) * b;
  const std::size_t hi = std::min(n, lo + b);
  return {perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi)};
}

std::mt19937_64 sample_rng(const RunState& state, std::uint64_t stream, std::size_t index) {
  return std::mt19937_64(mix_seed({state.config.seed, stream, static_cast<std::uint64_t>(state.epoch),
                                   static_cast<std::uint64_t>(index)}));
}

void advance(RunState& state, std::size_t n) {
  const int per_epoch = steps_per_epoch(n, state.config.batch_size);
  const int epochs = state.stage == Stage::Init ? state.config.epochs_init : state.config.epochs_refine;
  if (++state.step >= per_epoch) {
    state.step = 0;
    ++state.epoch;
  }
  if (state.epoch >= epochs) state.finished = true;
}

void require_data(const TrainingSource& data, const RunState& state) {
  if (data.size() == 0) throw ConfigError("training: empty dataset");
  if (data.num_classes() != state.config.num_classes)
    throw ConfigError("training: dataset class count differs from the configuration");
}

[[noreturn]] void abort_non_finite(const RunState& state, const TrainHooks& hooks, const StepLog& log) {
  if (!hooks.diagnostic_checkpoint.empty()) save_checkpoint(hooks.diagnostic_checkpoint, to_checkpoint(state));
  throw TrainingError("non-finite loss at " + format_step_log(log));
}

Image general_view(const TrainingSample& sample, std::mt19937_64& rng, const Resolution& res) {
  const auto params = sample_general_params(rng, res);
  return apply_general(sample.image, std::nullopt, params, res).image;
}

}  // namespace

int steps_per_epoch(std::size_t n, int batch_size) {
  return static_cast<int>((n + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

RunState make_run_state(const TrainConfig& config) {
  config.validate();
  RunState s;
  s.config = config;
  const auto arch = config.architecture();
  s.classifier = Classifier<float>(arch, mix_seed({config.seed, kClassifierInit}));
  s.shadow = s.classifier;
  s.localizer = Localizer<float>(arch, mix_seed({config.seed, kLocalizerInit}));
  s.opt_cls = Sgd<float>(s.classifier.params(), config.momentum, config.weight_decay);
  s.opt_loc = Sgd<float>(s.localizer.params(), config.momentum, config.weight_decay);
  s.finished = config.epochs_init == 0;
  return s;
}

std::string format_step_log(const StepLog& log) {
  std::ostringstream os;
  os.precision(8);
  os << "stage=" << stage_name(log.stage) << " epoch=" << log.epoch << " step=" << log.step
     << " cls_loss=" << log.cls_loss << " reg_loss=" << log.reg_loss << " refine_loss=" << log.refine_loss
     << " retained=" << log.retained_count << " batch=" << log.batch_size << " lr_cls=" << log.lr_cls
     << " lr_loc=" << log.lr_loc;
  return os.str();
}

StepLog init_step(RunState& state, const TrainingSource& data, const TrainHooks& hooks) {
  require_data(data, state);
  if (state.stage != Stage::Init || state.finished) throw ConfigError("init_step: stage 1 is not running");
  const auto& cfg = state.config;
  const auto res = cfg.resolution();
  const auto indices = batch_indices(state, data.size(), kInitStream);
  const int n = static_cast<int>(indices.size());
  const int classes = cfg.num_classes;

  StepLog log;
  log.stage = Stage::Init;
  log.epoch = state.epoch;
  log.step = state.step;
  log.batch_size = n;
  log.lr_cls = cfg.lr_cls * std::pow(cfg.lr_decay_cls, state.epoch);
  log.lr_loc = cfg.lr_loc;

  Mat<float> p_raw(n, classes), p_masked(n, classes), pred(n, 4), target(n, 4);
  std::vector<int> labels(n);
  auto grads_cls = state.classifier.params().zeros_like();
  auto grads_loc = state.localizer.params().zeros_like();

  // Per-sample gradients depend only on that sample's outputs and N, so each
  // sample is pushed forward and backward before the next one.
  const FeatureExtractor<float>& pseudo_source = state.shadow;
  for (int i = 0; i < n; ++i) {
    const auto& sample = data.get(indices[i]);
    auto rng = sample_rng(state, kInitStream, indices[i]);
    const Image raw = general_view(sample, rng, res);
    const PseudoLabel pseudo = generate_pseudo_box(raw, pseudo_source, cfg.delta);
    if (hooks.on_pseudo) hooks.on_pseudo(sample, raw, pseudo, pseudo_source);
    const Image masked = mask_out(raw, pseudo.raw_pass).image;
    labels[i] = sample.class_label;
    const std::span<const int> label(&labels[i], 1);

    Classifier<float>::Cache cache_r, cache_m;
    const Vec<float> pr = softmax<float>(state.classifier.logits(raw, &cache_r));
    const Vec<float> pm = softmax<float>(state.classifier.logits(masked, &cache_m));
    p_raw.row(i) = pr.transpose();
    p_masked.row(i) = pm.transpose();
    const float inv = 1.0f / static_cast<float>(n);
    state.classifier.backward(cache_r, (cls_loss_logit_grad<float>(pr.transpose(), label) * inv).transpose(),
                              grads_cls);
    state.classifier.backward(cache_m, (cls_loss_logit_grad<float>(pm.transpose(), label) * inv).transpose(),
                              grads_cls);

    Localizer<float>::Cache cache_l;
    pred.row(i) = state.localizer.raw(raw, &cache_l).transpose();
    target.row(i) = pseudo.merged.cast<float>().vec().transpose();
    if (cfg.alpha > 0) {
      const Mat<float> g = reg_loss_grad<float>(pred.row(i), target.row(i)) * static_cast<float>(cfg.alpha * (1.0 / n));
      state.localizer.backward(cache_l, g.transpose(), grads_loc);
    }
  }

  const auto cls = cls_loss<float>(p_raw, p_masked, labels);
  const auto reg = reg_loss<float>(pred, target);
  log.cls_loss = cls.value;
  log.reg_loss = reg.value;
  if (!std::isfinite(init_loss(cls, reg, cfg.alpha).value) || !grads_cls.all_finite() || !grads_loc.all_finite())
    abort_non_finite(state, hooks, log);

  state.opt_cls.step(state.classifier.params(), grads_cls, log.lr_cls);
  state.opt_loc.step(state.localizer.params(), grads_loc, log.lr_loc);
  ema_update_inplace(state.shadow.params(), state.classifier.params(), cfg.beta);

  advance(state, data.size());
  if (hooks.log) *hooks.log << format_step_log(log) << '\n';
  if (hooks.on_step) hooks.on_step(state, log);
  return log;
}

StepLog refine_step(RunState& state, const TrainingSource& data, const TrainHooks& hooks) {
  require_data(data, state);
  if (state.stage != Stage::Refine || state.finished) throw ConfigError("refine_step: stage 2 is not running");
  const auto& cfg = state.config;
  const auto res = cfg.resolution();
  const auto indices = batch_indices(state, data.size(), kRefineStream);
  const int n = static_cast<int>(indices.size());

  StepLog log;
  log.stage = Stage::Refine;
  log.epoch = state.epoch;
  log.step = state.step;
  log.batch_size = n;
  log.lr_loc = cfg.lr_refine;

  Mat<float> pred(n, 4), target(n, 4);
  Vec<float> conf(n);
  auto grads = state.localizer.params().zeros_like();
  for (int i = 0; i < n; ++i) {
    const auto& sample = data.get(indices[i]);
    auto rng = sample_rng(state, kRefineStream, indices[i]);
    const Image raw = general_view(sample, rng, res);
    const auto pair = build_consistency_pair(state.localizer, state.classifier, raw, rng, cfg.strong);
    if (hooks.pair_dump) *hooks.pair_dump << format_pair_record(sample.image_id, pair, cfg.tau) << '\n';
    // Degenerate pairs never enter the loss.
    conf(i) = pair.degenerate ? 0.0f : static_cast<float>(pair.confidence.value);
    target.row(i) = pair.target_box.cast<float>().vec().transpose();
    pred.row(i) = target.row(i);
    if (!(pair.degenerate || static_cast<double>(conf(i)) <= cfg.tau)) {
      Localizer<float>::Cache cache;
      pred.row(i) = state.localizer.raw(pair.strong_image, &cache).transpose();
      const Vec<float> c1 = Vec<float>::Ones(1);
      const Mat<float> g = refine_loss_grad<float>(pred.row(i), target.row(i), c1, cfg.tau) / static_cast<float>(n);
      state.localizer.backward(cache, g.transpose(), grads);
    }
  }
  const auto loss = refine_loss<float>(pred, target, conf, cfg.tau);
  log.refine_loss = loss.value;
  log.retained_count = loss.retained_count;
  if (!std::isfinite(loss.value) || !grads.all_finite()) abort_non_finite(state, hooks, log);
  if (loss.retained_count > 0) state.opt_loc.step(state.localizer.params(), grads, cfg.lr_refine);

  advance(state, data.size());
  if (hooks.log) *hooks.log << format_step_log(log) << '\n';
  if (hooks.on_step) hooks.on_step(state, log);
  return log;
}

void resume(RunState& state, const TrainingSource& data, const TrainHooks& hooks) {
  require_data(data, state);
  int retained_this_epoch = 0;
  int epoch = state.epoch;
  while (!state.finished) {
    if (state.stage == Stage::Init) {
      init_step(state, data, hooks);
      continue;
    }
    retained_this_epoch += refine_step(state, data, hooks).retained_count;
    if (state.epoch != epoch || state.finished) {
      if (retained_this_epoch == 0 && hooks.log)
        *hooks.log << "warning: refine epoch " << epoch << " retained no samples; localizer unchanged\n";
      retained_this_epoch = 0;
      epoch = state.epoch;
    }
  }
}

RunState train_init(const TrainingSource& data, const TrainConfig& config, const TrainHooks& hooks) {
  RunState state = make_run_state(config);
  resume(state, data, hooks);
  return state;
}

RunState train_refine(const TrainingSource& data, RunState state, const TrainHooks& hooks) {
  if (state.stage != Stage::Init || !state.finished)
    throw ConfigError("train_refine: expected a completed stage-1 state");
  state.stage = Stage::Refine;
  state.epoch = 0;
  state.step = 0;
  state.finished = state.config.epochs_refine == 0;
  state.opt_loc = Sgd<float>(state.localizer.params(), state.config.momentum, state.config.weight_decay);
  resume(state, data, hooks);
  return state;
}

Prediction predict(const RunState& state, const Image& image) {
  const int s = state.config.input_size;
  if (image.height != s || image.width != s) throw InputError("predict: image must match the input resolution");
  return {state.classifier.classify(image).cast<double>(), state.localizer.localize(image)};
}

std::vector<Prediction> predict_batch(const RunState& state, const std::vector<Image>& images) {
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(predict(state, img));
  return out;
}

std::vector<EvalRecord> evaluation_records(const RunState& state, const EvalSet& data) {
  const auto res = state.config.resolution();
  const auto params = eval_general_params(res);
  std::vector<EvalRecord> records;
  records.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    EvalRecord rec;
    rec.image_id = s.image_id;
    rec.gt_label = s.class_label;
    const Image view = apply_general(s.image, std::nullopt, params, res).image;
    for (const auto& g : s.gt_boxes) rec.gt_boxes.push_back(apply_general_box(g, params, res).box);
    const auto p = predict(state, view);
    rec.predicted = p.box;
    rec.pred_dist = p.dist;
    records.push_back(std::move(rec));
  }
  return records;
}

MetricsReport evaluate_model(const RunState& state, const EvalSet& data) {
  return evaluate(evaluation_records(state, data));
}

void dump_pseudo_labels(std::ostream& os, const RunState& state, const TrainingSource& data) {
  const int s = state.config.input_size;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& sample = data.get(i);
    const Image view = resize_nearest(sample.image, s, s);
    os << format_pseudo_record(sample.image_id, generate_pseudo_box(view, state.shadow, state.config.delta)) << '\n';
  }
}

Checkpoint to_checkpoint(const RunState& state) {
  Checkpoint ckpt;
  const auto arch = state.config.architecture();
  ckpt.metadata["architecture"] = arch.id();
  ckpt.metadata["num_classes"] = std::to_string(arch.num_classes);
  ckpt.metadata["input_resolution"] = std::to_string(state.config.input_size);
  ckpt.metadata["stage"] = stage_name(state.stage);
  ckpt.metadata["stage_finished"] = state.finished ? "1" : "0";
  ckpt.metadata["epoch"] = std::to_string(state.epoch);
  ckpt.metadata["step"] = std::to_string(state.step);
  ckpt.metadata["seed"] = std::to_string(state.config.seed);
  std::istringstream cfg(config_to_string(state.config));
  std::string line;
  while (std::getline(cfg, line)) {
    const auto eq = line.find(" = ");
    ckpt.metadata["config." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  ckpt.put("classifier", state.classifier.params());
  ckpt.put("shadow", state.shadow.params());
  ckpt.put("localizer", state.localizer.params());
  ckpt.put("opt_cls", state.opt_cls.velocity());
  ckpt.put("opt_loc", state.opt_loc.velocity());
  return ckpt;
}

RunState from_checkpoint(const Checkpoint& ckpt) {
  std::string text;
  for (const auto& [k, v] : ckpt.metadata)
    if (k.rfind("config.", 0) == 0) text += k.substr(7) + " = " + v + "\n";
  RunState state = make_run_state(config_from_string(text));
  if (ckpt.meta("architecture") != state.config.architecture().id())
    throw LoadError("checkpoint: architecture does not match its configuration");
  const auto& stage = ckpt.meta("stage");
  if (stage != "init" && stage != "refine") throw LoadError("checkpoint: unknown stage " + stage);
  state.stage = stage == "init" ? Stage::Init : Stage::Refine;
  state.finished = ckpt.meta("stage_finished") == "1";
  try {
    state.epoch = std::stoi(ckpt.meta("epoch"));
    state.step = std::stoi(ckpt.meta("step"));
  } catch (const std::invalid_argument&) {
    throw LoadError("checkpoint: malformed epoch/step");
  }
  ckpt.take("classifier", state.classifier.params());
  ckpt.take("shadow", state.shadow.params());
  ckpt.take("localizer", state.localizer.params());
  ckpt.take("opt_cls", state.opt_cls.velocity());
  ckpt.take("opt_loc", state.opt_loc.velocity());
  return state;
}

DataBundle load_data(const TrainConfig& config) {
  DataBundle out;
  if (config.data_root.empty()) {
    auto synth = generate_synthetic(config.synth_spec());
    out.train = synth.train.training_view();
    out.train_annotated = std::move(synth.train);
    out.test = std::move(synth.test);
  } else {
    out.train = load_training_split(config.data_root, "train", config.num_classes);
    out.test = load_eval_split(config.data_root, "test", config.num_classes);
  }
  return out;
}

EvalSet load_eval_data(const TrainConfig& config, const std::string& split) {
  if (!config.data_root.empty()) return load_eval_split(config.data_root, split, config.num_classes);
  auto synth = generate_synthetic(config.synth_spec());
  if (split == "train") return std::move(synth.train);
  if (split == "test") return std::move(synth.test);
  throw ConfigError("synthetic data has only 'train' and 'test' splits");
}

}  // namespace wsol
