#ifndef WSOL_PIPELINE_HPP_
#define WSOL_PIPELINE_HPP_

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wsol/config.hpp"
#include "wsol/data.hpp"
#include "wsol/evaluation.hpp"
#include "wsol/models.hpp"
#include "wsol/pseudogen.hpp"
#include "wsol/refinement.hpp"

namespace wsol {

enum class Stage { Init, Refine };

/// Everything needed to continue training bitwise-identically. Random
/// streams are derived from (seed, stage, epoch, sample), so the position
/// counters are the whole rng state.
struct RunState {
  TrainConfig config;
  Stage stage = Stage::Init;
  int epoch = 0;         // within the stage
  int step = 0;          // batch index within the epoch
  bool finished = false; // current stage complete
  Classifier<float> classifier;
  Classifier<float> shadow;  // EMA copy used for pseudo boxes
  Localizer<float> localizer;
  Sgd<float> opt_cls;
  Sgd<float> opt_loc;
};

RunState make_run_state(const TrainConfig& config);

int steps_per_epoch(std::size_t n, int batch_size);

struct StepLog {
  Stage stage = Stage::Init;
  int epoch = 0;
  int step = 0;
  double cls_loss = 0.0;
  double reg_loss = 0.0;
  double refine_loss = 0.0;
  int retained_count = 0;
  int batch_size = 0;
  double lr_cls = 0.0;
  double lr_loc = 0.0;
};

/// "stage=init epoch=0 step=3 cls_loss=... reg_loss=... refine_loss=...
///  retained=... lr_cls=... lr_loc=..."
std::string format_step_log(const StepLog& log);

struct TrainHooks {
  std::ostream* log = nullptr;
  std::ostream* pair_dump = nullptr;  // refinement debug records
  std::string diagnostic_checkpoint;  // written when the loss turns non-finite
  std::function<void(const RunState&, const StepLog&)> on_step;
  /// Sees every stage-1 pseudo label together with the extractor that made it.
  std::function<void(const TrainingSample&, const Image& augmented, const PseudoLabel&,
                     const FeatureExtractor<float>&)>
      on_pseudo;
};

/// Stage-1 step: online pseudo boxes from the EMA shadow, L_cls + alpha L_reg,
/// one SGD step on both networks, then the EMA update.
StepLog init_step(RunState& state, const TrainingSource& data, const TrainHooks& hooks = {});

/// Stage-2 step: consistency pairs, confidence-gated MSE, SGD on the
/// localizer only. A batch with nothing retained leaves parameters and
/// optimizer state untouched.
StepLog refine_step(RunState& state, const TrainingSource& data, const TrainHooks& hooks = {});

/// Runs the current stage of `state` to completion.
void resume(RunState& state, const TrainingSource& data, const TrainHooks& hooks = {});

RunState train_init(const TrainingSource& data, const TrainConfig& config, const TrainHooks& hooks = {});
RunState train_refine(const TrainingSource& data, RunState init_state, const TrainHooks& hooks = {});

/// Class distribution from the live classifier and the clipped box from the
/// localizer for an image at the input resolution.
struct Prediction {
  Vec<double> dist;
  Box box;
};
Prediction predict(const RunState& state, const Image& image);
std::vector<Prediction> predict_batch(const RunState& state, const std::vector<Image>& images);

/// Center-crops each sample (ground-truth boxes follow the same map) and
/// predicts.
std::vector<EvalRecord> evaluation_records(const RunState& state, const EvalSet& data);
MetricsReport evaluate_model(const RunState& state, const EvalSet& data);

/// Writes one pseudo-label record per training image, generated with the EMA
/// shadow on the image resized to the input resolution.
void dump_pseudo_labels(std::ostream& os, const RunState& state, const TrainingSource& data);

Checkpoint to_checkpoint(const RunState& state);
RunState from_checkpoint(const Checkpoint& ckpt);

/// Train split (boxes withheld) and annotated splits for a config.
struct DataBundle {
  TrainingSet train;
  std::optional<EvalSet> train_annotated;  // synthetic data only
  EvalSet test;
};
DataBundle load_data(const TrainConfig& config);
/// Annotated split by name ("train" only for synthetic data).
EvalSet load_eval_data(const TrainConfig& config, const std::string& split);

}  // namespace wsol

#endif  // WSOL_PIPELINE_HPP_
