#ifndef WSOL_CONFIG_HPP_
#define WSOL_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wsol/augment.hpp"
#include "wsol/data.hpp"
#include "wsol/models.hpp"

namespace wsol {

/// Every hyperparameter of a run. Serialized as flat "key = value" text.
struct TrainConfig {
  double delta = 0.8;  // pseudo-box attention threshold
  double tau = 0.9;    // confidence threshold for refinement
  double alpha = 20.0;
  double beta = 0.9;   // EMA momentum
  int batch_size = 32;
  int epochs_init = 40;
  int epochs_refine = 10;
  double lr_cls = 0.02;
  double lr_loc = 0.002;
  double lr_refine = 0.0002;
  double lr_decay_cls = 0.9;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  int input_size = 56;
  int precrop_size = 64;
  std::vector<int> trunk_widths{16, 32, 32, 64};
  int trunk_pooled = 2;  // 2x2 max-pooled stages; the grid is input_size / 2^trunk_pooled
  std::uint64_t seed = 0;

  // Data source: synthetic shapes unless data_root is set.
  std::string data_root;
  int num_classes = 8;
  std::uint64_t synth_seed = 7;
  int synth_n_train = 200;
  int synth_n_test = 100;
  int synth_image_size = 64;
  double synth_noise = 0.08;
  double synth_size_min = 0.10;
  double synth_size_max = 0.40;

  StrongAugSpec strong;

  Resolution resolution() const { return {precrop_size, input_size}; }
  Architecture architecture() const;
  SynthSpec synth_spec() const;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Parses "key = value" lines; blank lines and '#' comments are skipped.
/// Unknown keys, duplicates and malformed values are rejected.
TrainConfig parse_config(std::istream& is);
TrainConfig load_config(const std::string& path);
/// Writes every key; parse_config(write_config(c)) reproduces c exactly.
void write_config(std::ostream& os, const TrainConfig& config);
std::string config_to_string(const TrainConfig& config);
TrainConfig config_from_string(const std::string& text);

}  // namespace wsol

#endif  // WSOL_CONFIG_HPP_
