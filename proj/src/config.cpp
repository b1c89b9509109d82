#include "wsol/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "wsol/error.hpp"

namespace wsol {

Architecture TrainConfig::architecture() const {
  Architecture a;
  a.trunk.widths = trunk_widths;
  a.trunk.pooled_stages = trunk_pooled;
  a.input_size = input_size;
  a.num_classes = num_classes;
  return a;
}

SynthSpec TrainConfig::synth_spec() const {
  SynthSpec s;
  s.seed = synth_seed;
  s.n_train = synth_n_train;
  s.n_test = synth_n_test;
  s.num_classes = num_classes;
  s.image_size = synth_image_size;
  s.noise = synth_noise;
  s.size_min = synth_size_min;
  s.size_max = synth_size_max;
  return s;
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(delta > 0 && delta < 1, "delta must lie in (0,1)");
  need(tau >= 0 && tau <= 1, "tau must lie in [0,1]");
  need(alpha >= 0, "alpha must be non-negative");
  need(beta >= 0 && beta <= 1, "beta must lie in [0,1]");
  need(batch_size >= 1, "batch_size must be positive");
  need(epochs_init >= 0 && epochs_refine >= 0, "epoch counts must be non-negative");
  need(lr_cls > 0 && lr_loc > 0 && lr_refine > 0, "learning rates must be positive");
  need(lr_decay_cls > 0 && lr_decay_cls <= 1, "lr_decay_cls must lie in (0,1]");
  need(momentum >= 0 && momentum < 1, "momentum must lie in [0,1)");
  need(weight_decay >= 0, "weight_decay must be non-negative");
  need(!trunk_widths.empty(), "trunk_widths must not be empty");
  for (int w : trunk_widths) need(w >= 1, "trunk widths must be positive");
  need(trunk_pooled >= 0 && trunk_pooled <= static_cast<int>(trunk_widths.size()),
       "trunk_pooled must lie in [0, number of trunk stages]");
  need(input_size >= 1 && input_size % (1 << trunk_pooled) == 0, "input_size must be divisible by 2^trunk_pooled");
  need(precrop_size >= input_size, "precrop_size must be >= input_size");
  need(num_classes >= 1, "num_classes must be positive");
  need(strong.scale_min > 0 && strong.scale_min <= strong.scale_max, "strong scale range invalid");
  need(strong.translate_max >= 0 && strong.translate_max < 1, "strong_translate_max must lie in [0,1)");
  need(strong.translate_prob >= 0 && strong.translate_prob <= 1, "strong_translate_prob must lie in [0,1]");
  need(strong.flip_prob >= 0 && strong.flip_prob <= 1, "strong_flip_prob must lie in [0,1]");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad number '" + s + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad integer '" + s + "'");
  return v;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number(T TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>)
              c.*m = to_double(v);
            else
              c.*m = to_int<T>(v);
          },
          [m](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt_double(c.*m);
            else
              return std::to_string(c.*m);
          }};
}

Field strong(double StrongAugSpec::*m) {
  return {[m](TrainConfig& c, const std::string& v) { c.strong.*m = to_double(v); },
          [m](const TrainConfig& c) { return fmt_double(c.strong.*m); }};
}

Field widths() {
  return {[](TrainConfig& c, const std::string& v) {
            c.trunk_widths.clear();
            std::istringstream is(v);
            std::string tok;
            while (std::getline(is, tok, ',')) c.trunk_widths.push_back(to_int<int>(tok));
          },
          [](const TrainConfig& c) {
            std::string s;
            for (std::size_t i = 0; i < c.trunk_widths.size(); ++i)
              s += (i ? "," : "") + std::to_string(c.trunk_widths[i]);
            return s;
          }};
}

const std::map<std::string, Field>& fields() {
  using C = TrainConfig;
  static const std::map<std::string, Field> table{
      {"delta", number(&C::delta)},
      {"tau", number(&C::tau)},
      {"alpha", number(&C::alpha)},
      {"beta", number(&C::beta)},
      {"batch_size", number(&C::batch_size)},
      {"epochs_init", number(&C::epochs_init)},
      {"epochs_refine", number(&C::epochs_refine)},
      {"lr_cls", number(&C::lr_cls)},
      {"lr_loc", number(&C::lr_loc)},
      {"lr_refine", number(&C::lr_refine)},
      {"lr_decay_cls", number(&C::lr_decay_cls)},
      {"momentum", number(&C::momentum)},
      {"weight_decay", number(&C::weight_decay)},
      {"input_size", number(&C::input_size)},
      {"precrop_size", number(&C::precrop_size)},
      {"trunk_widths", widths()},
      {"trunk_pooled", number(&C::trunk_pooled)},
      {"seed", number(&C::seed)},
      {"data_root", Field{[](C& c, const std::string& v) { c.data_root = v; },
                          [](const C& c) { return c.data_root; }}},
      {"num_classes", number(&C::num_classes)},
      {"synth_seed", number(&C::synth_seed)},
      {"synth_n_train", number(&C::synth_n_train)},
      {"synth_n_test", number(&C::synth_n_test)},
      {"synth_image_size", number(&C::synth_image_size)},
      {"synth_noise", number(&C::synth_noise)},
      {"synth_size_min", number(&C::synth_size_min)},
      {"synth_size_max", number(&C::synth_size_max)},
      {"strong_scale_min", strong(&StrongAugSpec::scale_min)},
      {"strong_scale_max", strong(&StrongAugSpec::scale_max)},
      {"strong_translate_max", strong(&StrongAugSpec::translate_max)},
      {"strong_translate_prob", strong(&StrongAugSpec::translate_prob)},
      {"strong_flip_prob", strong(&StrongAugSpec::flip_prob)},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_config(std::istream& is) {
  TrainConfig config;
  std::set<std::string> seen;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      it->second.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  return parse_config(is);
}

void write_config(std::ostream& os, const TrainConfig& config) {
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(config) << '\n';
}

std::string config_to_string(const TrainConfig& config) {
  std::ostringstream os;
  write_config(os, config);
  return os.str();
}

TrainConfig config_from_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

}  // namespace wsol
