#include "wsol/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "wsol/error.hpp"
#include "wsol/image.hpp"

namespace wsol {

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t p : parts) {
    std::uint64_t z = h ^ (p + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    h = z ^ (z >> 31);
  }
  return h;
}

TrainingSet EvalSet::training_view() const {
  std::vector<TrainingSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.image_id, s.image, s.class_label});
  return TrainingSet(std::move(out), num_classes);
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed({seed, 0x5045524DULL, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

BinaryMask render_shape(ShapeKind kind, int size, int x0, int y0, int w, int h) {
  BinaryMask mask = BinaryMask::Constant(size, size, false);
  const double cx = x0 + w / 2.0, cy = y0 + h / 2.0;
  for (int r = y0; r < y0 + h; ++r)
    for (int c = x0; c < x0 + w; ++c) {
      if (kind == ShapeKind::Rectangle) {
        mask(r, c) = true;
      } else {
        const double dx = (c + 0.5 - cx) / (w / 2.0);
        const double dy = (r + 0.5 - cy) / (h / 2.0);
        mask(r, c) = dx * dx + dy * dy <= 1.0;
      }
    }
  return mask;
}

namespace {

EvalSample synth_sample(const SynthSpec& spec, int lo, int hi, std::uint64_t split, int index) {
  std::mt19937_64 rng(mix_seed({spec.seed, split, static_cast<std::uint64_t>(index)}));
  const int s = spec.image_size;
  const int n_colors = static_cast<int>(spec.palette.size());
  std::uniform_int_distribution<int> pick_class(0, spec.num_classes - 1);
  std::uniform_int_distribution<int> extent(lo, hi);
  std::uniform_real_distribution<double> gray(0.35, 0.65);
  std::normal_distribution<double> noise(0.0, spec.noise);

  EvalSample out;
  out.class_label = pick_class(rng);
  const ShapeKind kind = spec.kinds[out.class_label / n_colors];
  const auto& color = spec.palette[out.class_label % n_colors];
  const int w = extent(rng), h = extent(rng);
  const int x0 = std::uniform_int_distribution<int>(0, s - w)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, s - h)(rng);

  out.image = Image(3, s, s);
  const double base = gray(rng);
  for (int i = 0; i < s * s; ++i)
    for (int c = 0; c < 3; ++c)
      out.image.data(c, i) = static_cast<float>(std::clamp(base + noise(rng), 0.25, 0.75));

  const BinaryMask mask = render_shape(kind, s, x0, y0, w, h);
  int r0 = s, r1 = -1, c0 = s, c1 = -1;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      if (mask(r, c)) {
        for (int ch = 0; ch < 3; ++ch) out.image.at(ch, r, c) = color[ch];
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  out.gt_boxes.push_back(Box(double(c0) / s, double(r0) / s, double(c1 + 1) / s, double(r1 + 1) / s));
  out.image_id = (split == 0 ? "train_" : "test_") + std::to_string(index);
  return out;
}

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec) {
  if (spec.kinds.empty() || spec.palette.empty()) throw ConfigError("synthetic: need at least one kind and color");
  if (spec.num_classes != static_cast<int>(spec.kinds.size() * spec.palette.size()))
    throw ConfigError("synthetic: num_classes must equal kinds x colors");
  if (spec.n_train < 0 || spec.n_test < 0) throw ConfigError("synthetic: negative split size");
  if (spec.image_size < 2) throw ConfigError("synthetic: image too small");
  const int lo = static_cast<int>(std::ceil(spec.size_min * spec.image_size - 1e-9));
  const int hi = static_cast<int>(std::floor(spec.size_max * spec.image_size + 1e-9));
  if (lo < 1 || hi < lo || hi > spec.image_size)
    throw ConfigError("synthetic: object size range infeasible for the image size");

  SynthData out;
  out.train.num_classes = out.test.num_classes = spec.num_classes;
  for (int i = 0; i < spec.n_train; ++i) out.train.samples.push_back(synth_sample(spec, lo, hi, 0, i));
  for (int i = 0; i < spec.n_test; ++i) out.test.samples.push_back(synth_sample(spec, lo, hi, 1, i));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct IndexLine {
  std::string relpath;
  int class_index = 0;
  std::vector<Box> boxes;
};

std::vector<IndexLine> read_index(const std::string& root, const std::string& split, int num_classes,
                                  bool need_boxes) {
  const std::string path = root + "/" + split + ".txt";
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open index file " + path);
  std::vector<IndexLine> lines;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fail = [&](const std::string& why) -> LoadError {
      return LoadError(path + ":" + std::to_string(lineno) + ": " + why);
    };
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(trim(f));
    if (fields.size() < 2) throw fail("expected relpath,class_index[,x0,y0,x1,y1]...");
    IndexLine entry;
    entry.relpath = fields[0];
    std::size_t used = 0;
    try {
      entry.class_index = std::stoi(fields[1], &used);
    } catch (const std::exception&) {
      throw fail("malformed class index '" + fields[1] + "'");
    }
    if (used != fields[1].size()) throw fail("malformed class index '" + fields[1] + "'");
    if (entry.class_index < 0 || entry.class_index >= num_classes) throw fail("class index out of range");
    if ((fields.size() - 2) % 4 != 0) throw fail("box columns must come in groups of four");
    for (std::size_t k = 2; k < fields.size(); k += 4) {
      double v[4];
      for (int j = 0; j < 4; ++j) {
        try {
          v[j] = std::stod(fields[k + j], &used);
        } catch (const std::exception&) {
          throw fail("malformed coordinate '" + fields[k + j] + "'");
        }
        if (used != fields[k + j].size()) throw fail("malformed coordinate '" + fields[k + j] + "'");
        if (!(v[j] >= 0.0 && v[j] <= 1.0)) throw fail("coordinate outside [0,1]: " + fields[k + j]);
      }
      Box b(v[0], v[1], v[2], v[3]);
      if (!b.valid()) throw fail("box has min > max");
      entry.boxes.push_back(b);
    }
    if (need_boxes && entry.boxes.empty()) throw fail("evaluation split lines need at least one box");
    lines.push_back(std::move(entry));
  }
  return lines;
}

std::string image_id_of(const std::string& relpath) { return relpath; }

}  // namespace

TrainingSet load_training_split(const std::string& root, const std::string& split, int num_classes) {
  std::vector<TrainingSample> samples;
  for (auto& entry : read_index(root, split, num_classes, false))
    samples.push_back({image_id_of(entry.relpath), read_image(root + "/" + entry.relpath), entry.class_index});
  return TrainingSet(std::move(samples), num_classes);
}

EvalSet load_eval_split(const std::string& root, const std::string& split, int num_classes) {
  EvalSet out;
  out.num_classes = num_classes;
  for (auto& entry : read_index(root, split, num_classes, true))
    out.samples.push_back({image_id_of(entry.relpath), read_image(root + "/" + entry.relpath), entry.class_index,
                           std::move(entry.boxes)});
  return out;
}

std::variant<TrainingSet, EvalSet> load_directory(const std::string& root, const std::string& split,
                                                  int num_classes) {
  if (split == "train") return load_training_split(root, split, num_classes);
  return load_eval_split(root, split, num_classes);
}

}  // namespace wsol
