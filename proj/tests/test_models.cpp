#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "wsol/models.hpp"

using namespace wsol;

namespace {

Architecture tiny_arch() {
  Architecture a;
  a.trunk.widths = {4, 6};
  a.trunk.pooled_stages = 1;
  a.input_size = 8;
  a.num_classes = 3;
  return a;
}

// Scalar objective sum(weights .* output) and its parameter gradient by
// central differences.
template <typename Net, typename Forward>
void check_param_gradients(Net& net, const ParameterSet<double>& analytic, Forward&& objective) {
  double worst = 0.0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    auto& p = net.params()[i];
    Eigen::MatrixXd numeric(p.rows(), p.cols());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double keep = p(k);
      p(k) = keep + 1e-6;
      const double up = objective();
      p(k) = keep - 1e-6;
      const double down = objective();
      p(k) = keep;
      numeric(k) = (up - down) / 2e-6;
    }
    worst = std::max(worst, oracle::max_rel_error(analytic[i], numeric, 1e-6));
  }
  CHECK(worst < 1e-4);
}

class LinearStub : public FeatureExtractor<float> {
 public:
  FeatureStack<float> extract(const Image& image) const override {
    FeatureStack<float> f(2, image.height, image.width);
    f.data.row(0) = image.data.row(0) * 2.0f;
    f.data.row(1) = image.data.row(1) - image.data.row(2);
    return f;
  }
  bool concurrent_safe() const override { return true; }
};

struct OneHotStub {
  int cls = 3;
  Vec<double> classify(const Image&) const { return Vec<double>::Unit(10, cls); }
};

}  // namespace

TEST_CASE("softmax and classify produce probability distributions") {
  const Vec<double> u = softmax<double>(Vec<double>::Ones(4));
  CHECK(u.isApprox(Vec<double>::Constant(4, 0.25)));

  CHECK(OneHotStub{}.classify(Image())(3) == 1.0);

  const Classifier<float> cls(tiny_arch(), 1);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto p = cls.classify(oracle::random_image(8, rng));
    CHECK(is_prob_dist(p, 1e-5));
  }
  CHECK_THROWS_AS(cls.classify(Image(3, 9, 9)), InputError);
}

TEST_CASE("feature extraction shape and determinism") {
  Architecture a;
  a.trunk.widths = {8, 16, 16};
  a.trunk.pooled_stages = 3;
  a.input_size = 64;
  const Classifier<float> cls(a, 3);
  std::mt19937_64 rng(2);
  const Image img = oracle::random_image(64, rng);
  const auto f = cls.extract(img);
  CHECK(f.height == 8);
  CHECK(f.width == 8);
  CHECK(f.channels() == 16);
  CHECK(cls.extract(img) == f);
  CHECK_THROWS_AS(cls.extract(Image(3, 32, 32)), InputError);

  const LinearStub stub;
  CHECK(stub.extract(Image(3, 5, 5)).data.isZero());
}

TEST_CASE("localizer inference clips and orders") {
  auto arch = tiny_arch();
  Localizer<double> loc(arch, 4);
  // Zero score and size weights: uniform attention puts the center at 0.5,
  // the bias alone sets the size.
  for (std::size_t i = 0; i < loc.params().size(); ++i) {
    const auto& name = loc.params().name(i);
    if (name == "loc.score.weight" || name == "loc.size.weight") loc.params()[i].setZero();
    if (name == "loc.size.bias") loc.params()[i] << 1.5, 0.7;
  }
  const Image img(3, 8, 8);
  const auto raw = loc.raw(img);
  CHECK(raw(0) == doctest::Approx(-0.25));
  CHECK(raw(1) == doctest::Approx(0.15));
  CHECK(raw(2) == doctest::Approx(1.25));
  CHECK(raw(3) == doctest::Approx(0.85));
  const Box b = loc.localize(img);
  CHECK(b.x_min == 0.0);
  CHECK(b.y_min == doctest::Approx(0.15));
  CHECK(b.x_max == 1.0);
  CHECK(b.y_max == doctest::Approx(0.85));
  CHECK(loc.localize(img) == b);

  // A negative size swaps the corners; localize puts them back in order.
  for (std::size_t i = 0; i < loc.params().size(); ++i)
    if (loc.params().name(i) == "loc.size.bias") loc.params()[i] << -0.4, 0.2;
  const Box swapped = loc.localize(img);
  CHECK(swapped.valid());
  CHECK(swapped.x_min == doctest::Approx(0.3));
  CHECK(swapped.x_max == doctest::Approx(0.7));
}

TEST_CASE("classifier backward matches finite differences") {
  Classifier<double> cls(tiny_arch(), 5);
  std::mt19937_64 rng(6);
  const Image img = oracle::random_image(8, rng);
  std::normal_distribution<double> n(0, 1);
  Vec<double> w(3);
  for (auto& v : w) v = n(rng);
  Classifier<double>::Cache cache;
  cls.logits(img, &cache);
  auto grads = cls.params().zeros_like();
  cls.backward(cache, w, grads);
  check_param_gradients(cls, grads, [&] { return cls.logits(img).dot(w); });
}

TEST_CASE("localizer backward matches finite differences") {
  std::mt19937_64 rng(7);
  for (int seed = 0; seed < 3; ++seed) {
    Localizer<double> loc(tiny_arch(), 10 + seed);
    const Image img = oracle::random_image(8, rng);
    std::normal_distribution<double> n(0, 1);
    Localizer<double>::Raw w;
    for (auto& v : w) v = n(rng);
    Localizer<double>::Cache cache;
    loc.raw(img, &cache);
    auto grads = loc.params().zeros_like();
    loc.backward(cache, w, grads);
    check_param_gradients(loc, grads, [&] { return loc.raw(img).dot(w); });
  }
}

TEST_CASE("ema_update") {
  ParameterSet<double> shadow, live;
  shadow.add("w", Eigen::MatrixXd::Zero(2, 3));
  live.add("w", Eigen::MatrixXd::Ones(2, 3));
  CHECK(ema_update(shadow, live, 0.9)[0].isApproxToConstant(0.1));

  ParameterSet<double> s = shadow;
  for (int k = 0; k < 5; ++k) ema_update_inplace(s, live, 0.9);
  // Loop against the closed form 1 - 0.9^5.
  CHECK(std::abs(s[0](0, 0) - 0.40951) < 1e-9);
  CHECK((s[0].array() - 0.40951).abs().maxCoeff() < 1e-9);

  ParameterSet<double> fixed = s;
  ema_update_inplace(fixed, live, 1.0);
  CHECK(fixed == s);

  // Contraction toward live: |new - live| = beta |old - live|.
  const auto next = ema_update(s, live, 0.7);
  CHECK(((next[0] - live[0]).cwiseAbs() - 0.7 * (s[0] - live[0]).cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);

  ParameterSet<double> other;
  other.add("w", Eigen::MatrixXd::Zero(3, 2));
  CHECK_THROWS_AS(ema_update_inplace(other, live, 0.9), InputError);
  CHECK_THROWS_AS(ema_update_inplace(s, live, 1.5), InputError);
}

TEST_CASE("architectures with the same shape share parameter layouts") {
  const Classifier<float> a(tiny_arch(), 1), b(tiny_arch(), 2);
  CHECK(a.params().same_layout(b.params()));
  CHECK_FALSE(a.params() == b.params());
  const Localizer<float> la(tiny_arch(), 1), lb(tiny_arch(), 2);
  CHECK(la.params().same_layout(lb.params()));
}

TEST_CASE("checkpoint round trip") {
  const Classifier<float> cls(tiny_arch(), 8);
  Checkpoint ck;
  ck.metadata["architecture"] = tiny_arch().id();
  ck.metadata["seed"] = "8";
  ck.put("classifier", cls.params());
  std::stringstream ss;
  write_checkpoint(ss, ck);
  const Checkpoint back = read_checkpoint(ss);
  CHECK(back.metadata == ck.metadata);
  Classifier<float> restored(tiny_arch(), 9);
  back.take("classifier", restored.params());
  CHECK(restored.params() == cls.params());
  CHECK_THROWS_AS(back.take("localizer", restored.params()), LoadError);

  std::stringstream junk("not a checkpoint");
  CHECK_THROWS_AS(read_checkpoint(junk), LoadError);
}
