// Defense pipeline on a small poisoned task with known ground truth:
// filtering, target/base detection, counter-poison augmentation, and the
// end-to-end neutralization wrapper.

#include <doctest.h>

#include <algorithm>
#include <vector>

#include "poisonguard/defense.hpp"

namespace {

constexpr std::uint16_t kTarget = 0;
constexpr std::uint16_t kBase = 5;

pg::PoisonSpec trigger(const pg::Shape& shape) {
  const std::vector<double> color = {255.0};
  auto spec = pg::make_dot_poison(shape, 4, 4, color, kTarget, kBase, 0.1);
  // 4x4 patch blended at 0.6 opacity: strong enough to implant the backdoor,
  // weak enough that the poisoned gradients stay separable.
  for (std::size_t dy = 0; dy < 4; ++dy) {
    for (std::size_t dx = 0; dx < 4; ++dx) {
      const std::size_t i = (4 + dy) * shape.width + (4 + dx);
      spec.mask[i] = 0.6;
      spec.pattern[i] = 255.0;
    }
  }
  return spec;
}

struct Scenario {
  pg::Dataset poisoned_train;
  pg::Dataset clean_train;
  pg::Dataset clean_test;
  pg::Dataset poisoned_test;
  pg::Network net;        // trained on poisoned_train
  pg::Network clean_net;  // trained on clean_train
};

const Scenario& scenario() {
  static const Scenario s = [] {
    const std::uint64_t seed = 1;
    const pg::Shape shape{16, 16, 1};
    Scenario sc;
    sc.clean_train =
        pg::make_synthetic_image_task(6, shape, 600, 10.0, seed);
    const auto spec = trigger(shape);
    sc.poisoned_train = pg::poison_dataset(sc.clean_train, spec, seed + 1);
    sc.clean_test =
        pg::make_synthetic_image_task(6, shape, 100, 10.0, seed + 9999);
    sc.poisoned_test.shape = shape;
    sc.poisoned_test.class_count = 6;
    for (std::size_t i = 0; i < sc.clean_test.size(); ++i) {
      if (sc.clean_test.labels[i] != kBase) continue;
      const auto x = pg::apply_poison(sc.clean_test.image(i), spec, 255.0);
      sc.poisoned_test.pixels.insert(sc.poisoned_test.pixels.end(), x.begin(),
                                     x.end());
      sc.poisoned_test.labels.push_back(kBase);
      sc.poisoned_test.poisoned_flags.push_back(1);
      sc.poisoned_test.original_labels.push_back(kBase);
    }
    pg::TrainConfig tc;
    tc.learning_rate = 1e-5;
    tc.epochs = 15;
    tc.seed = seed + 3;
    sc.net = pg::make_mlp(std::vector<std::size_t>{256, 64, 6}, seed + 2);
    sc.clean_net = sc.net;
    pg::train(sc.net, sc.poisoned_train, tc);
    pg::train(sc.clean_net, sc.clean_train, tc);
    return sc;
  }();
  return s;
}

}  // namespace

TEST_CASE("victim model carries the backdoor") {
  const auto& sc = scenario();
  CHECK(pg::evaluate(sc.net, sc.clean_test).accuracy >= 0.9);
  CHECK(pg::evaluate(sc.net, sc.poisoned_test).accuracy <= 0.2);
}

TEST_CASE("filter separates poisoned from clean target-class samples") {
  const auto& sc = scenario();
  const auto f =
      pg::filter_poisoned(sc.net, sc.poisoned_train, kTarget, kBase);
  REQUIRE(!f.degenerate);
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t id : f.poisoned_ids)
    (sc.poisoned_train.poisoned_flags[id] ? tp : fp) += 1;
  for (std::size_t id : f.clean_ids)
    (sc.poisoned_train.poisoned_flags[id] ? fn : tn) += 1;
  CHECK(static_cast<double>(tp) / (tp + fn) >= 0.85);  // sensitivity
  CHECK(static_cast<double>(tn) / (tn + fp) >= 0.95);  // specificity
}

TEST_CASE("filter rejects target == base") {
  const auto& sc = scenario();
  CHECK_THROWS(pg::filter_poisoned(sc.net, sc.poisoned_train, 1, 1));
}

TEST_CASE("detection finds the true target and base classes") {
  const auto& sc = scenario();
  pg::DetectConfig dc;
  const auto r = pg::detect_poison_classes(sc.net, sc.poisoned_train, dc);
  REQUIRE(r.flagged);
  CHECK(*r.target_class == kTarget);
  CHECK(*r.base_class == kBase);
  CHECK(r.ratio > dc.tau);
  CHECK(!r.candidate_poisoned_ids.empty());
  // The candidate set is dominated by true poisons.
  std::size_t hits = 0;
  for (std::size_t id : r.candidate_poisoned_ids)
    hits += sc.poisoned_train.poisoned_flags[id];
  CHECK(hits * 10 >= r.candidate_poisoned_ids.size() * 9);
}

TEST_CASE("detection stays silent on a clean model") {
  const auto& sc = scenario();
  const auto r =
      pg::detect_poison_classes(sc.clean_net, sc.clean_train,
                                pg::DetectConfig{});
  CHECK(!r.flagged);
  CHECK(!r.target_class.has_value());
}

TEST_CASE("detection validates its inputs") {
  const auto& sc = scenario();
  pg::DetectConfig dc;
  dc.tau = 1.0;
  CHECK_THROWS(pg::detect_poison_classes(sc.net, sc.poisoned_train, dc));
  pg::Dataset two;
  two.class_count = 2;
  CHECK_THROWS(
      pg::detect_poison_classes(sc.net, two, pg::DetectConfig{}));
}

TEST_CASE("counter-poison augmentation: rho = 0 is a no-op, output clamped") {
  const auto& sc = scenario();
  const auto f =
      pg::filter_poisoned(sc.net, sc.poisoned_train, kTarget, kBase);
  pg::NeutralizeConfig nc;
  nc.rho = 0.0;
  const auto same = pg::counter_poison_augment(
      sc.net, sc.poisoned_train, f.poisoned_ids, kTarget, nc);
  CHECK(same.pixels == sc.poisoned_train.pixels);

  nc.rho = 1e5;  // force the clamp on both ends
  const auto big = pg::counter_poison_augment(
      sc.net, sc.poisoned_train, f.poisoned_ids, kTarget, nc);
  for (double v : big.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 255.0);
  }
  // Target-class images are untouched.
  for (std::size_t i = 0; i < big.size(); ++i) {
    if (big.labels[i] != kTarget) continue;
    const auto a = big.image(i);
    const auto b = sc.poisoned_train.image(i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  CHECK_THROWS(pg::counter_poison_augment(sc.net, sc.poisoned_train, {},
                                          kTarget, nc));
}

TEST_CASE("neutralize removes the backdoor and keeps clean accuracy") {
  const auto& sc = scenario();
  pg::NeutralizeConfig nc;
  nc.seed = 4;
  const auto r = pg::neutralize(sc.net, sc.poisoned_train, nc,
                                &sc.clean_test, &sc.poisoned_test);
  REQUIRE(r.acted);
  CHECK(r.poisoned_after.accuracy >= 0.70);
  CHECK(r.clean_before.accuracy - r.clean_after.accuracy <= 0.02);
}

TEST_CASE("neutralize returns the model unchanged when nothing is flagged") {
  const auto& sc = scenario();
  pg::NeutralizeConfig nc;
  const auto r = pg::neutralize(sc.clean_net, sc.clean_train, nc,
                                &sc.clean_test, nullptr);
  CHECK(!r.acted);
  CHECK(r.clean_after.accuracy == r.clean_before.accuracy);
  for (std::size_t l = 0; l < r.net.layers.size(); ++l)
    CHECK(r.net.layers[l].weights.data ==
          sc.clean_net.layers[l].weights.data);
}
