#include "poisonguard/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pg {

namespace {

constexpr double kSvdTol = 1e-8;
constexpr int kSvdMaxIter = 1000;

}  // namespace

FilterResult filter_poisoned(const Network& net, const Dataset& data,
                             std::uint16_t target_class,
                             std::uint16_t base_class) {
  if (target_class == base_class)
    throw std::invalid_argument("target and base class must differ");
  const auto ids = data.indices_of_class(target_class);
  if (ids.empty()) throw std::invalid_argument("target class is empty");

  FilterResult res;
  // Gradients at the base label separate poisoned from clean best.
  const auto gm = gradient_matrix(net, data, ids, base_class);
  res.signal = extract_signal(gm, SignalSource::AllTargetClass, kSvdTol,
                              kSvdMaxIter);
  res.scores = principal_scores(gm, res.signal);
  res.scored_ids = gm.sample_ids;
  // Hard gap-split fit: the poisoned scores form a small offset cluster that
  // soft EM tends to absorb into a split of the clean bulk.
  res.gmm = gap_split_fit(res.scores);

  if (res.gmm.degenerate) {
    res.degenerate = true;
    res.clean_ids = gm.sample_ids;
    return res;
  }

  const auto flags = minority_cluster_flags(res.gmm, res.scores);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    (flags[i] ? res.poisoned_ids : res.clean_ids).push_back(gm.sample_ids[i]);
  }
  // A one-sided split carries no information; treat it as no poison found.
  if (res.poisoned_ids.empty() || res.clean_ids.empty()) {
    res.degenerate = true;
    res.clean_ids = gm.sample_ids;
    res.poisoned_ids.clear();
  }
  return res;
}

DetectionReport detect_poison_classes(const Network& net, const Dataset& data,
                                      const DetectConfig& cfg) {
  if (data.class_count < 3)
    throw std::invalid_argument("detection requires >= 3 classes");
  if (cfg.tau <= 1.0) throw std::invalid_argument("tau must be > 1");

  DetectionReport rep;
  rep.tau = cfg.tau;
  rep.per_class_w2.assign(data.class_count, 0.0);
  rep.per_class_mean_abs_component.assign(data.class_count, 0.0);

  // Per-class gradients at the class's own label; W2 between GMM clusters.
  std::vector<GmmResult> gmms(data.class_count);
  std::vector<std::vector<double>> scores(data.class_count);
  std::vector<std::vector<std::size_t>> scored_ids(data.class_count);
  for (std::uint16_t y = 0; y < data.class_count; ++y) {
    const auto ids = data.indices_of_class(y);
    if (ids.size() < 2) continue;  // nothing to cluster
    const auto gm = gradient_matrix(net, data, ids, y);
    const auto sig =
        extract_signal(gm, SignalSource::AllTargetClass, kSvdTol, kSvdMaxIter);
    scores[y] = principal_scores(gm, sig);
    scored_ids[y] = gm.sample_ids;
    gmms[y] = gap_split_fit(scores[y]);
    rep.per_class_w2[y] =
        wasserstein2_gaussians(gmms[y].components[0], gmms[y].components[1]);
  }

  std::uint16_t target = 0;
  for (std::uint16_t y = 1; y < data.class_count; ++y) {
    if (rep.per_class_w2[y] > rep.per_class_w2[target]) target = y;
  }
  double others = 0.0;
  for (std::uint16_t y = 0; y < data.class_count; ++y) {
    if (y != target) others += rep.per_class_w2[y];
  }
  others /= static_cast<double>(data.class_count - 1);
  rep.ratio = others > 0.0 ? rep.per_class_w2[target] / others
                           : std::numeric_limits<double>::infinity();
  rep.flagged = rep.ratio > cfg.tau &&
                rep.per_class_w2[target] >= cfg.min_separation &&
                !gmms[target].degenerate;
  for (std::uint16_t y = 0; y < data.class_count; ++y) {
    if (y == target || others <= 0.0) continue;
    if (rep.per_class_w2[y] / others > cfg.tau) rep.runners_up.push_back(y);
  }
  if (!rep.flagged) return rep;

  rep.target_class = target;

  // Candidate poisoned set: the smaller GMM cluster of the target class,
  // found with target-label gradients.
  const auto flags = minority_cluster_flags(gmms[target], scores[target]);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) rep.candidate_poisoned_ids.push_back(scored_ids[target][i]);
  }
  if (rep.candidate_poisoned_ids.empty()) {
    rep.flagged = false;
    rep.target_class.reset();
    return rep;
  }

  // Base class: largest |mean score| of the candidate set, rescored per label.
  std::uint16_t base = target;
  double best = -1.0;
  for (std::uint16_t y = 0; y < data.class_count; ++y) {
    const auto gm =
        gradient_matrix(net, data, rep.candidate_poisoned_ids, y);
    if (gm.matrix.rows == 0) continue;
    const auto sig = extract_signal(gm, SignalSource::FilteredPoisoned,
                                    kSvdTol, kSvdMaxIter);
    const auto t = principal_scores(gm, sig);
    double mean = 0.0;
    for (double v : t) mean += v;
    mean = std::abs(mean / static_cast<double>(t.size()));
    rep.per_class_mean_abs_component[y] = mean;
    if (y != target && mean > best) {
      best = mean;
      base = y;
    }
  }
  rep.base_class = base;
  return rep;
}

Dataset counter_poison_augment(const Network& net, const Dataset& data,
                               std::span<const std::size_t> poisoned_ids,
                               std::uint16_t target_class,
                               const NeutralizeConfig& cfg) {
  if (poisoned_ids.empty())
    throw std::invalid_argument("counter_poison_augment: no poisoned samples");

  Dataset out = data;
  for (std::uint16_t y = 0; y < data.class_count; ++y) {
    if (y == target_class) continue;
    const auto ids = data.indices_of_class(y);
    if (ids.empty()) continue;
    const auto gm = gradient_matrix(net, data, poisoned_ids, y);
    const auto sig = extract_signal(gm, SignalSource::FilteredPoisoned,
                                    kSvdTol, kSvdMaxIter);
    for (std::size_t i : ids) {
      auto img = out.image(i);
      for (std::size_t c = 0; c < img.size(); ++c) {
        img[c] = std::min(std::max(img[c] + cfg.rho * sig.v[c], 0.0),
                          data.pixel_max);
      }
    }
  }
  return out;
}

NeutralizeResult neutralize(const Network& net, const Dataset& train_data,
                            const NeutralizeConfig& cfg,
                            const Dataset* clean_test,
                            const Dataset* poisoned_test) {
  NeutralizeResult res;
  res.net = net;
  if (clean_test) res.clean_before = evaluate(net, *clean_test);
  if (poisoned_test) res.poisoned_before = evaluate(net, *poisoned_test);

  DetectConfig dc;
  dc.tau = cfg.tau;
  dc.min_separation = cfg.min_separation;
  dc.seed = cfg.seed;
  res.detection = detect_poison_classes(net, train_data, dc);
  if (!res.detection.flagged) {
    res.clean_after = res.clean_before;
    res.poisoned_after = res.poisoned_before;
    return res;
  }
  const std::uint16_t target = *res.detection.target_class;
  const std::uint16_t base = *res.detection.base_class;

  res.filter = filter_poisoned(net, train_data, target, base);
  if (res.filter.poisoned_ids.empty()) {
    res.clean_after = res.clean_before;
    res.poisoned_after = res.poisoned_before;
    return res;
  }

  Dataset neutralized = counter_poison_augment(
      net, train_data, res.filter.poisoned_ids, target, cfg);
  // Corrective relabeling; the trigger pixels stay in place.
  for (std::size_t i : res.filter.poisoned_ids) neutralized.labels[i] = base;

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.retrain_epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  train(res.net, neutralized, tc);
  res.acted = true;

  if (clean_test) res.clean_after = evaluate(res.net, *clean_test);
  if (poisoned_test) res.poisoned_after = evaluate(res.net, *poisoned_test);
  return res;
}

}  // namespace pg
