#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "poisonguard/dataset.hpp"
#include "poisonguard/extraction.hpp"
#include "poisonguard/gmm.hpp"
#include "poisonguard/network.hpp"

namespace pg {

struct FilterResult {
  std::vector<std::size_t> clean_ids;
  std::vector<std::size_t> poisoned_ids;  // the smaller GMM cluster
  std::vector<std::size_t> scored_ids;    // row order of scores
  std::vector<double> scores;
  GmmResult gmm;
  PoisonSignal signal;
  bool degenerate = false;  // GMM collapsed to one cluster; all kept clean
};

// Filter-Poisoned-Images: gradients of all target-class samples taken at the
// base-class label, first principal scores, 2-GMM split, smaller cluster
// flagged as poisoned.
FilterResult filter_poisoned(const Network& net, const Dataset& data,
                             std::uint16_t target_class,
                             std::uint16_t base_class);

struct DetectConfig {
  double tau = 2.0;  // Wasserstein ratio threshold, > 1
  // Absolute floor on the target class's cluster separation. Clean classes
  // can win the W2 ratio on noise alone at tiny absolute separations, so a
  // class is only flagged when its W2 also clears this floor.
  double min_separation = 0.12;
  std::uint64_t seed = 0;
};

struct DetectionReport {
  std::vector<double> per_class_w2;
  std::vector<double> per_class_mean_abs_component;  // over candidate set
  std::optional<std::uint16_t> target_class;  // set iff flagged
  std::optional<std::uint16_t> base_class;
  double tau = 2.0;
  double ratio = 0.0;  // W2(target) / mean(W2 of others)
  bool flagged = false;
  // Smaller GMM cluster of the argmax-W2 class (target-label gradients);
  // candidate poisoned samples used for base-class detection.
  std::vector<std::size_t> candidate_poisoned_ids;
  std::vector<std::uint16_t> runners_up;  // other classes exceeding tau
};

// Find-Poison-Target-Base-Class: per-class gradient matrices at the class's
// own label, W2 between the fitted GMM clusters, target = argmax W2 (ties to
// the lowest class index), flagged iff the ratio over the other classes'
// mean exceeds tau; base = argmax |mean score| of the candidate poisoned set
// recomputed at each other label. Requires >= 3 classes.
DetectionReport detect_poison_classes(const Network& net, const Dataset& data,
                                      const DetectConfig& cfg);

struct NeutralizeConfig {
  // Counter-perturbation scale. Large values erase the backdoor but also the
  // clean task once the model retrains on the shifted images.
  double rho = 50.0;
  double tau = 2.0;
  double min_separation = 0.12;  // forwarded to detection
  int retrain_epochs = 1;
  // Retraining reuses the victim's training rate; a large corrective step
  // wipes out the clean task along with the backdoor.
  double learning_rate = 1e-5;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

// Add-Counterpoison-Perturbation: for each class y != target, extracts v_y
// from the filtered poisoned samples at label y and sets every class-y image
// to clip(x + rho * v_y, [0, pixel_max]). Target-class images are untouched.
Dataset counter_poison_augment(const Network& net, const Dataset& data,
                               std::span<const std::size_t> poisoned_ids,
                               std::uint16_t target_class,
                               const NeutralizeConfig& cfg);

struct NeutralizeResult {
  Network net;  // retrained model, or the input model when nothing flagged
  DetectionReport detection;
  FilterResult filter;
  bool acted = false;
  EvalReport clean_before, clean_after;        // on clean_test when given
  EvalReport poisoned_before, poisoned_after;  // on poisoned_test when given
};

// Main pipeline: detect -> filter -> augment -> relabel filtered poisoned
// samples to the base class -> retrain (fine-tuning the poisoned weights).
// When detection does not flag, returns the original network untouched.
NeutralizeResult neutralize(const Network& net, const Dataset& train_data,
                            const NeutralizeConfig& cfg,
                            const Dataset* clean_test = nullptr,
                            const Dataset* poisoned_test = nullptr);

}  // namespace pg
