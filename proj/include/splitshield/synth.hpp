#pragma once

#include <cstddef>
#include <vector>

#include "splitshield/linalg.hpp"
#include "splitshield/rng.hpp"

namespace splitshield {

// Active-party synthetic labels for union ids it does not own.
struct LabelStrategy {
  enum class Kind { majority, minority, random_pos, random_pred, neighbors };
  Kind kind = Kind::majority;
  std::size_t sample_times = 1;  // random_pred: labels sampled per example, gradients averaged
  std::size_t k = 3;             // neighbors: vote size, cosine similarity
};

// Passive-party synthetic features (raw rows) or cut-layer embeddings.
struct FeatureStrategy {
  enum class Kind { sampling, gaussian, random_moving };
  Kind kind = Kind::sampling;
  double s = 1.0;  // gaussian: scale of (s/d) * max ||f(x)||^2
};

struct LabelContext {
  double owned_pos_ratio = 0.0;                    // random_pos
  const Vec* pred_probs = nullptr;                 // random_pred: per batch row
  const Mat* embeddings = nullptr;                 // neighbors: per batch row
  const std::vector<std::size_t>* owned_rows = nullptr;  // batch rows with real labels
  const std::vector<int>* owned_labels = nullptr;  // aligned with owned_rows
};

struct SyntheticLabels {
  Vec targets;  // per missing row; fractional when random_pred averages samples
};

// majority -> 0, minority -> 1, random_pos ~ Bernoulli(owned ratio),
// random_pred ~ Bernoulli(predicted prob) averaged over sample_times
// (gradients are affine in the target, so averaging sampled gradients equals
// one step at the averaged target), neighbors -> majority label of the k
// nearest owned embeddings under cosine, ties toward 0.
SyntheticLabels gen_labels(const LabelStrategy& strategy,
                           const std::vector<std::size_t>& missing_rows,
                           const LabelContext& ctx, Rng& rng);

// Exponential moving estimate of the real cut-layer rows' per-coordinate
// mean and standard deviation.
class MovingStats {
 public:
  explicit MovingStats(std::size_t d, double decay = 0.99);

  void observe(const Vec& row);
  bool ready() const { return count_ > 0; }
  std::size_t dim() const { return mean_.size(); }
  Vec sample(Rng& rng) const;

 private:
  double decay_;
  std::size_t count_ = 0;
  Vec mean_;
  Vec var_;
};

struct FeatureContext {
  const Mat* owned_features = nullptr;   // raw rows the passive party owns (sampling)
  const Mat* real_embeddings = nullptr;  // real cut-layer rows of this batch (gaussian)
  MovingStats* moving = nullptr;         // random_moving
};

struct SyntheticFeatures {
  Mat rows;
  bool at_cut_layer = false;  // gaussian / random_moving emit embeddings directly
};

SyntheticFeatures gen_features(const FeatureStrategy& strategy, std::size_t count,
                               const FeatureContext& ctx, Rng& rng);

// Affine logits calibration between the ground-truth conditional D and the
// synthetic-data conditional D' = alpha * D + gamma:
//   label_only:    D' = p_a D
//   feature_only:  D' = p_p D + (1 - p_p) base
//   both:          D' = p_a p_p D + p_a (1 - p_p) base
struct CalibrationConfig {
  enum class Scenario { label_only, feature_only, both };
  enum class Mode { none, train_time, test_time };

  Scenario scenario = Scenario::label_only;
  Mode mode = Mode::none;
  double p_a = 1.0;        // fraction of ids whose labels are real
  double p_p = 1.0;        // fraction of ids whose features are real
  double base_rate = 0.5;  // D(y = 1)

  double alpha() const;
  double gamma() const;
};

enum class CalibrationDirection { model_to_loss, model_to_report };

double calibrate_forward(double prob, const CalibrationConfig& cfg);
// Inverse is clamped to [0,1]; *clamped is set when clamping fired.
double calibrate_inverse(double prob, const CalibrationConfig& cfg, bool* clamped = nullptr);
double calibrate(double prob, const CalibrationConfig& cfg, CalibrationDirection direction);

// Brute-force check of the marginal-minimizes-KL fact: evaluates
// KL(D || p (x) q) with q fixed to D's column marginal for every p on a
// grid over the row simplex, and returns the minimizing p.
Vec marginal_kl_check(const Mat& joint, double grid_step);

}  // namespace splitshield
