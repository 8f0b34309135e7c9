#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "splitshield/linalg.hpp"
#include "splitshield/protect.hpp"
#include "splitshield/rng.hpp"

namespace splitshield {

// One affine map with optional ReLU. w is out x in, row-major.
struct AffineLayer {
  Mat w;
  Vec b;
  bool relu = true;
};

// Passive-party representation f: X -> R^d (bottom model).
struct PassiveModel {
  std::vector<AffineLayer> layers;

  std::size_t input_dim() const { return layers.front().w.cols; }
  std::size_t cut_dim() const { return layers.back().w.rows; }
};

// Active-party head h: R^d -> scalar logit (top model).
struct ActiveModel {
  Vec w;
  double b = 0.0;
};

struct SplitModel {
  PassiveModel f;
  ActiveModel h;

  std::size_t cut_dim() const { return f.cut_dim(); }
};

// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init, seeded. f_widths lists the
// output width of every passive layer; the last entry is the cut width d.
SplitModel init_split_model(std::size_t input_dim, const std::vector<std::size_t>& f_widths,
                            Rng& rng);

struct Batch {
  Mat features;
  std::vector<int> labels;
  std::vector<std::string> ids;
};

// Per-example cut-layer gradients (row i belongs to example i; rows are never
// permuted or averaged before communication) plus the ground-truth labels,
// which only the active party and evaluation code may read.
struct GradBatch {
  Mat grads;
  std::vector<int> labels;
};

struct Dataset {
  Mat features;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
};

// Embeddings f(X), deterministic.
Mat forward_passive(const PassiveModel& f, const Mat& features);

struct ForwardCache {
  std::vector<Mat> pre;   // pre-activation of every layer
  std::vector<Mat> post;  // post-activation; post.back() is the cut output
};

ForwardCache forward_passive_cached(const PassiveModel& f, const Mat& features);

// Optional affine recalibration of the predicted probability used in the
// loss: q = alpha * sigmoid(logit) + gamma. alpha = 1, gamma = 0 is the plain
// cross entropy with dL/dlogit = sigmoid(logit) - y.
struct LossCalibration {
  double alpha = 1.0;
  double gamma = 0.0;
};

struct ActiveStep {
  double loss = 0.0;       // mean cross entropy over the batch
  GradBatch grad_batch;    // row i = (q_i - y_i-ish) * dh/da, per example, unaveraged
  Vec grad_w;              // mean-loss gradient for h's weights
  double grad_b = 0.0;
  Vec logits;
  Vec probs;               // sigmoid(logit), before calibration
};

// Forward through h plus the backward start: per-example cut-layer gradient
// rows and h's own parameter gradients. targets may be fractional (synthetic
// label averaging); the loss is the numerically stable log1p form.
ActiveStep active_step(const ActiveModel& h, const Mat& embeddings, const Vec& targets,
                       const LossCalibration& cal = {});

void sgd_update_active(ActiveModel& h, const ActiveStep& step, double learning_rate);

// Chain-rule backprop of received per-example rows through f, mean-loss
// scaling, immediate SGD step. skip_rows marks rows with no raw-feature
// provenance (directly generated embeddings); their contribution is dropped.
void backward_passive(PassiveModel& f, const ForwardCache& cache, const Mat& received_grads,
                      double learning_rate, const std::vector<bool>* skip_rows = nullptr);

struct TrainConfig {
  std::size_t batch_size = 1024;
  double learning_rate = 0.1;
  std::size_t epochs = 3;
  std::uint64_t seed = 1;
  std::size_t eval_every = 10;
  ProtectionConfig protection;
  LossCalibration loss_cal;
  // When set, reported probabilities are mapped through the affine inverse
  // p -> clamp((p - gamma)/alpha) before test loss/AUC/ACE.
  std::optional<LossCalibration> report_inverse;
};

// Attack hook: scores the communicated (already protected) gradient batch
// and returns a leak AUC for this step.
using AttackFn = std::function<double(const GradBatch& communicated, Rng& rng)>;

struct NamedAttack {
  std::string name;
  AttackFn fn;
};

struct TrainHooks {
  std::vector<NamedAttack> attacks;
};

struct StepRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::vector<double> leak_auc;
  std::optional<double> test_loss;
  std::optional<double> test_auc;
};

struct TrainReport {
  std::vector<std::string> attack_names;
  std::vector<StepRecord> steps;
  double final_test_loss = 0.0;
  double final_test_auc = 0.5;
  double final_test_ace = 0.0;
  Mat last_communicated_grads;  // for offline attack dumps
  std::vector<int> last_labels;

  // One row per step: step,train_loss,leak_auc_<attack>...,test_loss,test_auc
  std::string to_csv() const;
};

struct EvalResult {
  double loss = 0.0;
  double auc = 0.5;
  double ace = 0.0;
  Vec probs;
};

EvalResult evaluate(const SplitModel& model, const Dataset& data,
                    const std::optional<LossCalibration>& report_inverse = std::nullopt,
                    std::size_t ace_bins = 10);

// Shuffled mini-batch SGD with the protection hook applied to the gradient
// matrix before it crosses to the passive side. Cut-layer tensors round-trip
// through the framed wire codec, so an in-process run and a transported run
// see bit-identical matrices.
TrainReport train(SplitModel& model, const Dataset& train_data, const Dataset* test_data,
                  const TrainConfig& cfg, const TrainHooks& hooks);

}  // namespace splitshield
