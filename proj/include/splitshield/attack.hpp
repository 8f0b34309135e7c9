#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "splitshield/linalg.hpp"
#include "splitshield/rng.hpp"
#include "splitshield/splitnn.hpp"

namespace splitshield {

struct AttackKind {
  enum class Type { norm, hint, spectral };
  enum class Similarity { inner, cosine };

  Type type = Type::norm;
  std::size_t n_hints = 5;
  Similarity similarity = Similarity::inner;

  std::string name() const;
};

// score_i = ||g_i||_2; positive rows carry larger residuals on imbalanced data.
Vec norm_attack(const Mat& grads);

struct HintScores {
  Vec scores;                              // aligned with scored_indices
  std::vector<std::size_t> scored_indices;  // non-hint rows
};

// score_i = max over hints of sim(g_i, g_hint). Hints are known positive rows
// supplied by the evaluation harness and are excluded from scoring. A
// zero-norm pairing under cosine scores 0.
HintScores hint_attack(const Mat& grads, const std::vector<std::size_t>& hint_indices,
                       AttackKind::Similarity similarity);

// score_i = |<x_i - mean, v>| with v the top singular direction of the
// centered rows.
Vec spectral_attack(const Mat& x);

// Active-party variant over the joint (embedding, label) distribution: the
// label is appended as one extra coordinate scaled to the embeddings' RMS
// coordinate standard deviation.
Vec spectral_attack_joint(const Mat& embeddings, const std::vector<int>& labels);

struct LeakAuc {
  double value = 0.5;
  bool degraded = false;  // single-class batch or all-tied scores
};

LeakAuc leak_auc(const Vec& scores, const std::vector<int>& labels);

struct AttackResult {
  Vec scores;
  double leak_auc = 0.5;
  std::vector<std::size_t> attacked_indices;
  bool degraded = false;
};

// Executes one attack against a communicated batch. Hint indices are sampled
// fresh from this batch's positives on every call.
AttackResult run_attack(const AttackKind& kind, const GradBatch& batch, Rng& rng);

// Adapter for the training engine's per-step hooks.
NamedAttack make_attack_hook(const AttackKind& kind);

}  // namespace splitshield
