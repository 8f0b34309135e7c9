#include "splitshield/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splitshield/errors.hpp"
#include "splitshield/metrics.hpp"

namespace splitshield {

std::string AttackKind::name() const {
  switch (type) {
    case Type::norm:
      return "norm";
    case Type::hint:
      return "hint";
    case Type::spectral:
      return "spectral";
  }
  return "unknown";
}

Vec norm_attack(const Mat& grads) {
  if (grads.rows < 2) throw ArgumentError("norm_attack: need at least 2 rows");
  Vec scores(grads.rows);
  for (std::size_t i = 0; i < grads.rows; ++i) scores[i] = norm2(grads.row(i));
  return scores;
}

HintScores hint_attack(const Mat& grads, const std::vector<std::size_t>& hint_indices,
                       AttackKind::Similarity similarity) {
  if (hint_indices.empty()) throw ArgumentError("hint_attack: need at least one hint");
  std::vector<bool> is_hint(grads.rows, false);
  for (std::size_t h : hint_indices) {
    if (h >= grads.rows) throw ArgumentError("hint_attack: hint index out of range");
    is_hint[h] = true;
  }

  std::vector<Vec> hints;
  std::vector<double> hint_norms;
  for (std::size_t h : hint_indices) {
    hints.push_back(grads.row(h));
    hint_norms.push_back(norm2(hints.back()));
  }

  HintScores out;
  for (std::size_t i = 0; i < grads.rows; ++i) {
    if (is_hint[i]) continue;
    Vec g = grads.row(i);
    double gn = norm2(g);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < hints.size(); ++k) {
      double sim = dot(g, hints[k]);
      if (similarity == AttackKind::Similarity::cosine) {
        double denom = gn * hint_norms[k];
        sim = denom > 0.0 ? sim / denom : 0.0;
      }
      best = std::max(best, sim);
    }
    out.scores.push_back(best);
    out.scored_indices.push_back(i);
  }
  return out;
}

Vec spectral_attack(const Mat& x) {
  if (x.rows < 3) throw ArgumentError("spectral_attack: need at least 3 rows");
  Vec mu = mean_rows(x);
  Vec v = top_singular_direction(x);
  Vec scores(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    scores[i] = std::abs(dot(sub(x.row(i), mu), v));
  return scores;
}

Vec spectral_attack_joint(const Mat& embeddings, const std::vector<int>& labels) {
  if (labels.size() != embeddings.rows)
    throw ArgumentError("spectral_attack_joint: label count mismatch");
  double scale = std::sqrt(centered_cov_trace(embeddings) /
                           static_cast<double>(embeddings.cols));
  Mat joint(embeddings.rows, embeddings.cols + 1);
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    for (std::size_t j = 0; j < embeddings.cols; ++j) joint(i, j) = embeddings(i, j);
    joint(i, embeddings.cols) = scale * static_cast<double>(labels[i]);
  }
  return spectral_attack(joint);
}

LeakAuc leak_auc(const Vec& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ArgumentError("leak_auc: length mismatch");
  bool has0 = false, has1 = false;
  for (int y : labels) (y != 0 ? has1 : has0) = true;
  bool all_tied = std::all_of(scores.begin(), scores.end(),
                              [&](double s) { return s == scores.front(); });
  if (!has0 || !has1 || all_tied) return {0.5, true};
  return {auc(ScoredLabels{scores, labels}), false};
}

AttackResult run_attack(const AttackKind& kind, const GradBatch& batch, Rng& rng) {
  AttackResult out;
  switch (kind.type) {
    case AttackKind::Type::norm: {
      out.scores = norm_attack(batch.grads);
      out.attacked_indices.resize(batch.grads.rows);
      for (std::size_t i = 0; i < batch.grads.rows; ++i) out.attacked_indices[i] = i;
      LeakAuc la = leak_auc(out.scores, batch.labels);
      out.leak_auc = la.value;
      out.degraded = la.degraded;
      return out;
    }
    case AttackKind::Type::spectral: {
      out.scores = spectral_attack(batch.grads);
      out.attacked_indices.resize(batch.grads.rows);
      for (std::size_t i = 0; i < batch.grads.rows; ++i) out.attacked_indices[i] = i;
      LeakAuc la = leak_auc(out.scores, batch.labels);
      out.leak_auc = la.value;
      out.degraded = la.degraded;
      return out;
    }
    case AttackKind::Type::hint: {
      std::vector<std::size_t> positives;
      for (std::size_t i = 0; i < batch.labels.size(); ++i)
        if (batch.labels[i] != 0) positives.push_back(i);
      if (kind.n_hints < 1 || positives.size() <= kind.n_hints) {
        out.degraded = true;  // not enough known positives to act as hints
        out.leak_auc = 0.5;
        return out;
      }
      // Fresh hints every batch; repeated hints would be detectable.
      rng.shuffle(positives);
      std::vector<std::size_t> hints(positives.begin(),
                                     positives.begin() + static_cast<std::ptrdiff_t>(kind.n_hints));
      HintScores hs = hint_attack(batch.grads, hints, kind.similarity);
      std::vector<int> scored_labels;
      scored_labels.reserve(hs.scored_indices.size());
      for (std::size_t idx : hs.scored_indices) scored_labels.push_back(batch.labels[idx]);
      LeakAuc la = leak_auc(hs.scores, scored_labels);
      out.scores = std::move(hs.scores);
      out.attacked_indices = std::move(hs.scored_indices);
      out.leak_auc = la.value;
      out.degraded = la.degraded;
      return out;
    }
  }
  throw ArgumentError("run_attack: unknown attack type");
}

NamedAttack make_attack_hook(const AttackKind& kind) {
  return NamedAttack{kind.name(), [kind](const GradBatch& batch, Rng& rng) {
                       return run_attack(kind, batch, rng).leak_auc;
                     }};
}

}  // namespace splitshield
