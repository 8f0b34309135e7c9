#include "splitshield/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "splitshield/errors.hpp"

namespace splitshield {

SyntheticLabels gen_labels(const LabelStrategy& strategy,
                           const std::vector<std::size_t>& missing_rows,
                           const LabelContext& ctx, Rng& rng) {
  SyntheticLabels out;
  out.targets.reserve(missing_rows.size());

  switch (strategy.kind) {
    case LabelStrategy::Kind::majority:
      out.targets.assign(missing_rows.size(), 0.0);
      return out;
    case LabelStrategy::Kind::minority:
      out.targets.assign(missing_rows.size(), 1.0);
      return out;
    case LabelStrategy::Kind::random_pos:
      for (std::size_t i = 0; i < missing_rows.size(); ++i)
        out.targets.push_back(rng.uniform() < ctx.owned_pos_ratio ? 1.0 : 0.0);
      return out;
    case LabelStrategy::Kind::random_pred: {
      if (!ctx.pred_probs) throw ArgumentError("gen_labels: random_pred needs predictions");
      if (strategy.sample_times < 1)
        throw ArgumentError("gen_labels: sample_times must be >= 1");
      for (std::size_t row : missing_rows) {
        double p = (*ctx.pred_probs)[row];
        double acc = 0.0;
        for (std::size_t t = 0; t < strategy.sample_times; ++t)
          acc += rng.uniform() < p ? 1.0 : 0.0;
        out.targets.push_back(acc / static_cast<double>(strategy.sample_times));
      }
      return out;
    }
    case LabelStrategy::Kind::neighbors: {
      if (!ctx.embeddings || !ctx.owned_rows || !ctx.owned_labels)
        throw ArgumentError("gen_labels: neighbors needs embeddings and owned labels");
      if (ctx.owned_rows->empty())
        throw StrategyUnavailableError("gen_labels: no owned labels in batch");
      const Mat& emb = *ctx.embeddings;
      const std::size_t k = std::min(strategy.k, ctx.owned_rows->size());
      for (std::size_t row : missing_rows) {
        Vec x = emb.row(row);
        double xn = norm2(x);
        std::vector<std::pair<double, int>> sims;  // (cosine, label)
        for (std::size_t j = 0; j < ctx.owned_rows->size(); ++j) {
          Vec o = emb.row((*ctx.owned_rows)[j]);
          double on = norm2(o);
          double sim = (xn > 0.0 && on > 0.0) ? dot(x, o) / (xn * on) : 0.0;
          sims.emplace_back(sim, (*ctx.owned_labels)[j]);
        }
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k),
                          sims.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::size_t pos = 0;
        for (std::size_t j = 0; j < k; ++j) pos += static_cast<std::size_t>(sims[j].second != 0);
        out.targets.push_back(2 * pos > k ? 1.0 : 0.0);  // ties go to the majority class 0
      }
      return out;
    }
  }
  throw ArgumentError("gen_labels: unknown strategy");
}

MovingStats::MovingStats(std::size_t d, double decay)
    : decay_(decay), mean_(d, 0.0), var_(d, 0.0) {
  if (!(decay > 0.0 && decay < 1.0)) throw ArgumentError("MovingStats: decay in (0,1)");
}

void MovingStats::observe(const Vec& row) {
  if (row.size() != mean_.size()) throw ArgumentError("MovingStats: width mismatch");
  if (count_ == 0) {
    mean_ = row;
    std::fill(var_.begin(), var_.end(), 0.0);
  } else {
    for (std::size_t j = 0; j < row.size(); ++j) {
      double delta = row[j] - mean_[j];
      mean_[j] = decay_ * mean_[j] + (1.0 - decay_) * row[j];
      var_[j] = decay_ * var_[j] + (1.0 - decay_) * delta * delta;
    }
  }
  ++count_;
}

Vec MovingStats::sample(Rng& rng) const {
  if (count_ == 0)
    throw StrategyUnavailableError("MovingStats: no real embeddings observed yet");
  Vec out(mean_.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = mean_[j] + std::sqrt(var_[j]) * rng.normal();
  return out;
}

SyntheticFeatures gen_features(const FeatureStrategy& strategy, std::size_t count,
                               const FeatureContext& ctx, Rng& rng) {
  SyntheticFeatures out;
  switch (strategy.kind) {
    case FeatureStrategy::Kind::sampling: {
      if (!ctx.owned_features || ctx.owned_features->rows == 0)
        throw StrategyUnavailableError("gen_features: sampling needs owned real rows");
      const Mat& own = *ctx.owned_features;
      out.rows = Mat(count, own.cols);
      for (std::size_t i = 0; i < count; ++i)
        out.rows.set_row(i, own.row(rng.uniform_below(own.rows)));
      out.at_cut_layer = false;
      return out;
    }
    case FeatureStrategy::Kind::gaussian: {
      if (strategy.s < 0.0) throw ArgumentError("gen_features: s must be >= 0");
      if (!ctx.real_embeddings)
        throw ArgumentError("gen_features: gaussian needs the batch's real embeddings");
      const Mat& real = *ctx.real_embeddings;
      double max_sq = 0.0;
      for (std::size_t i = 0; i < real.rows; ++i)
        max_sq = std::max(max_sq, dot(real.row(i), real.row(i)));
      const std::size_t d = real.cols;
      double sd = std::sqrt(strategy.s / static_cast<double>(d) * max_sq);
      out.rows = Mat(count, d);
      if (sd > 0.0)
        for (auto& v : out.rows.a) v = sd * rng.normal();
      out.at_cut_layer = true;
      return out;
    }
    case FeatureStrategy::Kind::random_moving: {
      if (!ctx.moving) throw ArgumentError("gen_features: random_moving needs running stats");
      out.rows = Mat(count, ctx.moving->dim());
      for (std::size_t i = 0; i < count; ++i) out.rows.set_row(i, ctx.moving->sample(rng));
      out.at_cut_layer = true;
      return out;
    }
  }
  throw ArgumentError("gen_features: unknown strategy");
}

double CalibrationConfig::alpha() const {
  switch (scenario) {
    case Scenario::label_only:
      return p_a;
    case Scenario::feature_only:
      return p_p;
    case Scenario::both:
      return p_a * p_p;
  }
  return 1.0;
}

double CalibrationConfig::gamma() const {
  switch (scenario) {
    case Scenario::label_only:
      return 0.0;
    case Scenario::feature_only:
      return (1.0 - p_p) * base_rate;
    case Scenario::both:
      return p_a * (1.0 - p_p) * base_rate;
  }
  return 0.0;
}

namespace {

void validate(const CalibrationConfig& cfg) {
  if (!(cfg.p_a > 0.0 && cfg.p_a <= 1.0)) throw ArgumentError("calibrate: p_a in (0,1]");
  if (!(cfg.p_p > 0.0 && cfg.p_p <= 1.0)) throw ArgumentError("calibrate: p_p in (0,1]");
  if (!(cfg.base_rate > 0.0 && cfg.base_rate < 1.0))
    throw ArgumentError("calibrate: base_rate in (0,1)");
}

}  // namespace

double calibrate_forward(double prob, const CalibrationConfig& cfg) {
  validate(cfg);
  if (!(prob >= 0.0 && prob <= 1.0)) throw ArgumentError("calibrate: prob outside [0,1]");
  return cfg.alpha() * prob + cfg.gamma();
}

double calibrate_inverse(double prob, const CalibrationConfig& cfg, bool* clamped) {
  validate(cfg);
  if (!(prob >= 0.0 && prob <= 1.0)) throw ArgumentError("calibrate: prob outside [0,1]");
  double d = (prob - cfg.gamma()) / cfg.alpha();
  if (clamped) *clamped = d < 0.0 || d > 1.0;
  return std::min(1.0, std::max(0.0, d));
}

double calibrate(double prob, const CalibrationConfig& cfg, CalibrationDirection direction) {
  return direction == CalibrationDirection::model_to_loss ? calibrate_forward(prob, cfg)
                                                          : calibrate_inverse(prob, cfg);
}

namespace {

double kl_to_product(const Mat& joint, const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (std::size_t x = 0; x < joint.rows; ++x)
    for (std::size_t y = 0; y < joint.cols; ++y) {
      double dxy = joint(x, y);
      if (dxy == 0.0) continue;  // 0 log 0 = 0
      double denom = p[x] * q[y];
      if (denom == 0.0) return std::numeric_limits<double>::infinity();
      kl += dxy * std::log(dxy / denom);
    }
  return kl;
}

void enumerate_simplex(std::size_t dims, std::size_t ticks, Vec& current, std::size_t at,
                       std::size_t left, const std::function<void(const Vec&)>& visit) {
  if (at + 1 == dims) {
    current[at] = static_cast<double>(left) / static_cast<double>(ticks);
    visit(current);
    return;
  }
  for (std::size_t take = 0; take <= left; ++take) {
    current[at] = static_cast<double>(take) / static_cast<double>(ticks);
    enumerate_simplex(dims, ticks, current, at + 1, left - take, visit);
  }
}

}  // namespace

Vec marginal_kl_check(const Mat& joint, double grid_step) {
  if (joint.rows == 0 || joint.cols == 0) throw ArgumentError("marginal_kl_check: empty joint");
  if (!(grid_step > 0.0 && grid_step <= 0.5))
    throw ArgumentError("marginal_kl_check: grid_step in (0, 0.5]");
  double total = 0.0;
  for (double v : joint.a) {
    if (v < 0.0) throw ArgumentError("marginal_kl_check: negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ArgumentError("marginal_kl_check: joint must sum to 1");

  Vec q(joint.cols, 0.0);  // fixed label marginal
  for (std::size_t x = 0; x < joint.rows; ++x)
    for (std::size_t y = 0; y < joint.cols; ++y) q[y] += joint(x, y);

  const std::size_t ticks = static_cast<std::size_t>(std::lround(1.0 / grid_step));
  Vec best;
  double best_kl = std::numeric_limits<double>::infinity();
  Vec current(joint.rows, 0.0);
  enumerate_simplex(joint.rows, ticks, current, 0, ticks, [&](const Vec& p) {
    double kl = kl_to_product(joint, p, q);
    if (kl < best_kl) {
      best_kl = kl;
      best = p;
    }
  });
  return best;
}

}  // namespace splitshield
