#include "splitshield/splitnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "splitshield/errors.hpp"
#include "splitshield/metrics.hpp"
#include "splitshield/transport.hpp"

namespace splitshield {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Stable cross entropy: log(1 + exp(-l)) + (1 - y) l via the log-sum-exp form.
double bce_loss(double logit, double target) {
  return std::max(0.0, -logit) + std::log1p(std::exp(-std::abs(logit))) +
         (1.0 - target) * logit;
}

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

}  // namespace

SplitModel init_split_model(std::size_t input_dim, const std::vector<std::size_t>& f_widths,
                            Rng& rng) {
  if (f_widths.empty()) throw ArgumentError("init_split_model: f needs at least one layer");
  SplitModel m;
  std::size_t in = input_dim;
  for (std::size_t width : f_widths) {
    AffineLayer layer;
    layer.w = Mat(width, in);
    layer.b = Vec(width, 0.0);
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : layer.w.a) v = (2.0 * rng.uniform() - 1.0) * bound;
    for (auto& v : layer.b) v = (2.0 * rng.uniform() - 1.0) * bound;
    layer.relu = true;
    m.f.layers.push_back(std::move(layer));
    in = width;
  }
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  m.h.w = Vec(in);
  for (auto& v : m.h.w) v = (2.0 * rng.uniform() - 1.0) * bound;
  m.h.b = (2.0 * rng.uniform() - 1.0) * bound;
  return m;
}

ForwardCache forward_passive_cached(const PassiveModel& f, const Mat& features) {
  if (features.cols != f.input_dim())
    throw ArgumentError("forward_passive: feature width mismatch");
  ForwardCache cache;
  Mat cur = features;
  for (const auto& layer : f.layers) {
    const std::size_t out_dim = layer.w.rows;
    Mat pre(cur.rows, out_dim);
    for (std::size_t i = 0; i < cur.rows; ++i)
      for (std::size_t o = 0; o < out_dim; ++o) {
        double s = layer.b[o];
        for (std::size_t k = 0; k < layer.w.cols; ++k) s += layer.w(o, k) * cur(i, k);
        pre(i, o) = s;
      }
    Mat post = pre;
    if (layer.relu)
      for (auto& v : post.a) v = std::max(0.0, v);
    cache.pre.push_back(pre);
    cache.post.push_back(post);
    cur = cache.post.back();
  }
  // Keep the raw input in front so backward can index layer k's input as post[k].
  cache.post.insert(cache.post.begin(), features);
  return cache;
}

Mat forward_passive(const PassiveModel& f, const Mat& features) {
  return forward_passive_cached(f, features).post.back();
}

ActiveStep active_step(const ActiveModel& h, const Mat& embeddings, const Vec& targets,
                       const LossCalibration& cal) {
  const std::size_t b = embeddings.rows;
  const std::size_t d = embeddings.cols;
  if (h.w.size() != d) throw ArgumentError("active_step: embedding width mismatch");
  if (targets.size() != b) throw ArgumentError("active_step: target count mismatch");

  ActiveStep out;
  out.logits.resize(b);
  out.probs.resize(b);
  out.grad_batch.grads = Mat(b, d);
  out.grad_batch.labels.resize(b);
  out.grad_w = Vec(d, 0.0);

  const bool plain = cal.alpha == 1.0 && cal.gamma == 0.0;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double logit = h.b;
    for (std::size_t j = 0; j < d; ++j) logit += h.w[j] * embeddings(i, j);
    if (!std::isfinite(logit))
      throw DegenerateDataError("active_step: non-finite logit");
    double y = targets[i];
    double prob = sigmoid(logit);
    double dl;  // dL/dlogit for this example
    if (plain) {
      loss_sum += bce_loss(logit, y);
      dl = prob - y;
    } else {
      double q = std::min(1.0 - 1e-12, std::max(1e-12, cal.alpha * prob + cal.gamma));
      loss_sum += -y * std::log(q) - (1.0 - y) * std::log1p(-q);
      dl = (q - y) / (q * (1.0 - q)) * cal.alpha * prob * (1.0 - prob);
    }
    out.logits[i] = logit;
    out.probs[i] = prob;
    out.grad_batch.labels[i] = y >= 0.5 ? 1 : 0;
    // Per-example cut-layer row: dL_i/dlogit * dlogit/da = dl * w.
    for (std::size_t j = 0; j < d; ++j) {
      out.grad_batch.grads(i, j) = dl * h.w[j];
      out.grad_w[j] += dl * embeddings(i, j);
    }
    out.grad_b += dl;
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  out.loss = loss_sum * inv_b;
  for (auto& g : out.grad_w) g *= inv_b;
  out.grad_b *= inv_b;
  return out;
}

void sgd_update_active(ActiveModel& h, const ActiveStep& step, double learning_rate) {
  for (std::size_t j = 0; j < h.w.size(); ++j) h.w[j] -= learning_rate * step.grad_w[j];
  h.b -= learning_rate * step.grad_b;
}

void backward_passive(PassiveModel& f, const ForwardCache& cache, const Mat& received_grads,
                      double learning_rate, const std::vector<bool>* skip_rows) {
  const std::size_t n_layers = f.layers.size();
  const Mat& input = cache.post.front();
  if (received_grads.rows != input.rows)
    throw ProtocolError("backward_passive: received row count mismatch");
  if (received_grads.cols != f.cut_dim())
    throw ProtocolError("backward_passive: received column count mismatch");

  const double inv_b = 1.0 / static_cast<double>(received_grads.rows);
  Mat delta = received_grads;
  for (auto& v : delta.a) v *= inv_b;  // mean-loss convention for parameter updates
  if (skip_rows) {
    for (std::size_t i = 0; i < delta.rows; ++i)
      if ((*skip_rows)[i])
        for (std::size_t j = 0; j < delta.cols; ++j) delta(i, j) = 0.0;
  }

  for (std::size_t layer_idx = n_layers; layer_idx-- > 0;) {
    AffineLayer& layer = f.layers[layer_idx];
    const Mat& pre = cache.pre[layer_idx];
    const Mat& layer_in = cache.post[layer_idx];  // post is offset by the raw input
    if (layer.relu)
      for (std::size_t i = 0; i < delta.rows; ++i)
        for (std::size_t o = 0; o < delta.cols; ++o)
          if (pre(i, o) <= 0.0) delta(i, o) = 0.0;

    Mat grad_w(layer.w.rows, layer.w.cols);
    Vec grad_b(layer.w.rows, 0.0);
    for (std::size_t i = 0; i < delta.rows; ++i)
      for (std::size_t o = 0; o < layer.w.rows; ++o) {
        double dv = delta(i, o);
        if (dv == 0.0) continue;
        grad_b[o] += dv;
        for (std::size_t k = 0; k < layer.w.cols; ++k) grad_w(o, k) += dv * layer_in(i, k);
      }

    Mat next_delta;
    if (layer_idx > 0) {
      next_delta = Mat(delta.rows, layer.w.cols);
      for (std::size_t i = 0; i < delta.rows; ++i)
        for (std::size_t o = 0; o < layer.w.rows; ++o) {
          double dv = delta(i, o);
          if (dv == 0.0) continue;
          for (std::size_t k = 0; k < layer.w.cols; ++k)
            next_delta(i, k) += dv * layer.w(o, k);
        }
    }

    for (std::size_t idx = 0; idx < layer.w.a.size(); ++idx)
      layer.w.a[idx] -= learning_rate * grad_w.a[idx];
    for (std::size_t o = 0; o < layer.b.size(); ++o)
      layer.b[o] -= learning_rate * grad_b[o];

    if (layer_idx > 0) delta = std::move(next_delta);
  }
}

EvalResult evaluate(const SplitModel& model, const Dataset& data,
                    const std::optional<LossCalibration>& report_inverse,
                    std::size_t ace_bins) {
  EvalResult out;
  Mat emb = forward_passive(model.f, data.features);
  double loss_sum = 0.0;
  out.probs.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double logit = model.h.b;
    for (std::size_t j = 0; j < emb.cols; ++j) logit += model.h.w[j] * emb(i, j);
    double p = sigmoid(logit);
    if (report_inverse) {
      p = clamp01((p - report_inverse->gamma) / report_inverse->alpha);
    }
    out.probs[i] = p;
    double pc = std::min(1.0 - 1e-12, std::max(1e-12, p));
    double y = static_cast<double>(data.labels[i]);
    loss_sum += -y * std::log(pc) - (1.0 - y) * std::log1p(-pc);
  }
  out.loss = loss_sum / static_cast<double>(data.size());
  ScoredLabels sl{out.probs, data.labels};
  try {
    out.auc = auc(sl);
  } catch (const DegenerateDataError&) {
    out.auc = 0.5;
  }
  out.ace = ace(out.probs, data.labels, AceConfig{std::min(ace_bins, data.size())});
  return out;
}

namespace {

// Round-trip a matrix through the framed wire codec; the payload stores raw
// IEEE-754 bits, so this is numerically a no-op and keeps in-process runs
// identical to transported ones.
Mat through_wire(const Mat& m) {
  Message msg{MsgTag::matrix, encode_matrix(m)};
  auto framed = frame_message(msg);
  std::vector<std::uint8_t> payload(framed.begin() + 5, framed.end());
  return decode_matrix(payload);
}

}  // namespace

TrainReport train(SplitModel& model, const Dataset& train_data, const Dataset* test_data,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  if (train_data.size() == 0) throw ArgumentError("train: empty dataset");
  if (cfg.batch_size == 0 || cfg.epochs == 0)
    throw ArgumentError("train: batch_size and epochs must be positive");
  bool has0 = false, has1 = false;
  for (int y : train_data.labels) (y != 0 ? has1 : has0) = true;
  if (!has0 || !has1) throw ArgumentError("train: both classes required overall");

  Rng rng(cfg.seed);
  Rng prot_rng = cfg.protection.seed != 0 ? Rng(cfg.protection.seed) : rng.fork(0x70726f74);
  Rng attack_rng = rng.fork(0x61746b);
  Protector protector(cfg.protection);

  TrainReport report;
  for (const auto& a : hooks.attacks) report.attack_names.push_back(a.name);

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0;
  const std::size_t n = train_data.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      Mat features(b, train_data.features.cols);
      std::vector<int> labels(b);
      Vec targets(b);
      for (std::size_t i = 0; i < b; ++i) {
        std::size_t src = order[start + i];
        features.set_row(i, train_data.features.row(src));
        labels[i] = train_data.labels[src];
        targets[i] = static_cast<double>(labels[i]);
      }

      ForwardCache cache = forward_passive_cached(model.f, features);
      Mat embeddings = through_wire(cache.post.back());
      ActiveStep astep = active_step(model.h, embeddings, targets, cfg.loss_cal);

      Mat communicated = protector.apply(astep.grad_batch.grads, labels, prot_rng);
      communicated = through_wire(communicated);

      StepRecord rec;
      rec.step = step;
      rec.train_loss = astep.loss;
      GradBatch seen{communicated, labels};
      for (const auto& a : hooks.attacks) rec.leak_auc.push_back(a.fn(seen, attack_rng));

      backward_passive(model.f, cache, communicated, cfg.learning_rate);
      sgd_update_active(model.h, astep, cfg.learning_rate);

      ++step;
      if (test_data && (step % cfg.eval_every == 0 || step == total_steps)) {
        EvalResult ev = evaluate(model, *test_data, cfg.report_inverse);
        rec.test_loss = ev.loss;
        rec.test_auc = ev.auc;
      }
      report.steps.push_back(std::move(rec));

      if (step == total_steps) {
        report.last_communicated_grads = communicated;
        report.last_labels = labels;
      }
    }
  }

  if (test_data) {
    EvalResult ev = evaluate(model, *test_data, cfg.report_inverse);
    report.final_test_loss = ev.loss;
    report.final_test_auc = ev.auc;
    report.final_test_ace = ev.ace;
  }
  return report;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,train_loss";
  for (const auto& name : attack_names) os << ",leak_auc_" << name;
  os << ",test_loss,test_auc\n";
  for (const auto& rec : steps) {
    os << rec.step << "," << rec.train_loss;
    for (double v : rec.leak_auc) os << "," << v;
    os << ",";
    if (rec.test_loss) os << *rec.test_loss;
    os << ",";
    if (rec.test_auc) os << *rec.test_auc;
    os << "\n";
  }
  return os.str();
}

}  // namespace splitshield
