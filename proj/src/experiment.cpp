#include "splitshield/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "splitshield/attack.hpp"
#include "splitshield/errors.hpp"
#include "splitshield/metrics.hpp"

namespace splitshield {

namespace {

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::vector<std::pair<std::string, double>> late_leak_auc(const TrainReport& report) {
  std::vector<std::pair<std::string, double>> out;
  const std::size_t n = report.steps.size();
  const std::size_t from = n - std::max<std::size_t>(1, n / 4);
  for (std::size_t a = 0; a < report.attack_names.size(); ++a) {
    std::vector<double> vals;
    for (std::size_t i = from; i < n; ++i) vals.push_back(report.steps[i].leak_auc[a]);
    out.emplace_back(report.attack_names[a], mean_of(vals));
  }
  return out;
}

struct Ownership {
  std::vector<bool> label_owned;    // active party has the real label
  std::vector<bool> feature_owned;  // passive party has the real features
  std::vector<std::size_t> union_rows;  // rows owned by at least one party
};

Ownership draw_ownership(std::size_t n, const SynthPart& synth) {
  Rng rng(synth.ownership_seed);
  Ownership own;
  own.label_owned.resize(n);
  own.feature_owned.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    own.label_owned[i] = rng.uniform() >= synth.beta;
    own.feature_owned[i] = rng.uniform() >= synth.alpha;
    if (own.label_owned[i] || own.feature_owned[i]) own.union_rows.push_back(i);
  }
  return own;
}

CalibrationConfig calibration_for(const SynthPart& synth, double active_base_rate) {
  CalibrationConfig cal;
  cal.mode = synth.calibration;
  cal.p_a = 1.0 - synth.beta;
  cal.p_p = 1.0 - synth.alpha;
  cal.base_rate = active_base_rate;
  if (synth.beta > 0.0 && synth.alpha > 0.0)
    cal.scenario = CalibrationConfig::Scenario::both;
  else if (synth.alpha > 0.0)
    cal.scenario = CalibrationConfig::Scenario::feature_only;
  else
    cal.scenario = CalibrationConfig::Scenario::label_only;
  return cal;
}

struct DetectionAccumulator {
  std::vector<double> aucs;

  void add(const Vec& scores, const std::vector<int>& flags) {
    LeakAuc la = leak_auc(scores, flags);
    if (!la.degraded) aucs.push_back(la.value);
  }
  std::optional<double> mean() const {
    if (aucs.empty()) return std::nullopt;
    return mean_of(aucs);
  }
};

// Union-scheduled training with synthetic fill on both sides.
ExperimentResult run_union_experiment(const ExperimentConfig& cfg, const Dataset& train_all,
                                      const Dataset& test_data) {
  const SynthPart& synth = *cfg.synth;
  Ownership own = draw_ownership(train_all.size(), synth);
  if (own.union_rows.empty()) throw ArgumentError("union training: empty union");

  // The active party's base rate estimate comes from the labels it owns.
  std::size_t owned_n = 0, owned_pos = 0;
  for (std::size_t i = 0; i < train_all.size(); ++i)
    if (own.label_owned[i]) {
      ++owned_n;
      owned_pos += static_cast<std::size_t>(train_all.labels[i] != 0);
    }
  if (owned_n == 0) throw ArgumentError("union training: active party owns no labels");
  const double owned_pos_ratio = static_cast<double>(owned_pos) / static_cast<double>(owned_n);

  CalibrationConfig cal = calibration_for(synth, owned_pos_ratio);
  TrainConfig tcfg = cfg.train;
  if (cal.mode == CalibrationConfig::Mode::train_time)
    tcfg.loss_cal = LossCalibration{cal.alpha(), cal.gamma()};
  if (cal.mode == CalibrationConfig::Mode::test_time)
    tcfg.report_inverse = LossCalibration{cal.alpha(), cal.gamma()};

  // Passive-owned raw rows form the sampling pool.
  std::vector<std::size_t> passive_pool;
  for (std::size_t i = 0; i < train_all.size(); ++i)
    if (own.feature_owned[i]) passive_pool.push_back(i);
  if (synth.feature.kind == FeatureStrategy::Kind::sampling && passive_pool.empty() &&
      synth.alpha > 0.0)
    throw StrategyUnavailableError("union training: sampling with no passive-owned rows");
  Mat pool(passive_pool.size(), train_all.features.cols);
  for (std::size_t i = 0; i < passive_pool.size(); ++i)
    pool.set_row(i, train_all.features.row(passive_pool[i]));

  Rng rng(tcfg.seed);
  Rng prot_rng = tcfg.protection.seed != 0 ? Rng(tcfg.protection.seed) : rng.fork(0x70726f74);
  Rng attack_rng = rng.fork(0x61746b);
  Rng synth_rng = rng.fork(0x73796e);
  Protector protector(tcfg.protection);

  SplitModel model = [&] {
    Rng init_rng = rng.fork(0x696e6974);
    return init_split_model(train_all.features.cols, cfg.f_widths, init_rng);
  }();
  MovingStats moving(model.cut_dim());

  TrainReport report;
  for (const auto& a : cfg.attacks) report.attack_names.push_back(a.name());
  std::vector<NamedAttack> hooks;
  for (const auto& a : cfg.attacks) hooks.push_back(make_attack_hook(a));

  DetectionAccumulator det_labels, det_features, det_features_raw;
  std::size_t clamp_count = 0, clamp_total = 0;

  std::vector<std::size_t> order = own.union_rows;
  const std::size_t n = order.size();
  const std::size_t steps_per_epoch = (n + tcfg.batch_size - 1) / tcfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * tcfg.epochs;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
      const std::size_t b = std::min(tcfg.batch_size, n - start);
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(start + b));

      std::vector<int> true_labels(b);
      std::vector<int> synth_label_flag(b), synth_feature_flag(b);
      for (std::size_t i = 0; i < b; ++i) {
        true_labels[i] = train_all.labels[rows[i]];
        synth_label_flag[i] = own.label_owned[rows[i]] ? 0 : 1;
        synth_feature_flag[i] = own.feature_owned[rows[i]] ? 0 : 1;
      }

      // Passive side: raw features, real or synthetic.
      Mat features(b, train_all.features.cols);
      std::vector<bool> cut_synth(b, false);  // rows whose embedding is generated directly
      const bool raw_sampling = synth.feature.kind == FeatureStrategy::Kind::sampling;
      for (std::size_t i = 0; i < b; ++i) {
        if (!synth_feature_flag[i]) {
          features.set_row(i, train_all.features.row(rows[i]));
        } else if (raw_sampling) {
          FeatureContext fctx;
          fctx.owned_features = &pool;
          SyntheticFeatures sf = gen_features(synth.feature, 1, fctx, synth_rng);
          features.set_row(i, sf.rows.row(0));
        } else {
          cut_synth[i] = true;  // embedding filled in after the real forward
        }
      }

      ForwardCache cache = forward_passive_cached(model.f, features);
      Mat embeddings = cache.post.back();

      // Real embedding rows drive the generator statistics.
      std::vector<std::size_t> real_rows;
      for (std::size_t i = 0; i < b; ++i)
        if (!synth_feature_flag[i]) real_rows.push_back(i);
      Mat real_emb(real_rows.size(), embeddings.cols);
      for (std::size_t i = 0; i < real_rows.size(); ++i)
        real_emb.set_row(i, embeddings.row(real_rows[i]));
      for (std::size_t i = 0; i < real_rows.size(); ++i) moving.observe(real_emb.row(i));

      if (!raw_sampling) {
        FeatureContext fctx;
        fctx.real_embeddings = &real_emb;
        fctx.moving = &moving;
        for (std::size_t i = 0; i < b; ++i)
          if (cut_synth[i]) {
            SyntheticFeatures sf = gen_features(synth.feature, 1, fctx, synth_rng);
            embeddings.set_row(i, sf.rows.row(0));
          }
      }

      // Active side: probabilities first, then synthetic labels where needed.
      Vec probs(b);
      for (std::size_t i = 0; i < b; ++i) {
        double logit = model.h.b;
        for (std::size_t j = 0; j < embeddings.cols; ++j)
          logit += model.h.w[j] * embeddings(i, j);
        probs[i] = 1.0 / (1.0 + std::exp(-logit));
      }
      std::vector<std::size_t> owned_rows_in_batch;
      std::vector<int> owned_labels_in_batch;
      std::vector<std::size_t> missing_rows;
      for (std::size_t i = 0; i < b; ++i) {
        if (!synth_label_flag[i]) {
          owned_rows_in_batch.push_back(i);
          owned_labels_in_batch.push_back(true_labels[i]);
        } else {
          missing_rows.push_back(i);
        }
      }
      Vec targets(b);
      for (std::size_t i = 0; i < b; ++i) targets[i] = static_cast<double>(true_labels[i]);
      if (!missing_rows.empty()) {
        LabelContext lctx;
        lctx.owned_pos_ratio = owned_pos_ratio;
        lctx.pred_probs = &probs;
        lctx.embeddings = &embeddings;
        lctx.owned_rows = &owned_rows_in_batch;
        lctx.owned_labels = &owned_labels_in_batch;
        SyntheticLabels sl = gen_labels(synth.label, missing_rows, lctx, synth_rng);
        for (std::size_t m = 0; m < missing_rows.size(); ++m)
          targets[missing_rows[m]] = sl.targets[m];
      }

      ActiveStep astep = active_step(model.h, embeddings, targets, tcfg.loss_cal);
      Mat communicated = protector.apply(astep.grad_batch.grads, true_labels, prot_rng);

      StepRecord rec;
      rec.step = step;
      rec.train_loss = astep.loss;
      GradBatch seen{communicated, true_labels};
      for (const auto& hook : hooks) rec.leak_auc.push_back(hook.fn(seen, attack_rng));

      // Synthetic-data detectors (the attack AUCs, not the label-leak AUCs).
      if (synth.beta > 0.0 && communicated.rows >= 3) {
        try {
          det_labels.add(spectral_attack(communicated), synth_label_flag);
        } catch (const DegenerateDataError&) {
        }
      }
      if (synth.alpha > 0.0 && embeddings.rows >= 3) {
        std::vector<int> active_view(b);
        for (std::size_t i = 0; i < b; ++i) active_view[i] = targets[i] >= 0.5 ? 1 : 0;
        try {
          det_features.add(spectral_attack_joint(embeddings, active_view), synth_feature_flag);
        } catch (const DegenerateDataError&) {
        }
        if (raw_sampling) {
          try {
            det_features_raw.add(spectral_attack(features), synth_feature_flag);
          } catch (const DegenerateDataError&) {
          }
        }
      }

      backward_passive(model.f, cache, communicated, tcfg.learning_rate, &cut_synth);
      sgd_update_active(model.h, astep, tcfg.learning_rate);

      ++step;
      if (step % tcfg.eval_every == 0 || step == total_steps) {
        EvalResult ev = evaluate(model, test_data, tcfg.report_inverse);
        rec.test_loss = ev.loss;
        rec.test_auc = ev.auc;
      }
      report.steps.push_back(std::move(rec));
      if (step == total_steps) {
        report.last_communicated_grads = communicated;
        report.last_labels = true_labels;
      }
    }
  }

  EvalResult ev = evaluate(model, test_data, tcfg.report_inverse);
  report.final_test_loss = ev.loss;
  report.final_test_auc = ev.auc;
  report.final_test_ace = ev.ace;

  if (tcfg.report_inverse) {
    Mat emb = forward_passive(model.f, test_data.features);
    for (std::size_t i = 0; i < test_data.size(); ++i) {
      double logit = model.h.b;
      for (std::size_t j = 0; j < emb.cols; ++j) logit += model.h.w[j] * emb(i, j);
      double p = 1.0 / (1.0 + std::exp(-logit));
      bool clamped = false;
      calibrate_inverse(p, cal, &clamped);
      clamp_count += static_cast<std::size_t>(clamped);
      ++clamp_total;
    }
  }

  ExperimentResult out;
  out.report = std::move(report);
  out.summary.seed = tcfg.seed;
  out.summary.test_auc = out.report.final_test_auc;
  out.summary.test_loss = out.report.final_test_loss;
  out.summary.ace = out.report.final_test_ace;
  out.summary.late_leak_auc = late_leak_auc(out.report);
  out.summary.attack_auc_labels = det_labels.mean();
  out.summary.attack_auc_features = det_features.mean();
  out.summary.attack_auc_features_raw = det_features_raw.mean();
  if (clamp_total > 0)
    out.summary.calibration_clamp_freq =
        static_cast<double>(clamp_count) / static_cast<double>(clamp_total);
  return out;
}

std::vector<std::string> ownership_ids(const Dataset& data, const std::vector<bool>& mask) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (mask[i]) out.push_back(data.ids[i]);
  return out;
}

}  // namespace

GroupParams group_params_from_name(const std::string& name) {
  if (name == "modp2048") return GroupParams::modp2048();
  if (name == "tiny") return GroupParams::tiny_test();
  mpz_class p;
  if (p.set_str(name, 10) != 0)
    throw ArgumentError("group params: expected modp2048, tiny, or a decimal prime");
  return GroupParams::from_prime(p);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  Dataset all = cfg.dataset_csv ? load_dataset_csv(*cfg.dataset_csv) : gen_dataset(cfg.dataset);
  Rng split_rng(cfg.dataset.seed ^ 0x5eedULL);
  auto [train_data, test_data] = train_test_split(all, cfg.test_fraction, split_rng);

  std::optional<std::size_t> psu_union;
  if (cfg.synth && cfg.psu) {
    // Alignment step: both parties derive the shared UID set for the union
    // of their id sets; training then runs over that union.
    Ownership own = draw_ownership(train_data.size(), *cfg.synth);
    auto ids_a = ownership_ids(train_data, own.label_owned);
    auto ids_p = ownership_ids(train_data, own.feature_owned);
    GroupParams params = group_params_from_name(cfg.psu->prime);
    auto [ta, tp] = make_in_process_pair();
    UidMap map_a, map_p;
    std::exception_ptr err_a, err_p;
    std::thread th([&] {
      try {
        Rng r(cfg.train.seed ^ 0xa11ce);
        map_a = run_psu(PsuRole::active, ids_a, params, *ta, r);
      } catch (...) {
        err_a = std::current_exception();
      }
    });
    try {
      Rng r(cfg.train.seed ^ 0xb0b);
      map_p = run_psu(PsuRole::passive, ids_p, params, *tp, r);
    } catch (...) {
      err_p = std::current_exception();
    }
    th.join();
    if (err_a) std::rethrow_exception(err_a);
    if (err_p) std::rethrow_exception(err_p);
    if (map_a.uids != map_p.uids)
      throw ProtocolError("run_experiment: parties derived different UID sets");
    psu_union = map_a.uids.size();
  }

  ExperimentResult result;
  if (cfg.synth) {
    result = run_union_experiment(cfg, train_data, test_data);
  } else {
    Rng init_rng(cfg.train.seed ^ 0x696e6974ULL);
    SplitModel model = init_split_model(train_data.features.cols, cfg.f_widths, init_rng);
    TrainHooks hooks;
    for (const auto& a : cfg.attacks) hooks.attacks.push_back(make_attack_hook(a));
    TrainReport report = train(model, train_data, &test_data, cfg.train, hooks);
    result.report = std::move(report);
    result.summary.seed = cfg.train.seed;
    result.summary.test_auc = result.report.final_test_auc;
    result.summary.test_loss = result.report.final_test_loss;
    result.summary.ace = result.report.final_test_ace;
    result.summary.late_leak_auc = late_leak_auc(result.report);
  }
  result.summary.psu_union_size = psu_union;
  return result;
}

std::string summary_csv(const std::vector<ExperimentSummary>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "param,seed,test_auc,test_loss,ace";
  if (!rows.empty())
    for (const auto& [name, _] : rows.front().late_leak_auc) os << ",leak_auc_" << name;
  os << ",attack_auc_labels,attack_auc_features,attack_auc_features_raw,clamp_freq,psu_union\n";
  for (const auto& r : rows) {
    os << r.param << "," << r.seed << "," << r.test_auc << "," << r.test_loss << "," << r.ace;
    for (const auto& [_, v] : r.late_leak_auc) os << "," << v;
    auto opt = [&os](const std::optional<double>& v) {
      os << ",";
      if (v) os << *v;
    };
    opt(r.attack_auc_labels);
    opt(r.attack_auc_features);
    opt(r.attack_auc_features_raw);
    opt(r.calibration_clamp_freq);
    os << ",";
    if (r.psu_union_size) os << *r.psu_union_size;
    os << "\n";
  }
  return os.str();
}

std::vector<ExperimentSummary> parse_summary_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ArgumentError("parse_summary_csv: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<ExperimentSummary> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    ExperimentSummary row;
    for (const auto& col : header) {
      if (!std::getline(ss, cell, ',')) cell.clear();
      if (cell.empty()) continue;
      if (col == "param")
        row.param = std::stod(cell);
      else if (col == "seed")
        row.seed = std::strtoull(cell.c_str(), nullptr, 10);
      else if (col == "test_auc")
        row.test_auc = std::stod(cell);
      else if (col == "test_loss")
        row.test_loss = std::stod(cell);
      else if (col == "ace")
        row.ace = std::stod(cell);
      else if (col.rfind("leak_auc_", 0) == 0)
        row.late_leak_auc.emplace_back(col.substr(9), std::stod(cell));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  {
    std::ofstream os(cfg.output_dir + "/steps.csv");
    os << result.report.to_csv();
  }
  {
    std::ofstream os(cfg.output_dir + "/summary.csv");
    os << summary_csv({result.summary});
  }
}

std::vector<ExperimentSummary> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ArgumentError("run_sweep: no sweep section configured");
  const SweepPart& sweep = *cfg.sweep;
  std::vector<ExperimentSummary> rows;
  for (double value : sweep.values) {
    for (std::uint64_t seed : sweep.seeds) {
      ExperimentConfig point = cfg;
      point.sweep.reset();
      point.train.seed = seed;
      if (sweep.param == "iso_s") {
        point.train.protection = ProtectionConfig{};
        point.train.protection.kind = ProtectionConfig::Kind::iso;
        point.train.protection.iso_s = value;
      } else if (sweep.param == "marvell_L") {
        point.train.protection = ProtectionConfig{};
        point.train.protection.kind = ProtectionConfig::Kind::marvell;
        point.train.protection.marvell_L = value;
      } else if (sweep.param == "marvell_sum_kl") {
        point.train.protection = ProtectionConfig{};
        point.train.protection.kind = ProtectionConfig::Kind::marvell;
        point.train.protection.marvell_sum_kl = value;
      } else {
        throw ArgumentError("run_sweep: unknown sweep param '" + sweep.param + "'");
      }
      ExperimentSummary summary = run_experiment(point).summary;
      summary.param = value;
      summary.seed = seed;
      rows.push_back(std::move(summary));
    }
  }
  return rows;
}

std::string report_table_csv(const std::vector<ExperimentSummary>& rows) {
  std::map<double, std::vector<const ExperimentSummary*>> by_param;
  for (const auto& r : rows) by_param[r.param].push_back(&r);
  std::ostringstream os;
  os.precision(12);
  os << "param,leak_auc,test_auc,test_loss,ace\n";
  for (const auto& [param, group] : by_param) {
    std::vector<double> leak, auc_v, loss_v, ace_v;
    for (const auto* r : group) {
      if (!r->late_leak_auc.empty()) leak.push_back(r->late_leak_auc.front().second);
      auc_v.push_back(r->test_auc);
      loss_v.push_back(r->test_loss);
      ace_v.push_back(r->ace);
    }
    os << param << "," << median_of(leak) << "," << median_of(auc_v) << ","
       << median_of(loss_v) << "," << median_of(ace_v) << "\n";
  }
  return os.str();
}

PsuSelfTest psu_self_test(std::size_t size_a, std::size_t size_b, double overlap,
                          const GroupParams& params, std::uint64_t seed) {
  if (!(overlap >= 0.0 && overlap <= 1.0))
    throw ArgumentError("psu_self_test: overlap in [0,1]");
  std::size_t n_common =
      static_cast<std::size_t>(std::lround(overlap * static_cast<double>(std::min(size_a, size_b))));
  char buf[32];
  std::vector<std::string> ids_a, ids_b;
  for (std::size_t i = 0; i < n_common; ++i) {
    std::snprintf(buf, sizeof buf, "common:%08zx:%zu", static_cast<std::size_t>(seed), i);
    ids_a.push_back(buf);
    ids_b.push_back(buf);
  }
  for (std::size_t i = n_common; i < size_a; ++i) {
    std::snprintf(buf, sizeof buf, "a:%08zx:%zu", static_cast<std::size_t>(seed), i);
    ids_a.push_back(buf);
  }
  for (std::size_t i = n_common; i < size_b; ++i) {
    std::snprintf(buf, sizeof buf, "b:%08zx:%zu", static_cast<std::size_t>(seed), i);
    ids_b.push_back(buf);
  }

  auto [ta, tp] = make_in_process_pair();
  UidMap map_a, map_p;
  std::exception_ptr err_a;
  std::thread th([&] {
    try {
      Rng r(seed * 2 + 1);
      map_a = run_psu(PsuRole::active, ids_a, params, *ta, r);
    } catch (...) {
      err_a = std::current_exception();
    }
  });
  Rng r(seed * 2 + 2);
  map_p = run_psu(PsuRole::passive, ids_b, params, *tp, r);
  th.join();
  if (err_a) std::rethrow_exception(err_a);

  PsuSelfTest out;
  out.union_size = map_a.uids.size();
  out.maps_consistent = map_a.uids == map_p.uids;
  for (std::size_t i = 0; i < n_common && out.maps_consistent; ++i)
    out.maps_consistent = map_a.mapping.at(ids_a[i]) == map_p.mapping.at(ids_a[i]);
  return out;
}

}  // namespace splitshield
