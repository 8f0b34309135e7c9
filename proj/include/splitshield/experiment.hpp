#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "splitshield/config.hpp"
#include "splitshield/psu.hpp"
#include "splitshield/splitnn.hpp"

namespace splitshield {

struct ExperimentSummary {
  double param = std::numeric_limits<double>::quiet_NaN();  // sweep coordinate
  std::uint64_t seed = 0;
  double test_auc = 0.5;
  double test_loss = 0.0;
  double ace = 0.0;
  // Mean leak AUC over the final 25% of training batches, one per attack.
  std::vector<std::pair<std::string, double>> late_leak_auc;

  // Synthetic-data detection, present when a synth part ran. "labels" is the
  // passive party's spectral detector on received gradients, "features" the
  // active party's joint (embedding, label) detector, "features_raw" the
  // raw-feature-level detector that fea-sampling is designed to defeat.
  std::optional<double> attack_auc_labels;
  std::optional<double> attack_auc_features;
  std::optional<double> attack_auc_features_raw;
  std::optional<double> calibration_clamp_freq;

  std::optional<std::size_t> psu_union_size;
};

struct ExperimentResult {
  TrainReport report;
  ExperimentSummary summary;
};

// One full pipeline run: dataset (generated or loaded) -> optional PSU
// alignment -> optional synthetic-data fill -> training with protection and
// per-batch attack evaluation.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes <dir>/steps.csv and <dir>/summary.csv.
void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg);

// Runs cfg.sweep (param x seeds), one summary per point; points are
// independent and any execution order produces identical rows.
std::vector<ExperimentSummary> run_sweep(const ExperimentConfig& cfg);

std::string summary_csv(const std::vector<ExperimentSummary>& rows);
std::vector<ExperimentSummary> parse_summary_csv(const std::string& text);

// Aggregates sweep summaries into the trade-off table: median over seeds per
// parameter value, rows sorted by param. Columns:
// param,leak_auc,test_auc,test_loss,ace (leak_auc is the first attack's).
std::string report_table_csv(const std::vector<ExperimentSummary>& rows);

struct PsuSelfTest {
  std::size_t union_size = 0;
  bool maps_consistent = false;
};

// Runs both PSU roles on two threads over an in-process transport with
// synthetic id sets of the given sizes and overlap fraction.
PsuSelfTest psu_self_test(std::size_t size_a, std::size_t size_b, double overlap,
                          const GroupParams& params, std::uint64_t seed);

GroupParams group_params_from_name(const std::string& name);

}  // namespace splitshield
