#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "splitshield/attack.hpp"
#include "splitshield/dataset.hpp"
#include "splitshield/splitnn.hpp"
#include "splitshield/synth.hpp"

namespace splitshield {

// Flat sectioned key-value config (TOML-compatible subset: [section],
// key = value with numbers, booleans, quoted strings, and one-level arrays).
struct ConfigValue {
  std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>> v;

  double as_number() const;
  bool as_bool() const;
  const std::string& as_string() const;
  std::vector<double> as_numbers() const;
  std::vector<std::string> as_strings() const;
};

using ConfigSection = std::map<std::string, ConfigValue>;
using ConfigMap = std::map<std::string, ConfigSection>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

struct SynthPart {
  double beta = 0.0;   // synthetic-label ratio on the active side
  double alpha = 0.0;  // synthetic-feature ratio on the passive side
  LabelStrategy label;
  FeatureStrategy feature;
  CalibrationConfig::Mode calibration = CalibrationConfig::Mode::none;
  std::uint64_t ownership_seed = 7;
};

struct PsuPart {
  std::size_t size_a = 64;
  std::size_t size_b = 64;
  double overlap = 0.5;
  std::string prime = "modp2048";  // "modp2048" | "tiny" | decimal digits
};

struct SweepPart {
  std::string param;  // "iso_s" | "marvell_L" | "marvell_sum_kl"
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::optional<std::string> dataset_csv;
  double test_fraction = 0.2;
  std::vector<std::size_t> f_widths = {8};
  TrainConfig train;
  std::vector<AttackKind> attacks;
  std::optional<SynthPart> synth;
  std::optional<PsuPart> psu;
  std::optional<SweepPart> sweep;
  std::string output_dir = "out";
};

ExperimentConfig experiment_config_from(const ConfigMap& map);
ExperimentConfig load_experiment_config(const std::string& path);

ProtectionConfig protection_from_section(const ConfigSection& section);
AttackKind attack_from_name(const std::string& name, const ConfigSection& section);
LabelStrategy label_strategy_from_name(const std::string& name);
FeatureStrategy feature_strategy_from_name(const std::string& name);
CalibrationConfig::Mode calibration_mode_from_name(const std::string& name);

// Built-in demo configuration (n = 20000, d_in = 16, d = 8, pos 0.1, B = 1024,
// 3 epochs), sized to finish in well under a minute.
ExperimentConfig demo_config();
std::string demo_config_text();

}  // namespace splitshield
