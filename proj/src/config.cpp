#include "splitshield/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "splitshield/errors.hpp"

namespace splitshield {

double ConfigValue::as_number() const {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  throw ArgumentError("config: expected a number");
}

bool ConfigValue::as_bool() const {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw ArgumentError("config: expected a boolean");
}

const std::string& ConfigValue::as_string() const {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw ArgumentError("config: expected a string");
}

std::vector<double> ConfigValue::as_numbers() const {
  if (auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  if (auto* d = std::get_if<double>(&v)) return {*d};
  throw ArgumentError("config: expected a number array");
}

std::vector<std::string> ConfigValue::as_strings() const {
  if (auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
  if (auto* s = std::get_if<std::string>(&v)) return {*s};
  throw ArgumentError("config: expected a string array");
}

namespace {

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

ConfigValue parse_scalar(const std::string& raw) {
  std::string t = strip(raw);
  if (t.empty()) throw ArgumentError("config: empty value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') throw ArgumentError("config: unterminated string");
    return ConfigValue{t.substr(1, t.size() - 2)};
  }
  if (t == "true") return ConfigValue{true};
  if (t == "false") return ConfigValue{false};
  std::size_t used = 0;
  double d = std::stod(t, &used);
  if (used != t.size()) throw ArgumentError("config: bad value '" + t + "'");
  return ConfigValue{d};
}

ConfigValue parse_value(const std::string& raw) {
  std::string t = strip(raw);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw ArgumentError("config: unterminated array");
    std::string inner = t.substr(1, t.size() - 2);
    std::vector<std::string> items;
    std::string cur;
    bool in_str = false;
    for (char c : inner) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        items.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!strip(cur).empty()) items.push_back(cur);
    std::vector<double> nums;
    std::vector<std::string> strs;
    bool numeric = true;
    for (const auto& item : items) {
      ConfigValue v = parse_scalar(item);
      if (auto* d = std::get_if<double>(&v.v)) {
        nums.push_back(*d);
      } else if (auto* s = std::get_if<std::string>(&v.v)) {
        numeric = false;
        strs.push_back(*s);
      } else {
        throw ArgumentError("config: arrays hold numbers or strings");
      }
    }
    if (numeric && strs.empty()) return ConfigValue{nums};
    if (!numeric && nums.empty()) return ConfigValue{strs};
    throw ArgumentError("config: mixed array types");
  }
  return parse_scalar(t);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::string section;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // Strip comments outside strings.
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line = line.substr(0, i);
        break;
      }
    }
    std::string t = strip(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ArgumentError("config: bad section at line " +
                                               std::to_string(lineno));
      section = strip(t.substr(1, t.size() - 2));
      map[section];
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config: expected key = value at line " + std::to_string(lineno));
    std::string key = strip(t.substr(0, eq));
    map[section][key] = parse_value(t.substr(eq + 1));
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("config: cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config_text(os.str());
}

ProtectionConfig protection_from_section(const ConfigSection& section) {
  ProtectionConfig cfg;
  auto it = section.find("kind");
  std::string kind = it == section.end() ? "none" : it->second.as_string();
  if (kind == "none") {
    cfg.kind = ProtectionConfig::Kind::none;
  } else if (kind == "iso") {
    cfg.kind = ProtectionConfig::Kind::iso;
    if (auto s = section.find("s"); s != section.end()) cfg.iso_s = s->second.as_number();
  } else if (kind == "max_norm") {
    cfg.kind = ProtectionConfig::Kind::max_norm;
  } else if (kind == "marvell") {
    cfg.kind = ProtectionConfig::Kind::marvell;
    if (auto s = section.find("sum_kl"); s != section.end())
      cfg.marvell_sum_kl = s->second.as_number();
    if (auto s = section.find("L"); s != section.end()) cfg.marvell_L = s->second.as_number();
    if (auto s = section.find("reuse_power"); s != section.end())
      cfg.reuse_power = s->second.as_bool();
  } else {
    throw ArgumentError("config: unknown protection kind '" + kind + "'");
  }
  if (auto s = section.find("seed"); s != section.end())
    cfg.seed = static_cast<std::uint64_t>(s->second.as_number());
  return cfg;
}

AttackKind attack_from_name(const std::string& name, const ConfigSection& section) {
  AttackKind kind;
  if (name == "norm") {
    kind.type = AttackKind::Type::norm;
  } else if (name == "hint") {
    kind.type = AttackKind::Type::hint;
    if (auto s = section.find("n_hints"); s != section.end())
      kind.n_hints = static_cast<std::size_t>(s->second.as_number());
    if (auto s = section.find("similarity"); s != section.end()) {
      const std::string& sim = s->second.as_string();
      if (sim == "inner")
        kind.similarity = AttackKind::Similarity::inner;
      else if (sim == "cosine")
        kind.similarity = AttackKind::Similarity::cosine;
      else
        throw ArgumentError("config: unknown similarity '" + sim + "'");
    }
  } else if (name == "spectral") {
    kind.type = AttackKind::Type::spectral;
  } else {
    throw ArgumentError("config: unknown attack '" + name + "'");
  }
  return kind;
}

LabelStrategy label_strategy_from_name(const std::string& name) {
  LabelStrategy s;
  if (name == "label-majority")
    s.kind = LabelStrategy::Kind::majority;
  else if (name == "label-minority")
    s.kind = LabelStrategy::Kind::minority;
  else if (name == "label-random-pos")
    s.kind = LabelStrategy::Kind::random_pos;
  else if (name == "label-random-pred")
    s.kind = LabelStrategy::Kind::random_pred;
  else if (name == "label-neighbors")
    s.kind = LabelStrategy::Kind::neighbors;
  else
    throw ArgumentError("config: unknown label strategy '" + name + "'");
  return s;
}

FeatureStrategy feature_strategy_from_name(const std::string& name) {
  FeatureStrategy s;
  if (name == "fea-sampling")
    s.kind = FeatureStrategy::Kind::sampling;
  else if (name == "fea-gaussian")
    s.kind = FeatureStrategy::Kind::gaussian;
  else if (name == "fea-random")
    s.kind = FeatureStrategy::Kind::random_moving;
  else
    throw ArgumentError("config: unknown feature strategy '" + name + "'");
  return s;
}

CalibrationConfig::Mode calibration_mode_from_name(const std::string& name) {
  if (name == "none") return CalibrationConfig::Mode::none;
  if (name == "tr") return CalibrationConfig::Mode::train_time;
  if (name == "te") return CalibrationConfig::Mode::test_time;
  throw ArgumentError("config: unknown calibration mode '" + name + "'");
}

ExperimentConfig experiment_config_from(const ConfigMap& map) {
  ExperimentConfig cfg;

  if (auto it = map.find("dataset"); it != map.end()) {
    const ConfigSection& s = it->second;
    if (auto v = s.find("csv"); v != s.end()) cfg.dataset_csv = v->second.as_string();
    if (auto v = s.find("n"); v != s.end())
      cfg.dataset.n = static_cast<std::size_t>(v->second.as_number());
    if (auto v = s.find("d_in"); v != s.end())
      cfg.dataset.d_in = static_cast<std::size_t>(v->second.as_number());
    if (auto v = s.find("pos_fraction"); v != s.end())
      cfg.dataset.pos_fraction = v->second.as_number();
    if (auto v = s.find("separation"); v != s.end())
      cfg.dataset.separation = v->second.as_number();
    if (auto v = s.find("noise_std"); v != s.end())
      cfg.dataset.noise_std = v->second.as_number();
    if (auto v = s.find("seed"); v != s.end())
      cfg.dataset.seed = static_cast<std::uint64_t>(v->second.as_number());
    if (auto v = s.find("test_fraction"); v != s.end())
      cfg.test_fraction = v->second.as_number();
  }

  if (auto it = map.find("model"); it != map.end()) {
    if (auto v = it->second.find("f_widths"); v != it->second.end()) {
      cfg.f_widths.clear();
      for (double w : v->second.as_numbers())
        cfg.f_widths.push_back(static_cast<std::size_t>(w));
    }
  }

  if (auto it = map.find("train"); it != map.end()) {
    const ConfigSection& s = it->second;
    if (auto v = s.find("batch_size"); v != s.end())
      cfg.train.batch_size = static_cast<std::size_t>(v->second.as_number());
    if (auto v = s.find("learning_rate"); v != s.end())
      cfg.train.learning_rate = v->second.as_number();
    if (auto v = s.find("epochs"); v != s.end())
      cfg.train.epochs = static_cast<std::size_t>(v->second.as_number());
    if (auto v = s.find("seed"); v != s.end())
      cfg.train.seed = static_cast<std::uint64_t>(v->second.as_number());
    if (auto v = s.find("eval_every"); v != s.end())
      cfg.train.eval_every = static_cast<std::size_t>(v->second.as_number());
  }

  if (auto it = map.find("protection"); it != map.end())
    cfg.train.protection = protection_from_section(it->second);

  if (auto it = map.find("attacks"); it != map.end()) {
    const ConfigSection& s = it->second;
    if (auto v = s.find("attack"); v != s.end())
      for (const auto& name : v->second.as_strings())
        cfg.attacks.push_back(attack_from_name(name, s));
  }

  if (auto it = map.find("synth"); it != map.end()) {
    const ConfigSection& s = it->second;
    bool enabled = true;
    if (auto v = s.find("enabled"); v != s.end()) enabled = v->second.as_bool();
    if (enabled) {
      SynthPart part;
      if (auto v = s.find("beta"); v != s.end()) part.beta = v->second.as_number();
      if (auto v = s.find("alpha"); v != s.end()) part.alpha = v->second.as_number();
      if (auto v = s.find("label"); v != s.end())
        part.label = label_strategy_from_name(v->second.as_string());
      if (auto v = s.find("sample_times"); v != s.end())
        part.label.sample_times = static_cast<std::size_t>(v->second.as_number());
      if (auto v = s.find("k"); v != s.end())
        part.label.k = static_cast<std::size_t>(v->second.as_number());
      if (auto v = s.find("feature"); v != s.end())
        part.feature = feature_strategy_from_name(v->second.as_string());
      if (auto v = s.find("s"); v != s.end()) part.feature.s = v->second.as_number();
      if (auto v = s.find("calibration"); v != s.end())
        part.calibration = calibration_mode_from_name(v->second.as_string());
      if (auto v = s.find("ownership_seed"); v != s.end())
        part.ownership_seed = static_cast<std::uint64_t>(v->second.as_number());
      cfg.synth = part;
    }
  }

  if (auto it = map.find("psu"); it != map.end()) {
    const ConfigSection& s = it->second;
    bool enabled = true;
    if (auto v = s.find("enabled"); v != s.end()) enabled = v->second.as_bool();
    if (enabled) {
      PsuPart part;
      if (auto v = s.find("size_a"); v != s.end())
        part.size_a = static_cast<std::size_t>(v->second.as_number());
      if (auto v = s.find("size_b"); v != s.end())
        part.size_b = static_cast<std::size_t>(v->second.as_number());
      if (auto v = s.find("overlap"); v != s.end()) part.overlap = v->second.as_number();
      if (auto v = s.find("prime"); v != s.end()) part.prime = v->second.as_string();
      cfg.psu = part;
    }
  }

  if (auto it = map.find("sweep"); it != map.end()) {
    const ConfigSection& s = it->second;
    SweepPart part;
    if (auto v = s.find("param"); v != s.end()) part.param = v->second.as_string();
    if (auto v = s.find("values"); v != s.end()) part.values = v->second.as_numbers();
    if (auto v = s.find("seeds"); v != s.end())
      for (double x : v->second.as_numbers())
        part.seeds.push_back(static_cast<std::uint64_t>(x));
    if (part.seeds.empty()) part.seeds = {1};
    if (!part.param.empty()) cfg.sweep = part;
  }

  if (auto it = map.find("output"); it != map.end())
    if (auto v = it->second.find("dir"); v != it->second.end())
      cfg.output_dir = v->second.as_string();

  // Global seed override for reproducing a run from the environment.
  if (const char* env = std::getenv("SPLITSHIELD_SEED")) {
    std::uint64_t seed = std::strtoull(env, nullptr, 10);
    cfg.dataset.seed = seed;
    cfg.train.seed = seed;
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(parse_config_file(path));
}

std::string demo_config_text() {
  return R"cfg(# splitshield demo experiment
[dataset]
n = 20000
d_in = 16
pos_fraction = 0.1
separation = 3.0
noise_std = 1.0
seed = 1
test_fraction = 0.2

[model]
f_widths = [8]

[train]
batch_size = 1024
learning_rate = 0.5
epochs = 3
seed = 1
eval_every = 10

[protection]
kind = "none"

[attacks]
attack = ["norm"]
n_hints = 5
similarity = "inner"

[output]
dir = "out"
)cfg";
}

ExperimentConfig demo_config() {
  return experiment_config_from(parse_config_text(demo_config_text()));
}

}  // namespace splitshield
