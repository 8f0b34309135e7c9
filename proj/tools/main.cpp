#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "splitshield/attack.hpp"
#include "splitshield/config.hpp"
#include "splitshield/dataset.hpp"
#include "splitshield/errors.hpp"
#include "splitshield/experiment.hpp"
#include "splitshield/psu.hpp"

namespace ss = splitshield;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ss::ArgumentError("cannot open " + path);
  os << text;
}

void dump_grads_csv(const std::string& path, const ss::Mat& grads,
                    const std::vector<int>& labels) {
  std::ofstream os(path);
  if (!os) throw ss::ArgumentError("cannot open " + path);
  for (std::size_t j = 0; j < grads.cols; ++j) os << "g" << j << ",";
  os << "label\n";
  os.precision(17);
  for (std::size_t i = 0; i < grads.rows; ++i) {
    for (std::size_t j = 0; j < grads.cols; ++j) os << grads(i, j) << ",";
    os << labels[i] << "\n";
  }
}

std::pair<ss::Mat, std::vector<int>> load_grads_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ss::ArgumentError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw ss::ArgumentError("empty gradient csv");
  std::size_t cols = 0;
  for (char c : line) cols += static_cast<std::size_t>(c == ',');
  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream sl(line);
    std::string cell;
    for (std::size_t j = 0; j < cols; ++j) {
      std::getline(sl, cell, ',');
      values.push_back(std::stod(cell));
    }
    std::getline(sl, cell, ',');
    labels.push_back(std::stoi(cell));
  }
  ss::Mat grads(labels.size(), cols);
  grads.a = std::move(values);
  return {std::move(grads), std::move(labels)};
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& spec) {
  auto colon = spec.rfind(':');
  if (colon == std::string::npos)
    throw ss::ArgumentError("expected host:port, got " + spec);
  return {spec.substr(0, colon),
          static_cast<std::uint16_t>(std::stoul(spec.substr(colon + 1)))};
}

std::vector<std::string> load_ids(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ss::ArgumentError("cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ids.push_back(line);
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splitshield: split-learning label-leakage lab"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
  std::string gen_config, gen_out = "data.csv";
  ss::DatasetSpec spec;
  gen->add_option("--config", gen_config, "config file with a [dataset] section");
  gen->add_option("--out", gen_out, "output CSV path");
  gen->add_option("--n", spec.n);
  gen->add_option("--d-in", spec.d_in);
  gen->add_option("--pos-fraction", spec.pos_fraction);
  gen->add_option("--separation", spec.separation);
  gen->add_option("--noise-std", spec.noise_std);
  gen->add_option("--seed", spec.seed);

  // train
  auto* tr = app.add_subcommand("train", "run one training experiment");
  std::string tr_config, tr_out, tr_dump;
  tr->add_option("--config", tr_config, "experiment config file (default: bundled demo)");
  tr->add_option("--out", tr_out, "output directory override");
  tr->add_option("--dump-grads", tr_dump, "dump the last communicated gradient batch to CSV");

  // attack
  auto* at = app.add_subcommand("attack", "offline attack on a dumped gradient CSV");
  std::string at_input, at_kind = "norm", at_sim = "inner";
  std::size_t at_hints = 5;
  std::uint64_t at_seed = 1;
  at->add_option("--input", at_input, "gradient CSV (g0..gN,label)")->required();
  at->add_option("--attack", at_kind, "norm | hint | spectral");
  at->add_option("--n-hints", at_hints);
  at->add_option("--similarity", at_sim, "inner | cosine");
  at->add_option("--seed", at_seed);

  // psu
  auto* ps = app.add_subcommand("psu", "run the private set union protocol");
  std::string ps_role = "active", ps_listen, ps_connect, ps_ids, ps_prime = "modp2048";
  bool ps_inproc = false;
  std::size_t ps_size_a = 64, ps_size_b = 64, ps_dummies = 0;
  double ps_overlap = 0.5;
  std::uint64_t ps_seed = 1;
  ps->add_option("--role", ps_role, "active | passive");
  ps->add_option("--listen", ps_listen, "host:port to accept the peer on");
  ps->add_option("--connect", ps_connect, "host:port of the listening peer");
  ps->add_flag("--in-process", ps_inproc, "run both roles in one process (self-test)");
  ps->add_option("--ids", ps_ids, "file with one id per line");
  ps->add_option("--size-a", ps_size_a);
  ps->add_option("--size-b", ps_size_b);
  ps->add_option("--overlap", ps_overlap);
  ps->add_option("--prime", ps_prime, "modp2048 | tiny | decimal safe prime");
  ps->add_option("--dummies", ps_dummies, "append k random dummy ids");
  ps->add_option("--seed", ps_seed);

  // sweep
  auto* sw = app.add_subcommand("sweep", "run the sweep in the config's [sweep] section");
  std::string sw_config, sw_out;
  sw->add_option("--config", sw_config)->required();
  sw->add_option("--out", sw_out, "output directory override");

  // report
  auto* rp = app.add_subcommand("report", "aggregate sweep summaries into a trade-off table");
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  rp->add_option("--inputs", rp_inputs, "summary CSV files")->required();
  rp->add_option("--out", rp_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      if (!gen_config.empty()) {
        ss::ExperimentConfig cfg = ss::load_experiment_config(gen_config);
        spec = cfg.dataset;
      }
      ss::Dataset data = ss::gen_dataset(spec);
      ss::write_dataset_csv(data, gen_out);
      std::cout << "wrote " << data.size() << " rows to " << gen_out << "\n";
    } else if (*tr) {
      ss::ExperimentConfig cfg =
          tr_config.empty() ? ss::demo_config() : ss::load_experiment_config(tr_config);
      if (!tr_out.empty()) cfg.output_dir = tr_out;
      ss::ExperimentResult result = ss::run_experiment(cfg);
      ss::write_experiment_outputs(result, cfg);
      if (!tr_dump.empty())
        dump_grads_csv(tr_dump, result.report.last_communicated_grads,
                       result.report.last_labels);
      std::cout << "test_auc=" << result.summary.test_auc
                << " test_loss=" << result.summary.test_loss
                << " ace=" << result.summary.ace;
      for (const auto& [name, v] : result.summary.late_leak_auc)
        std::cout << " late_leak_auc_" << name << "=" << v;
      std::cout << "\noutputs in " << cfg.output_dir << "\n";
    } else if (*at) {
      auto [grads, labels] = load_grads_csv(at_input);
      ss::ConfigSection section;
      section["n_hints"] = ss::ConfigValue{static_cast<double>(at_hints)};
      section["similarity"] = ss::ConfigValue{at_sim};
      ss::AttackKind kind = ss::attack_from_name(at_kind, section);
      ss::Rng rng(at_seed);
      ss::AttackResult result = ss::run_attack(kind, ss::GradBatch{grads, labels}, rng);
      std::cout << "attack=" << at_kind << " rows=" << grads.rows
                << " leak_auc=" << result.leak_auc
                << (result.degraded ? " (degraded)" : "") << "\n";
    } else if (*ps) {
      ss::GroupParams params = ss::group_params_from_name(ps_prime);
      if (ps_inproc) {
        ss::PsuSelfTest result =
            ss::psu_self_test(ps_size_a, ps_size_b, ps_overlap, params, ps_seed);
        std::cout << "|U| = " << result.union_size << "\n";
        std::cout << "maps consistent: " << (result.maps_consistent ? "true" : "false")
                  << "\n";
        if (!result.maps_consistent) return 1;
      } else {
        if (ps_ids.empty()) throw ss::ArgumentError("psu over TCP needs --ids");
        std::vector<std::string> ids = load_ids(ps_ids);
        ss::Rng rng(ps_seed);
        if (ps_dummies > 0) ids = ss::with_dummy_ids(std::move(ids), ps_dummies, rng);
        std::unique_ptr<ss::TcpTransport> transport;
        if (!ps_listen.empty()) {
          auto [host, port] = split_host_port(ps_listen);
          transport = ss::TcpTransport::listen_accept(host, port);
        } else if (!ps_connect.empty()) {
          auto [host, port] = split_host_port(ps_connect);
          transport = ss::TcpTransport::connect(host, port);
        } else {
          throw ss::ArgumentError("psu over TCP needs --listen or --connect");
        }
        ss::PsuRole role =
            ps_role == "active" ? ss::PsuRole::active : ss::PsuRole::passive;
        ss::UidMap map = ss::run_psu(role, ids, params, *transport, rng);
        std::cout << "|U| = " << map.uids.size() << "\n";
        std::cout << "mapped " << map.mapping.size() << " own ids\n";
      }
    } else if (*sw) {
      ss::ExperimentConfig cfg = ss::load_experiment_config(sw_config);
      if (!sw_out.empty()) cfg.output_dir = sw_out;
      std::vector<ss::ExperimentSummary> rows = ss::run_sweep(cfg);
      std::filesystem::create_directories(cfg.output_dir);
      write_text(cfg.output_dir + "/sweep_summary.csv", ss::summary_csv(rows));
      std::cout << "wrote " << rows.size() << " rows to " << cfg.output_dir
                << "/sweep_summary.csv\n";
    } else if (*rp) {
      std::vector<ss::ExperimentSummary> rows;
      for (const auto& path : rp_inputs) {
        std::ifstream is(path);
        if (!is) throw ss::ArgumentError("cannot open " + path);
        std::ostringstream os;
        os << is.rdbuf();
        auto part = ss::parse_summary_csv(os.str());
        rows.insert(rows.end(), part.begin(), part.end());
      }
      std::string table = ss::report_table_csv(rows);
      if (rp_out.empty()) {
        std::cout << table;
      } else {
        write_text(rp_out, table);
        std::cout << "wrote " << rp_out << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
