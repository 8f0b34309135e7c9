#include "splitshield/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "splitshield/errors.hpp"

namespace splitshield {

Dataset gen_dataset(const DatasetSpec& spec) {
  if (spec.n == 0 || spec.d_in == 0) throw ArgumentError("gen_dataset: empty spec");
  if (!(spec.pos_fraction > 0.0 && spec.pos_fraction < 1.0))
    throw ArgumentError("gen_dataset: pos_fraction in (0,1)");
  if (spec.pos_fraction * static_cast<double>(spec.n) < 2.0)
    throw ArgumentError("gen_dataset: expected positive count below 2");
  if (spec.noise_std < 0.0) throw ArgumentError("gen_dataset: negative noise std");

  Rng rng(spec.seed);
  Dataset out;
  out.features = Mat(spec.n, spec.d_in);
  out.labels.resize(spec.n);
  out.ids.resize(spec.n);

  const double shift = spec.separation / std::sqrt(static_cast<double>(spec.d_in));
  for (std::size_t i = 0; i < spec.n; ++i) {
    int y = rng.uniform() < spec.pos_fraction ? 1 : 0;
    out.labels[i] = y;
    for (std::size_t j = 0; j < spec.d_in; ++j)
      out.features(i, j) = (y == 1 ? shift : 0.0) + spec.noise_std * rng.normal();
    char buf[24];
    std::snprintf(buf, sizeof buf, "u%06zu", i);
    out.ids[i] = buf;
  }
  return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("write_dataset_csv: cannot open " + path);
  os << "id";
  for (std::size_t j = 0; j < data.features.cols; ++j) os << ",x" << j;
  os << ",label\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.ids[i];
    for (std::size_t j = 0; j < data.features.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      os << ',' << buf;
    }
    os << ',' << data.labels[i] << '\n';
  }
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("load_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw ArgumentError("load_dataset_csv: empty file");
  std::size_t cols = 0;
  for (char c : line) cols += static_cast<std::size_t>(c == ',');
  if (cols < 2) throw ArgumentError("load_dataset_csv: expected id,x...,label header");
  const std::size_t d_in = cols - 1;

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    ids.push_back(cell);
    for (std::size_t j = 0; j < d_in; ++j) {
      std::getline(ss, cell, ',');
      values.push_back(std::stod(cell));
    }
    std::getline(ss, cell, ',');
    labels.push_back(std::stoi(cell));
  }

  Dataset out;
  out.ids = std::move(ids);
  out.labels = std::move(labels);
  out.features = Mat(out.labels.size(), d_in);
  out.features.a = std::move(values);
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ArgumentError("train_test_split: fraction in (0,1)");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                    test_fraction * static_cast<double>(data.size())));
  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset d;
    d.features = Mat(end - begin, data.features.cols);
    d.labels.resize(end - begin);
    d.ids.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      d.features.set_row(i - begin, data.features.row(order[i]));
      d.labels[i - begin] = data.labels[order[i]];
      d.ids[i - begin] = data.ids[order[i]];
    }
    return d;
  };
  return {take(n_test, data.size()), take(0, n_test)};
}

}  // namespace splitshield
