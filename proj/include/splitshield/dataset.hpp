#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "splitshield/rng.hpp"
#include "splitshield/splitnn.hpp"

namespace splitshield {

// Desk-scale synthetic stand-in for the large production datasets: two
// Gaussian feature clouds with a tunable mean separation and class prior.
struct DatasetSpec {
  std::size_t n = 20000;
  std::size_t d_in = 16;
  double pos_fraction = 0.1;
  double separation = 3.0;  // || mu_1 - mu_0 ||, along the all-ones direction
  double noise_std = 1.0;
  std::uint64_t seed = 1;
};

// labels ~ Bernoulli(pos_fraction), features ~ N(mu_y, noise_std^2 I) with
// mu_1 - mu_0 = separation * (1,...,1)/sqrt(d_in). Deterministic given seed.
Dataset gen_dataset(const DatasetSpec& spec);

// CSV schema: id,x0..x{d_in-1},label. Byte-identical for identical inputs.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             Rng& rng);

}  // namespace splitshield
