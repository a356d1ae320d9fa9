#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "softkd/error.hpp"
#include "softkd/simplex.hpp"

namespace softkd {

// Synthetic classification task: Gaussian clusters with optional label noise,
// split into disjoint train/test halves. Everything is a pure function of the
// seed.
struct Dataset {
  std::vector<std::vector<double>> inputs;  // n x D
  std::vector<int> labels;                  // observed (possibly noise-flipped)
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::vector<std::vector<double>> centers;  // C x D cluster centers
  int dim = 0;
  int classes = 0;
  std::uint64_t seed = 0;
};

// C cluster centers drawn on the radius-3 sphere, unit-covariance clusters,
// exactly balanced true labels (round-robin), labels flipped to a uniformly
// random other class with probability `noise`.
inline Dataset gen_task(int dim, int classes, int n, double noise, std::uint64_t seed) {
  if (dim < 2 || classes < 2 || n < 10 * classes || !(noise >= 0.0) || noise >= 0.5)
    fail(errc::bad_params, "need D >= 2, C >= 2, n >= 10C, noise in [0, 0.5)");
  Dataset d;
  d.dim = dim;
  d.classes = classes;
  d.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 0xda7a));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  d.centers.assign(classes, std::vector<double>(dim));
  for (auto& c : d.centers) {
    double norm = 0.0;
    for (auto& x : c) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : c) x *= 3.0 / norm;
  }

  d.inputs.assign(n, std::vector<double>(dim));
  d.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int truth = i % classes;
    for (int j = 0; j < dim; ++j) d.inputs[i][j] = d.centers[truth][j] + normal(rng);
    int label = truth;
    if (noise > 0.0 && unif(rng) < noise) {
      int other = static_cast<int>(unif(rng) * (classes - 1));
      if (other >= truth) ++other;
      label = other;
    }
    d.labels[i] = label;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int half = n / 2;
  d.train_idx.assign(order.begin(), order.begin() + half);
  d.test_idx.assign(order.begin() + half, order.end());
  return d;
}

}  // namespace softkd
