#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace starme {

// Deterministic random stream. Every stochastic routine in the project draws
// through this wrapper so that a (seed, config, data) triple pins every
// downstream number on a given build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return unif_(gen_); }

  double normal() { return norm_(gen_); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double gamma(double shape, double scale) {
    std::gamma_distribution<double> g(shape, scale);
    return g(gen_);
  }

  // X ~ IG(shape, rate): 1/X ~ Gamma(shape, rate)
  double inverse_gamma(double shape, double rate) {
    return 1.0 / gamma(shape, 1.0 / rate);
  }

  double beta(double p, double q) {
    double a = gamma(p, 1.0);
    double b = gamma(q, 1.0);
    return a / (a + b);
  }

  int bernoulli(double prob) { return uniform() < prob ? 1 : 0; }

  std::uint64_t uniform_int(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
    return d(gen_);
  }

  // index drawn from unnormalized nonnegative weights
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace starme
