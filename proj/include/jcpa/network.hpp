#pragma once

// Random interference-network instances: transmitter/receiver geometry,
// large-scale path loss and Rayleigh power fading, per-pair weights.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcpa/random.hpp"

namespace jcpa {

struct GeometryConfig {
  double area_side = 100.0;   // meters
  double rx_dist_min = 2.0;   // meters
  double rx_dist_max = 10.0;  // meters
  std::size_t d_pairs = 10;
  std::size_t m_channels = 2;

  void validate() const {
    if (!(rx_dist_min > 0.0 && rx_dist_min <= rx_dist_max && rx_dist_max < area_side)) {
      throw std::invalid_argument("GeometryConfig: require 0 < rx_dist_min <= rx_dist_max < area_side");
    }
    if (d_pairs < 1) throw std::invalid_argument("GeometryConfig: d_pairs must be >= 1");
    if (m_channels < 1) throw std::invalid_argument("GeometryConfig: m_channels must be >= 1");
  }

  friend bool operator==(const GeometryConfig&, const GeometryConfig&) = default;
};

struct FadingConfig {
  double pathloss_intercept_db = 38.46;
  double pathloss_exponent_db_per_decade = 20.0;
  double noise_power = 1e-10;  // watts
  double p_max = 1.0;          // watts
  bool rayleigh = true;

  void validate() const {
    if (!(noise_power > 0.0)) throw std::invalid_argument("FadingConfig: noise_power must be > 0");
    if (!(p_max > 0.0)) throw std::invalid_argument("FadingConfig: p_max must be > 0");
  }

  friend bool operator==(const FadingConfig&, const FadingConfig&) = default;
};

/// Distances below this are evaluated at the reference distance so the
/// path-loss law never produces a gain above its 1 m value.
inline constexpr double kReferenceDistance = 1.0;

/// Linear power gain of the large-scale law PL(d) = intercept + slope*log10(d).
inline double pathloss_gain(const FadingConfig& f, double distance) {
  const double d = std::max(distance, kReferenceDistance);
  const double pl_db = f.pathloss_intercept_db + f.pathloss_exponent_db_per_decade * std::log10(d);
  return std::pow(10.0, -pl_db / 10.0);
}

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// D x D x M nonnegative tensor; (rx, tx, ch) = |h_{rx,tx}^ch|^2.
class GainTensor {
 public:
  GainTensor() = default;
  GainTensor(std::size_t d, std::size_t m, double fill = 0.0) : d_(d), m_(m), data_(d * d * m, fill) {}

  std::size_t pairs() const noexcept { return d_; }
  std::size_t channels() const noexcept { return m_; }

  double& operator()(std::size_t rx, std::size_t tx, std::size_t ch) { return data_[(rx * d_ + tx) * m_ + ch]; }
  double operator()(std::size_t rx, std::size_t tx, std::size_t ch) const {
    return data_[(rx * d_ + tx) * m_ + ch];
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const GainTensor&, const GainTensor&) = default;

 private:
  std::size_t d_ = 0;
  std::size_t m_ = 0;
  std::vector<double> data_;
};

struct NetworkInstance {
  std::size_t d_pairs = 0;
  std::size_t m_channels = 0;
  std::vector<Point> tx_pos;
  std::vector<Point> rx_pos;
  GainTensor gains;
  std::vector<double> weights;
  double noise_power = 1e-10;
  double p_max = 1.0;
  std::uint64_t seed = 0;

  double gain(std::size_t rx, std::size_t tx, std::size_t ch) const { return gains(rx, tx, ch); }

  void validate() const {
    if (gains.pairs() != d_pairs || gains.channels() != m_channels) {
      throw std::invalid_argument("NetworkInstance: gain tensor shape does not match (D, M)");
    }
    if (tx_pos.size() != d_pairs || rx_pos.size() != d_pairs || weights.size() != d_pairs) {
      throw std::invalid_argument("NetworkInstance: tx/rx/weights length does not match D");
    }
    for (double g : gains.data()) {
      if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("NetworkInstance: gains must be finite and >= 0");
    }
    for (double w : weights) {
      if (!(w > 0.0)) throw std::invalid_argument("NetworkInstance: weights must be > 0");
    }
    if (!(noise_power > 0.0) || !(p_max > 0.0)) {
      throw std::invalid_argument("NetworkInstance: noise_power and p_max must be > 0");
    }
  }

  friend bool operator==(const NetworkInstance&, const NetworkInstance&) = default;
};

struct Dataset {
  GeometryConfig geometry;
  FadingConfig fading;
  std::uint64_t master_seed = 0;
  std::vector<NetworkInstance> instances;

  std::size_t size() const noexcept { return instances.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr int kPlacementRetryBudget = 100;

/// Draws one instance. Transmitters are uniform in the square; each receiver
/// sits at a uniform distance and angle from its transmitter, redrawn while
/// outside the square. Draw order is fixed: tx positions, then rx positions,
/// then fading for (rx, tx, ch) in row-major order.
inline NetworkInstance sample_instance(const GeometryConfig& geometry, const FadingConfig& fading,
                                       std::uint64_t seed) {
  geometry.validate();
  fading.validate();
  const std::size_t d = geometry.d_pairs;
  const std::size_t m = geometry.m_channels;
  const double side = geometry.area_side;

  Rng rng(seed);
  NetworkInstance inst;
  inst.d_pairs = d;
  inst.m_channels = m;
  inst.seed = seed;
  inst.noise_power = fading.noise_power;
  inst.p_max = fading.p_max;
  inst.weights.assign(d, 1.0);

  inst.tx_pos.resize(d);
  for (auto& p : inst.tx_pos) {
    p.x = rng.uniform(0.0, side);
    p.y = rng.uniform(0.0, side);
  }
  inst.rx_pos.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetryBudget && !placed; ++attempt) {
      const double r = rng.uniform(geometry.rx_dist_min, geometry.rx_dist_max);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Point q{inst.tx_pos[i].x + r * std::cos(theta), inst.tx_pos[i].y + r * std::sin(theta)};
      if (q.x >= 0.0 && q.x <= side && q.y >= 0.0 && q.y <= side) {
        inst.rx_pos[i] = q;
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error("sample_instance: receiver placement retry budget (" +
                               std::to_string(kPlacementRetryBudget) + ") exceeded for pair " +
                               std::to_string(i));
    }
  }

  inst.gains = GainTensor(d, m);
  for (std::size_t rx = 0; rx < d; ++rx) {
    for (std::size_t tx = 0; tx < d; ++tx) {
      const double large_scale = pathloss_gain(fading, distance(inst.tx_pos[tx], inst.rx_pos[rx]));
      for (std::size_t ch = 0; ch < m; ++ch) {
        inst.gains(rx, tx, ch) = large_scale * (fading.rayleigh ? rng.exponential() : 1.0);
      }
    }
  }
  return inst;
}

inline Dataset generate_dataset(const GeometryConfig& geometry, const FadingConfig& fading, std::size_t n,
                                std::uint64_t master_seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  Dataset ds;
  ds.geometry = geometry;
  ds.fading = fading;
  ds.master_seed = master_seed;
  ds.instances.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    ds.instances.push_back(sample_instance(geometry, fading, derive_seed(master_seed, k)));
  }
  return ds;
}

}  // namespace jcpa
