#pragma once

// Heterogeneous pair-channel graph.
//
// Vertex (i, m) = pair i considered on channel m, index i*M + m.
// Interference edges connect (j, m) -> (i, m), i != j; potential interference
// edges connect (j, n) -> (i, m), i != j, m != n. Edges are directed with the
// destination as the message receiver and are listed in lexicographic
// (dst, src) vertex order.
//
// Features (before the transform T):
//   node (i, m)                 [ |h_ii^m|, w_i ]
//   interference (j,m)->(i,m)   [ |h_ij^m|, |h_ji^m| ]
//   potential    (j,n)->(i,m)   [ |h_ij^m|, |h_ij^n| ]

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "jcpa/matrix.hpp"
#include "jcpa/network.hpp"

namespace jcpa {

struct Moments {
  double mean = 0.0;
  double stddev = 1.0;
  friend bool operator==(const Moments&, const Moments&) = default;
};

/// Amplitude feature transform. In kDecibel mode every amplitude is mapped to
/// 20*log10(amp), clamped from below at `floor_db` (zero amplitudes included),
/// and standardized with the per-position moments fitted on a training set.
/// Weights pass through.
struct FeatureTransform {
  enum class Kind { kIdentity, kDecibel };

  Kind kind = Kind::kIdentity;
  Moments node_amp;
  std::array<Moments, 2> intf{};
  std::array<Moments, 2> pot{};
  double floor_db = -std::numeric_limits<double>::infinity();

  static FeatureTransform identity() { return {}; }

  double forward(double amp, const Moments& mo) const {
    if (kind == Kind::kIdentity) return amp;
    double db = amp > 0.0 ? 20.0 * std::log10(amp) : floor_db;
    db = std::max(db, floor_db);
    return (db - mo.mean) / mo.stddev;
  }

  double inverse(double z, const Moments& mo) const {
    if (kind == Kind::kIdentity) return z;
    return std::pow(10.0, (z * mo.stddev + mo.mean) / 20.0);
  }

  friend bool operator==(const FeatureTransform&, const FeatureTransform&) = default;
};

struct EdgeList {
  std::vector<std::size_t> src;  // vertex index
  std::vector<std::size_t> dst;  // vertex index
  std::vector<std::size_t> dst_pair;
  std::vector<std::size_t> dst_channel;
  Matrix feat;                   // E x 2

  std::size_t size() const noexcept { return src.size(); }
};

struct HeteroGraph {
  std::size_t d_pairs = 0;
  std::size_t m_channels = 0;
  Matrix node_feat;  // (D*M) x 2
  EdgeList intf;
  EdgeList pot;
  FeatureTransform transform;
  std::vector<std::size_t> vertex_pair;  // pair index of each vertex
  Matrix pair_in_degree;                 // D x 1, incoming edges over all M vertices of a pair

  std::size_t num_vertices() const noexcept { return d_pairs * m_channels; }
  std::size_t vertex(std::size_t pair, std::size_t ch) const noexcept { return pair * m_channels + ch; }
  std::size_t pair_of(std::size_t v) const noexcept { return v / m_channels; }
  std::size_t channel_of(std::size_t v) const noexcept { return v % m_channels; }
};

namespace detail {

inline std::size_t intf_edge_count(std::size_t d, std::size_t m) { return m * d * (d - 1); }
inline std::size_t pot_edge_count(std::size_t d, std::size_t m) { return d * m * (d - 1) * (m - 1); }

}  // namespace detail

inline HeteroGraph build_graph(const NetworkInstance& inst, const FeatureTransform& transform) {
  const std::size_t d = inst.d_pairs;
  const std::size_t m = inst.m_channels;
  HeteroGraph g;
  g.d_pairs = d;
  g.m_channels = m;
  g.transform = transform;

  // Amplitude per (rx, tx, ch), in dB (clamped at the floor) for kDecibel.
  // One logarithm per gain entry; the per-position standardizations are affine.
  const bool db = transform.kind == FeatureTransform::Kind::kDecibel;
  std::vector<double> level(d * d * m);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t t = 0; t < d; ++t) {
      for (std::size_t c = 0; c < m; ++c) {
        const double gain = inst.gains(r, t, c);
        double& x = level[(r * d + t) * m + c];
        if (!db) {
          x = std::sqrt(gain);
        } else {
          x = std::max(gain > 0.0 ? 10.0 * std::log10(gain) : transform.floor_db, transform.floor_db);
        }
      }
    }
  }
  const auto at = [&](std::size_t r, std::size_t t, std::size_t c, const Moments& mo) {
    const double x = level[(r * d + t) * m + c];
    return db ? (x - mo.mean) / mo.stddev : x;
  };

  g.node_feat = Matrix(d * m, 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < m; ++c) {
      g.node_feat(i * m + c, 0) = at(i, i, c, transform.node_amp);
      g.node_feat(i * m + c, 1) = inst.weights[i];
    }
  }

  const std::size_t n_intf = detail::intf_edge_count(d, m);
  const std::size_t n_pot = detail::pot_edge_count(d, m);
  for (EdgeList* list : {&g.intf, &g.pot}) {
    const std::size_t n = list == &g.intf ? n_intf : n_pot;
    list->src.resize(n);
    list->dst.resize(n);
    list->dst_pair.resize(n);
    list->dst_channel.resize(n);
    list->feat = Matrix(n, 2);
  }

  std::size_t ei = 0;
  std::size_t ep = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t dst = i * m + c;
      for (std::size_t j = 0; j < d; ++j) {
        if (j == i) continue;
        g.intf.src[ei] = j * m + c;
        g.intf.dst[ei] = dst;
        g.intf.dst_pair[ei] = i;
        g.intf.dst_channel[ei] = c;
        g.intf.feat(ei, 0) = at(i, j, c, transform.intf[0]);
        g.intf.feat(ei, 1) = at(j, i, c, transform.intf[1]);
        ++ei;
      }
      for (std::size_t j = 0; j < d; ++j) {
        if (j == i) continue;
        for (std::size_t n = 0; n < m; ++n) {
          if (n == c) continue;
          g.pot.src[ep] = j * m + n;
          g.pot.dst[ep] = dst;
          g.pot.dst_pair[ep] = i;
          g.pot.dst_channel[ep] = c;
          g.pot.feat(ep, 0) = at(i, j, c, transform.pot[0]);
          g.pot.feat(ep, 1) = at(i, j, n, transform.pot[1]);
          ++ep;
        }
      }
    }
  }
  g.vertex_pair.resize(d * m);
  for (std::size_t v = 0; v < d * m; ++v) g.vertex_pair[v] = v / m;
  g.pair_in_degree = Matrix(d, 1, static_cast<double>((d - 1) * m * m));
  return g;
}

namespace detail {

struct RunningMoments {  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  Moments finish() const {
    Moments mo;
    if (count == 0) return mo;
    mo.mean = mean;
    const double sd = std::sqrt(std::max(0.0, m2 / static_cast<double>(count)));
    mo.stddev = sd > 1e-12 ? sd : 1.0;
    return mo;
  }
};

}  // namespace detail

inline constexpr double kMissingFloorMarginDb = 40.0;

/// Where fit_transform places the dB floor. Zero (removed) gains map to the
/// floor, and every weaker gain is clamped to it.
///  kInterferenceSigma: `value` standard deviations below the mean
///      interference level; removed entries then read as weak interferers.
///  kBelowMinimum: `value` dB under the weakest observed gain.
struct FloorRule {
  enum class Kind { kInterferenceSigma, kBelowMinimum };
  Kind kind = Kind::kInterferenceSigma;
  double value = 2.0;

  static FloorRule below_minimum(double margin_db = kMissingFloorMarginDb) { return {Kind::kBelowMinimum, margin_db}; }
  friend bool operator==(const FloorRule&, const FloorRule&) = default;
};

/// Fits dB-scale standardization moments on every node and edge amplitude of
/// a training set. Zero-variance positions keep a unit stddev. Moments are
/// taken before the floor is applied.
inline FeatureTransform fit_transform(const std::vector<NetworkInstance>& train, const FloorRule& floor = {}) {
  if (train.empty()) throw std::invalid_argument("fit_transform: empty training set");
  detail::RunningMoments node, i0, i1, p0, p1;
  double min_db = std::numeric_limits<double>::infinity();
  const auto add = [&](detail::RunningMoments& mo, double gain) {
    if (!(gain > 0.0)) return;  // removed entries carry no level
    const double v = 10.0 * std::log10(gain);
    min_db = std::min(min_db, v);
    mo.add(v);
  };
  for (const auto& inst : train) {
    const std::size_t d = inst.d_pairs;
    const std::size_t m = inst.m_channels;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t c = 0; c < m; ++c) add(node, inst.gains(i, i, c));
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
          if (j == i) continue;
          add(i0, inst.gains(i, j, c));
          add(i1, inst.gains(j, i, c));
          for (std::size_t n = 0; n < m; ++n) {
            if (n == c) continue;
            add(p0, inst.gains(i, j, c));
            add(p1, inst.gains(i, j, n));
          }
        }
      }
    }
  }
  FeatureTransform t;
  t.kind = FeatureTransform::Kind::kDecibel;
  t.node_amp = node.finish();
  t.intf = {i0.finish(), i1.finish()};
  t.pot = {p0.finish(), p1.finish()};
  if (floor.kind == FloorRule::Kind::kBelowMinimum) {
    t.floor_db = std::isfinite(min_db) ? min_db - floor.value : -std::numeric_limits<double>::infinity();
  } else if (i0.count > 0) {
    t.floor_db = t.intf[0].mean - floor.value * t.intf[0].stddev;
  } else {
    t.floor_db = -std::numeric_limits<double>::infinity();  // no interference to calibrate on
  }
  return t;
}

}  // namespace jcpa
