#pragma once

// Classical allocation baselines: WMMSE power control for a fixed channel
// assignment, exhaustive channel search, round-robin, closest-split and
// uniform random allocation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcpa/metrics.hpp"
#include "jcpa/network.hpp"
#include "jcpa/random.hpp"

namespace jcpa {

struct WmmseConfig {
  std::size_t max_iters = 200;
  double tol = 1e-6;  // relative objective change

  void validate() const {
    if (max_iters < 1 || !(tol > 0.0)) throw std::invalid_argument("WmmseConfig: need max_iters >= 1 and tol > 0");
  }
  friend bool operator==(const WmmseConfig&, const WmmseConfig&) = default;
};

/// Per-channel weighted sum rate after each iteration (index 0 = initial point).
struct WmmseTrace {
  std::vector<std::vector<double>> per_channel;
};

namespace detail {

/// Weighted sum rate of the pairs `members` sharing channel `ch` with
/// transmit amplitudes v.
inline double channel_rate(const NetworkInstance& inst, std::size_t ch, const std::vector<std::size_t>& members,
                           const std::vector<double>& v) {
  double total = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    const std::size_t i = members[a];
    double intf = inst.noise_power;
    for (std::size_t b = 0; b < members.size(); ++b) {
      if (b != a) intf += inst.gains(i, members[b], ch) * v[b] * v[b];
    }
    total += inst.weights[i] * std::log2(1.0 + inst.gains(i, i, ch) * v[a] * v[a] / intf);
  }
  return total;
}

}  // namespace detail

/// WMMSE power control, run independently on every channel over the pairs
/// assigned to it, in the scalar real-amplitude form:
///
///   u_i = h_ii v_i / (sigma^2 + sum_j h_ij^2 v_j^2)
///   t_i = 1 / (1 - u_i h_ii v_i)
///   v_i = clamp(w_i t_i u_i h_ii / sum_j w_j t_j u_j^2 h_ji^2, 0, sqrt(p_max))
///
/// starting from v_i = sqrt(p_max), until the channel's weighted sum rate
/// changes by less than `tol` (relative) or `max_iters` is reached.
inline std::vector<double> wmmse_power(const NetworkInstance& inst, const ChannelAssignment& assignment,
                                       const WmmseConfig& cfg = {}, WmmseTrace* trace = nullptr) {
  cfg.validate();
  if (assignment.size() != inst.d_pairs) throw std::invalid_argument("wmmse_power: assignment length != D");
  const double v_max = std::sqrt(inst.p_max);
  std::vector<double> power(inst.d_pairs, 0.0);
  if (trace != nullptr) trace->per_channel.assign(inst.m_channels, {});

  std::vector<std::size_t> members;
  std::vector<double> v, u, t, h;
  for (std::size_t ch = 0; ch < inst.m_channels; ++ch) {
    members.clear();
    for (std::size_t i = 0; i < inst.d_pairs; ++i) {
      if (assignment[i] >= inst.m_channels) throw std::invalid_argument("wmmse_power: channel index out of range");
      if (assignment[i] == ch) members.push_back(i);
    }
    const std::size_t n = members.size();
    if (n == 0) continue;
    v.assign(n, v_max);
    u.assign(n, 0.0);
    t.assign(n, 0.0);
    h.resize(n);
    for (std::size_t a = 0; a < n; ++a) h[a] = std::sqrt(inst.gains(members[a], members[a], ch));

    double prev = detail::channel_rate(inst, ch, members, v);
    if (trace != nullptr) trace->per_channel[ch].push_back(prev);
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      for (std::size_t a = 0; a < n; ++a) {
        const std::size_t i = members[a];
        double intf = inst.noise_power;
        for (std::size_t b = 0; b < n; ++b) {
          if (b != a) intf += inst.gains(i, members[b], ch) * v[b] * v[b];
        }
        const double signal = h[a] * h[a] * v[a] * v[a];
        u[a] = h[a] * v[a] / (intf + signal);
        t[a] = (intf + signal) / intf;  // 1 / (1 - u h v), cancellation-free
      }
      for (std::size_t a = 0; a < n; ++a) {
        const std::size_t i = members[a];
        double denom = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          denom += inst.weights[members[b]] * t[b] * u[b] * u[b] * inst.gains(members[b], i, ch);
        }
        const double num = inst.weights[i] * t[a] * u[a] * h[a];
        v[a] = denom > 0.0 ? std::clamp(num / denom, 0.0, v_max) : v_max;
      }
      const double cur = detail::channel_rate(inst, ch, members, v);
      if (trace != nullptr) trace->per_channel[ch].push_back(cur);
      const bool converged = std::abs(cur - prev) <= cfg.tol * std::max(std::abs(prev), 1e-300);
      prev = cur;
      if (converged) break;
    }
    for (std::size_t a = 0; a < n; ++a) power[members[a]] = v[a] >= v_max ? inst.p_max : std::min(v[a] * v[a], inst.p_max);
  }
  return power;
}

inline std::vector<double> wmmse_power(const NetworkInstance& inst, const Matrix& one_hot_channel,
                                       const WmmseConfig& cfg = {}) {
  return wmmse_power(inst, assignment_of(one_hot_channel), cfg);
}

inline Allocation allocation_with_wmmse(const NetworkInstance& inst, const ChannelAssignment& assignment,
                                        const WmmseConfig& cfg = {}) {
  Allocation a;
  a.hard = true;
  a.channel = one_hot(assignment, inst.m_channels);
  a.power = wmmse_power(inst, assignment, cfg);
  return a;
}

class GuardExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultExhaustiveGuard = std::uint64_t{1} << 20;

/// M^D, saturating at UINT64_MAX.
inline std::uint64_t assignment_count(std::size_t d, std::size_t m) {
  std::uint64_t n = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (n > std::numeric_limits<std::uint64_t>::max() / m) return std::numeric_limits<std::uint64_t>::max();
    n *= m;
  }
  return n;
}

/// Enumerates every channel assignment (pair 0 is the fastest-varying digit),
/// runs WMMSE on each and keeps the best objective; earlier assignments win ties.
inline Allocation exhaustive(const NetworkInstance& inst, const WmmseConfig& cfg = {},
                             std::uint64_t guard_max_assignments = kDefaultExhaustiveGuard) {
  const std::uint64_t total = assignment_count(inst.d_pairs, inst.m_channels);
  if (total > guard_max_assignments) {
    throw GuardExceeded("exhaustive: M^D = " + std::to_string(inst.m_channels) + "^" + std::to_string(inst.d_pairs) +
                        " = " + (total == std::numeric_limits<std::uint64_t>::max() ? std::string("overflow")
                                                                                     : std::to_string(total)) +
                        " exceeds guard " + std::to_string(guard_max_assignments));
  }
  ChannelAssignment assignment(inst.d_pairs, 0);
  Allocation best;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 0; k < total; ++k) {
    Allocation a = allocation_with_wmmse(inst, assignment, cfg);
    const double obj = objective(inst, a);
    if (obj > best_obj) {
      best_obj = obj;
      best = std::move(a);
    }
    for (std::size_t i = 0; i < inst.d_pairs; ++i) {
      if (++assignment[i] < inst.m_channels) break;
      assignment[i] = 0;
    }
  }
  return best;
}

/// Pair i -> channel i mod M.
inline Matrix round_robin(std::size_t d, std::size_t m) {
  if (d < 1 || m < 1) throw std::invalid_argument("round_robin: D and M must be >= 1");
  ChannelAssignment a(d);
  for (std::size_t i = 0; i < d; ++i) a[i] = i % m;
  return one_hot(a, m);
}

enum class ClosestOrder {
  kCrowdedFirst,  // ascending distance to the nearest other pair
  kClosestPairs,  // endpoints of pairwise distances in ascending order
};

/// Farthest-first greedy channel split on pair midpoints. Pairs are visited
/// in `order`; each joins the channel whose nearest already-placed member is
/// farthest away (an empty channel counts as infinitely far), lowest channel
/// index on ties.
inline Matrix closest_split(const NetworkInstance& inst, std::size_t m,
                            ClosestOrder order = ClosestOrder::kCrowdedFirst) {
  const std::size_t d = inst.d_pairs;
  if (d < 1 || m < 1) throw std::invalid_argument("closest_split: D and M must be >= 1");
  std::vector<Point> mid(d);
  for (std::size_t i = 0; i < d; ++i) {
    mid[i] = {(inst.tx_pos[i].x + inst.rx_pos[i].x) / 2.0, (inst.tx_pos[i].y + inst.rx_pos[i].y) / 2.0};
  }

  std::vector<std::size_t> visit;
  if (order == ClosestOrder::kCrowdedFirst) {
    std::vector<double> nearest(d, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (j != i) nearest[i] = std::min(nearest[i], distance(mid[i], mid[j]));
      }
    }
    visit.resize(d);
    std::iota(visit.begin(), visit.end(), std::size_t{0});
    std::stable_sort(visit.begin(), visit.end(), [&](std::size_t a, std::size_t b) { return nearest[a] < nearest[b]; });
  } else {
    struct Link {
      double dist;
      std::size_t a, b;
    };
    std::vector<Link> links;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) links.push_back({distance(mid[i], mid[j]), i, j});
    }
    std::stable_sort(links.begin(), links.end(), [](const Link& x, const Link& y) { return x.dist < y.dist; });
    std::vector<bool> seen(d, false);
    for (const Link& l : links) {
      for (std::size_t e : {l.a, l.b}) {
        if (!seen[e]) {
          seen[e] = true;
          visit.push_back(e);
        }
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (!seen[i]) visit.push_back(i);
    }
  }

  ChannelAssignment assignment(d, 0);
  std::vector<std::vector<std::size_t>> on_channel(m);
  for (std::size_t i : visit) {
    std::size_t best = 0;
    double best_sep = -1.0;
    for (std::size_t c = 0; c < m; ++c) {
      double sep = std::numeric_limits<double>::infinity();
      for (std::size_t j : on_channel[c]) sep = std::min(sep, distance(mid[i], mid[j]));
      if (sep > best_sep) {
        best_sep = sep;
        best = c;
      }
    }
    assignment[i] = best;
    on_channel[best].push_back(i);
  }
  return one_hot(assignment, m);
}

/// Uniform channel per pair at full power.
inline Allocation random_alloc(std::size_t d, std::size_t m, double p_max, std::uint64_t seed) {
  Rng rng(seed);
  ChannelAssignment a(d);
  for (auto& c : a) c = static_cast<std::size_t>(rng.uniform_index(m));
  Allocation out;
  out.hard = true;
  out.channel = one_hot(a, m);
  out.power.assign(d, p_max);
  return out;
}

}  // namespace jcpa
