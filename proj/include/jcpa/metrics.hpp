#pragma once

// SINR, per-link rate and the weighted sum-rate objective. Channel matrices
// may be hard (one-hot) or soft (rows on the simplex); soft entries enter the
// signal and interference terms directly.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcpa/matrix.hpp"
#include "jcpa/network.hpp"

namespace jcpa {

inline constexpr double kRowSumTolerance = 1e-9;

struct Allocation {
  Matrix channel;              // D x M
  std::vector<double> power;   // watts, length D
  bool hard = false;

  std::size_t pairs() const noexcept { return channel.rows(); }
  std::size_t channels() const noexcept { return channel.cols(); }

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

class ConstraintViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One channel index per pair.
using ChannelAssignment = std::vector<std::size_t>;

inline Matrix one_hot(const ChannelAssignment& assignment, std::size_t m_channels) {
  Matrix c(assignment.size(), m_channels, 0.0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= m_channels) throw std::invalid_argument("one_hot: channel index out of range");
    c(i, assignment[i]) = 1.0;
  }
  return c;
}

/// Inverse of one_hot; rejects anything that is not exactly one-hot.
inline ChannelAssignment assignment_of(const Matrix& one_hot_channels) {
  ChannelAssignment a(one_hot_channels.rows());
  for (std::size_t i = 0; i < one_hot_channels.rows(); ++i) {
    std::size_t ones = 0;
    for (std::size_t m = 0; m < one_hot_channels.cols(); ++m) {
      const double v = one_hot_channels(i, m);
      if (v == 1.0) {
        a[i] = m;
        ++ones;
      } else if (v != 0.0) {
        throw ConstraintViolation("channel row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (ones != 1) throw ConstraintViolation("channel row " + std::to_string(i) + " is not one-hot");
  }
  return a;
}

inline void validate_allocation(const NetworkInstance& inst, const Allocation& alloc) {
  if (alloc.channel.rows() != inst.d_pairs || alloc.channel.cols() != inst.m_channels ||
      alloc.power.size() != inst.d_pairs) {
    throw ConstraintViolation("allocation shape " + alloc.channel.shape_string() + " does not match instance " +
                              std::to_string(inst.d_pairs) + "x" + std::to_string(inst.m_channels));
  }
  for (std::size_t i = 0; i < inst.d_pairs; ++i) {
    double row = 0.0;
    for (std::size_t m = 0; m < inst.m_channels; ++m) {
      const double c = alloc.channel(i, m);
      if (alloc.hard ? !(c == 0.0 || c == 1.0) : !(c >= 0.0 && c <= 1.0)) {
        throw ConstraintViolation("channel entry (" + std::to_string(i) + "," + std::to_string(m) +
                                  ") outside its domain");
      }
      row += c;
    }
    if (std::abs(row - 1.0) > kRowSumTolerance) {
      throw ConstraintViolation("channel row " + std::to_string(i) + " sums to " + std::to_string(row));
    }
    const double p = alloc.power[i];
    if (!(p >= 0.0 && p <= inst.p_max)) {
      throw ConstraintViolation("power of pair " + std::to_string(i) + " outside [0, p_max]");
    }
  }
}

inline double sinr(const NetworkInstance& inst, const Allocation& alloc, std::size_t i, std::size_t m) {
  if (i >= inst.d_pairs || m >= inst.m_channels) throw std::out_of_range("sinr: index out of range");
  double interference = 0.0;
  for (std::size_t j = 0; j < inst.d_pairs; ++j) {
    if (j != i) interference += inst.gains(i, j, m) * alloc.power[j] * alloc.channel(j, m);
  }
  return inst.gains(i, i, m) * alloc.power[i] * alloc.channel(i, m) / (interference + inst.noise_power);
}

/// Spectral efficiency in bits/s/Hz.
inline double rate(const NetworkInstance& inst, const Allocation& alloc, std::size_t i, std::size_t m) {
  return std::log2(1.0 + sinr(inst, alloc, i, m));
}

/// Weighted sum rate; throws ConstraintViolation if `alloc` is infeasible.
inline double objective(const NetworkInstance& inst, const Allocation& alloc) {
  validate_allocation(inst, alloc);
  double total = 0.0;
  for (std::size_t m = 0; m < inst.m_channels; ++m) {
    for (std::size_t i = 0; i < inst.d_pairs; ++i) total += inst.weights[i] * rate(inst, alloc, i, m);
  }
  return total;
}

}  // namespace jcpa
