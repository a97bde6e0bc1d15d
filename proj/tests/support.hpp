#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "jcpa/network.hpp"

namespace jcpa::test {

inline GeometryConfig geometry(std::size_t d, std::size_t m, double side = 100.0) {
  GeometryConfig g;
  g.d_pairs = d;
  g.m_channels = m;
  g.area_side = side;
  return g;
}

inline NetworkInstance instance(std::size_t d, std::size_t m, std::uint64_t seed, double side = 100.0) {
  return sample_instance(geometry(d, m, side), FadingConfig{}, seed);
}

inline std::vector<NetworkInstance> instances(std::size_t n, std::size_t d, std::size_t m, std::uint64_t seed,
                                              double side = 100.0) {
  return generate_dataset(geometry(d, m, side), FadingConfig{}, n, seed).instances;
}

/// Same network with pairs relabeled: new pair k is old pair perm[k].
inline NetworkInstance permuted(const NetworkInstance& inst, const std::vector<std::size_t>& perm) {
  NetworkInstance out = inst;
  for (std::size_t a = 0; a < inst.d_pairs; ++a) {
    out.tx_pos[a] = inst.tx_pos[perm[a]];
    out.rx_pos[a] = inst.rx_pos[perm[a]];
    out.weights[a] = inst.weights[perm[a]];
    for (std::size_t b = 0; b < inst.d_pairs; ++b) {
      for (std::size_t c = 0; c < inst.m_channels; ++c) out.gains(a, b, c) = inst.gains(perm[a], perm[b], c);
    }
  }
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("jcpa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace jcpa::test
