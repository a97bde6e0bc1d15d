#pragma once

// Dataset persistence as JSON Lines.
//
//   line 0     {"version", "geometry", "fading", "master_seed", "n"}
//   lines 1..n {"seed", "tx", "rx", "gains", "weights"}
//
// gains are nested [rx][tx][ch] arrays of linear power gains. Doubles are
// written in shortest round-trip form, so save/load is value-identical.
// A path ending in ".gz" is read and written through zlib.

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jcpa/network.hpp"

namespace jcpa {

inline constexpr int kDatasetFormatVersion = 1;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void to_json(nlohmann::json& j, const GeometryConfig& g) {
  j = {{"area_side", g.area_side},
       {"rx_dist_min", g.rx_dist_min},
       {"rx_dist_max", g.rx_dist_max},
       {"d_pairs", g.d_pairs},
       {"m_channels", g.m_channels}};
}

inline void from_json(const nlohmann::json& j, GeometryConfig& g) {
  GeometryConfig def;
  g.area_side = j.value("area_side", def.area_side);
  g.rx_dist_min = j.value("rx_dist_min", def.rx_dist_min);
  g.rx_dist_max = j.value("rx_dist_max", def.rx_dist_max);
  g.d_pairs = j.value("d_pairs", def.d_pairs);
  g.m_channels = j.value("m_channels", def.m_channels);
}

inline void to_json(nlohmann::json& j, const FadingConfig& f) {
  j = {{"pathloss_intercept_db", f.pathloss_intercept_db},
       {"pathloss_exponent_db_per_decade", f.pathloss_exponent_db_per_decade},
       {"noise_power", f.noise_power},
       {"p_max", f.p_max},
       {"rayleigh", f.rayleigh}};
}

inline void from_json(const nlohmann::json& j, FadingConfig& f) {
  FadingConfig def;
  f.pathloss_intercept_db = j.value("pathloss_intercept_db", def.pathloss_intercept_db);
  f.pathloss_exponent_db_per_decade = j.value("pathloss_exponent_db_per_decade", def.pathloss_exponent_db_per_decade);
  f.noise_power = j.value("noise_power", def.noise_power);
  f.p_max = j.value("p_max", def.p_max);
  f.rayleigh = j.value("rayleigh", def.rayleigh);
}

namespace detail {

inline bool ends_with_gz(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

/// Minimal line-oriented writer/reader over either a plain file or gzip.
class LineWriter {
 public:
  explicit LineWriter(const std::string& path) : gz_(ends_with_gz(path)) {
    if (gz_) {
      gzf_ = gzopen(path.c_str(), "wb");
      if (gzf_ == nullptr) throw std::runtime_error("cannot open for writing: " + path);
    } else {
      out_.open(path, std::ios::binary | std::ios::trunc);
      if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }
  }
  ~LineWriter() {
    if (gzf_ != nullptr) gzclose(gzf_);
  }
  LineWriter(const LineWriter&) = delete;
  LineWriter& operator=(const LineWriter&) = delete;

  void write_line(const std::string& line) {
    if (gz_) {
      const std::string buf = line + "\n";
      if (gzwrite(gzf_, buf.data(), static_cast<unsigned>(buf.size())) != static_cast<int>(buf.size())) {
        throw std::runtime_error("gzip write failed");
      }
    } else {
      out_ << line << '\n';
      if (!out_) throw std::runtime_error("write failed");
    }
  }

 private:
  bool gz_;
  gzFile gzf_ = nullptr;
  std::ofstream out_;
};

class LineReader {
 public:
  explicit LineReader(const std::string& path) : gz_(ends_with_gz(path)) {
    if (gz_) {
      gzf_ = gzopen(path.c_str(), "rb");
      if (gzf_ == nullptr) throw std::runtime_error("cannot open for reading: " + path);
    } else {
      in_.open(path, std::ios::binary);
      if (!in_) throw std::runtime_error("cannot open for reading: " + path);
    }
  }
  ~LineReader() {
    if (gzf_ != nullptr) gzclose(gzf_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool read_line(std::string& line) {
    line.clear();
    if (!gz_) return static_cast<bool>(std::getline(in_, line));
    char buf[65536];
    bool any = false;
    while (gzgets(gzf_, buf, sizeof(buf)) != nullptr) {
      any = true;
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
    return any;
  }

 private:
  bool gz_;
  gzFile gzf_ = nullptr;
  std::ifstream in_;
};

inline nlohmann::json instance_to_json(const NetworkInstance& inst) {
  nlohmann::json tx = nlohmann::json::array();
  nlohmann::json rx = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.d_pairs; ++i) {
    tx.push_back({inst.tx_pos[i].x, inst.tx_pos[i].y});
    rx.push_back({inst.rx_pos[i].x, inst.rx_pos[i].y});
  }
  nlohmann::json gains = nlohmann::json::array();
  for (std::size_t r = 0; r < inst.d_pairs; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t t = 0; t < inst.d_pairs; ++t) {
      nlohmann::json chans = nlohmann::json::array();
      for (std::size_t m = 0; m < inst.m_channels; ++m) chans.push_back(inst.gains(r, t, m));
      row.push_back(std::move(chans));
    }
    gains.push_back(std::move(row));
  }
  return {{"seed", inst.seed}, {"tx", tx}, {"rx", rx}, {"gains", gains}, {"weights", inst.weights}};
}

[[noreturn]] inline void fail(std::size_t line, const std::string& field, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": field '" + field + "': " + what);
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) fail(line, key, "missing");
  return *it;
}

inline std::vector<Point> points_from_json(const nlohmann::json& j, std::size_t d, std::size_t line,
                                           const char* field) {
  if (!j.is_array() || j.size() != d) fail(line, field, "expected " + std::to_string(d) + " points");
  std::vector<Point> pts;
  pts.reserve(d);
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      fail(line, field, "point must be [x, y]");
    }
    pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return pts;
}

inline NetworkInstance instance_from_json(const nlohmann::json& j, const Dataset& header, std::size_t line) {
  const std::size_t d = header.geometry.d_pairs;
  const std::size_t m = header.geometry.m_channels;
  NetworkInstance inst;
  inst.d_pairs = d;
  inst.m_channels = m;
  inst.noise_power = header.fading.noise_power;
  inst.p_max = header.fading.p_max;

  const auto& seed = require(j, "seed", line);
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) fail(line, "seed", "must be an integer");
  inst.seed = seed.get<std::uint64_t>();
  inst.tx_pos = points_from_json(require(j, "tx", line), d, line, "tx");
  inst.rx_pos = points_from_json(require(j, "rx", line), d, line, "rx");

  const auto& gains = require(j, "gains", line);
  if (!gains.is_array() || gains.size() != d) fail(line, "gains", "expected " + std::to_string(d) + " receiver rows");
  inst.gains = GainTensor(d, m);
  for (std::size_t r = 0; r < d; ++r) {
    const auto& row = gains[r];
    if (!row.is_array() || row.size() != d) fail(line, "gains", "row " + std::to_string(r) + " must have D entries");
    for (std::size_t t = 0; t < d; ++t) {
      const auto& chans = row[t];
      if (!chans.is_array() || chans.size() != m) {
        fail(line, "gains", "entry [" + std::to_string(r) + "][" + std::to_string(t) + "] must have M values");
      }
      for (std::size_t c = 0; c < m; ++c) {
        if (!chans[c].is_number()) fail(line, "gains", "non-numeric value");
        inst.gains(r, t, c) = chans[c].get<double>();
      }
    }
  }
  const auto& weights = require(j, "weights", line);
  if (!weights.is_array() || weights.size() != d) fail(line, "weights", "expected " + std::to_string(d) + " values");
  inst.weights = weights.get<std::vector<double>>();
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    fail(line, "instance", e.what());
  }
  return inst;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::string& path) {
  detail::LineWriter w(path);
  nlohmann::json header = {{"version", kDatasetFormatVersion},
                           {"geometry", ds.geometry},
                           {"fading", ds.fading},
                           {"master_seed", ds.master_seed},
                           {"n", ds.instances.size()}};
  w.write_line(header.dump());
  for (const auto& inst : ds.instances) w.write_line(detail::instance_to_json(inst).dump());
}

/// Loads a dataset; any malformed or inconsistent content throws ParseError
/// naming the offending line and field. Nothing partial is returned.
inline Dataset load_dataset(const std::string& path) {
  detail::LineReader r(path);
  std::string line;
  if (!r.read_line(line)) throw ParseError("line 0: field 'header': file is empty");

  Dataset ds;
  std::size_t n = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    const auto& version = detail::require(header, "version", 0);
    if (version.get<int>() != kDatasetFormatVersion) detail::fail(0, "version", "unsupported");
    ds.geometry = detail::require(header, "geometry", 0).get<GeometryConfig>();
    ds.fading = detail::require(header, "fading", 0).get<FadingConfig>();
    ds.master_seed = detail::require(header, "master_seed", 0).get<std::uint64_t>();
    n = detail::require(header, "n", 0).get<std::size_t>();
    ds.geometry.validate();
    ds.fading.validate();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("line 0: field 'header': ") + e.what());
  }

  ds.instances.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    if (!r.read_line(line)) {
      throw ParseError("line " + std::to_string(k) + ": field 'instance': file truncated, expected " +
                       std::to_string(n) + " instances");
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(k) + ": field 'instance': " + e.what());
    }
    try {
      ds.instances.push_back(detail::instance_from_json(j, ds, k));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(k) + ": field 'instance': " + e.what());
    }
  }
  while (r.read_line(line)) {
    if (!line.empty()) throw ParseError("line " + std::to_string(n + 1) + ": field 'instance': unexpected extra data");
  }
  return ds;
}

}  // namespace jcpa
