#pragma once

// Model checkpoints as JSON:
//
//   {"version", "meta": {M, S, p_max, sigma2, transform_stats, seed,
//    train_config, message_source, channel_encoding, aggregation},
//    "layers": [{"phi1", "alpha1", "alpha2"}]}
//
// Each MLP is {"output": ..., "layers": [{"weight": [[...]], "bias": [...]}]}
// with weights row-major (in x out). Doubles round-trip exactly, so a loaded
// checkpoint reproduces forward outputs bit for bit.

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "jcpa/dataset_io.hpp"
#include "jcpa/jcpgnn.hpp"

namespace jcpa {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r), m.row(r) + m.cols()));
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("checkpoint: weight must be a non-empty 2-D array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError("checkpoint: ragged weight matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline std::string activation_name(ad::Activation a) {
  switch (a) {
    case ad::Activation::kIdentity:
      return "identity";
    case ad::Activation::kSoftmax:
      return "softmax";
    case ad::Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

inline ad::Activation activation_from(const std::string& s) {
  if (s == "identity") return ad::Activation::kIdentity;
  if (s == "softmax") return ad::Activation::kSoftmax;
  if (s == "sigmoid") return ad::Activation::kSigmoid;
  throw ParseError("checkpoint: unknown activation '" + s + "'");
}

inline nlohmann::json mlp_to_json(const ad::MlpParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"weight", matrix_to_json(l.weight)},
                      {"bias", std::vector<double>(l.bias.data().begin(), l.bias.data().end())}});
  }
  return {{"output", activation_name(p.output)}, {"layers", layers}};
}

inline ad::MlpParams mlp_from_json(const nlohmann::json& j) {
  ad::MlpParams p;
  p.output = activation_from(j.at("output").get<std::string>());
  for (const auto& l : j.at("layers")) {
    ad::DenseLayer dl;
    dl.weight = matrix_from_json(l.at("weight"));
    auto bias = l.at("bias").get<std::vector<double>>();
    if (bias.size() != dl.weight.cols()) throw ParseError("checkpoint: bias width does not match weight");
    const std::size_t width = bias.size();
    dl.bias = Matrix(1, width, std::move(bias));
    if (!p.layers.empty() && p.layers.back().weight.cols() != dl.weight.rows()) {
      throw ParseError("checkpoint: layer widths do not chain");
    }
    p.layers.push_back(std::move(dl));
  }
  if (p.layers.empty()) throw ParseError("checkpoint: MLP without layers");
  return p;
}

/// JSON has no infinities; a missing floor is stored as null.
inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline nlohmann::json moments_to_json(const Moments& m) { return {{"mean", m.mean}, {"stddev", m.stddev}}; }
inline Moments moments_from_json(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("stddev").get<double>()}; }

template <typename E, std::size_t N>
E enum_from(const std::string& s, const std::array<std::pair<E, const char*>, N>& names, const char* field) {
  for (const auto& [e, n] : names) {
    if (s == n) return e;
  }
  throw ParseError(std::string("checkpoint: unknown ") + field + " '" + s + "'");
}

template <typename E, std::size_t N>
std::string enum_name(E e, const std::array<std::pair<E, const char*>, N>& names) {
  for (const auto& [v, n] : names) {
    if (v == e) return n;
  }
  return names[0].second;
}

inline constexpr std::array<std::pair<MessageSource, const char*>, 3> kSourceNames{
    {{MessageSource::kMixed, "mixed"}, {MessageSource::kSender, "sender"}, {MessageSource::kReceiver, "receiver"}}};
inline constexpr std::array<std::pair<ChannelEncoding, const char*>, 2> kEncodingNames{
    {{ChannelEncoding::kSlot, "slot"}, {ChannelEncoding::kAbsolute, "absolute"}}};
inline constexpr std::array<std::pair<Aggregation, const char*>, 2> kAggregationNames{
    {{Aggregation::kMean, "mean"}, {Aggregation::kSum, "sum"}}};
inline constexpr std::array<std::pair<Relaxation, const char*>, 2> kRelaxationNames{
    {{Relaxation::kExpected, "expected"}, {Relaxation::kDirect, "direct"}}};

}  // namespace detail

inline nlohmann::json transform_to_json(const FeatureTransform& t) {
  return {{"kind", t.kind == FeatureTransform::Kind::kDecibel ? "db" : "identity"},
          {"node_amp", detail::moments_to_json(t.node_amp)},
          {"intf", {detail::moments_to_json(t.intf[0]), detail::moments_to_json(t.intf[1])}},
          {"pot", {detail::moments_to_json(t.pot[0]), detail::moments_to_json(t.pot[1])}},
          {"floor_db", detail::finite_or_null(t.floor_db)}};
}

inline FeatureTransform transform_from_json(const nlohmann::json& j) {
  FeatureTransform t;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "db") {
    t.kind = FeatureTransform::Kind::kDecibel;
  } else if (kind != "identity") {
    throw ParseError("checkpoint: unknown transform kind '" + kind + "'");
  }
  t.node_amp = detail::moments_from_json(j.at("node_amp"));
  t.intf = {detail::moments_from_json(j.at("intf").at(0)), detail::moments_from_json(j.at("intf").at(1))};
  t.pot = {detail::moments_from_json(j.at("pot").at(0)), detail::moments_from_json(j.at("pot").at(1))};
  const auto& fl = j.at("floor_db");
  t.floor_db = fl.is_null() ? -std::numeric_limits<double>::infinity() : fl.get<double>();
  return t;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},      {"beta2", c.adam.beta2},      {"eps", c.adam.eps},
          {"seed", c.seed},             {"patience", c.patience},     {"relaxation", detail::enum_name(c.relaxation, detail::kRelaxationNames)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam.lr = j.value("lr", c.adam.lr);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("eps", c.adam.eps);
  c.seed = j.value("seed", c.seed);
  c.patience = j.value("patience", c.patience);
  c.relaxation = detail::enum_from(j.value("relaxation", std::string("expected")), detail::kRelaxationNames, "relaxation");
  return c;
}

inline nlohmann::json checkpoint_to_json(const JcpgnnParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"phi1", detail::mlp_to_json(l.phi1)},
                      {"alpha1", detail::mlp_to_json(l.alpha1)},
                      {"alpha2", detail::mlp_to_json(l.alpha2)}});
  }
  const auto& m = p.meta;
  return {{"version", kCheckpointVersion},
          {"meta",
           {{"M", m.m_channels},
            {"S", m.s_layers},
            {"p_max", m.p_max},
            {"sigma2", m.noise_power},
            {"transform_stats", transform_to_json(m.transform)},
            {"seed", m.seed},
            {"train_config", train_config_to_json(m.train)},
            {"message_source", detail::enum_name(m.message_source, detail::kSourceNames)},
            {"channel_encoding", detail::enum_name(m.channel_encoding, detail::kEncodingNames)},
            {"aggregation", detail::enum_name(m.aggregation, detail::kAggregationNames)}}},
          {"layers", layers}};
}

inline JcpgnnParams checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("checkpoint: unsupported version");
    JcpgnnParams p;
    const auto& meta = j.at("meta");
    p.meta.m_channels = meta.at("M").get<std::size_t>();
    p.meta.s_layers = meta.at("S").get<std::size_t>();
    p.meta.p_max = meta.at("p_max").get<double>();
    p.meta.noise_power = meta.at("sigma2").get<double>();
    p.meta.transform = transform_from_json(meta.at("transform_stats"));
    p.meta.seed = meta.at("seed").get<std::uint64_t>();
    p.meta.train = train_config_from_json(meta.at("train_config"));
    p.meta.message_source =
        detail::enum_from(meta.value("message_source", std::string("mixed")), detail::kSourceNames, "message_source");
    p.meta.channel_encoding =
        detail::enum_from(meta.value("channel_encoding", std::string("slot")), detail::kEncodingNames, "channel_encoding");
    p.meta.aggregation =
        detail::enum_from(meta.value("aggregation", std::string("mean")), detail::kAggregationNames, "aggregation");
    for (const auto& l : j.at("layers")) {
      p.layers.push_back({detail::mlp_from_json(l.at("phi1")), detail::mlp_from_json(l.at("alpha1")),
                          detail::mlp_from_json(l.at("alpha2"))});
    }
    if (p.layers.size() != p.meta.s_layers) throw ParseError("checkpoint: layer count does not match S");
    const std::size_t m = p.meta.m_channels;
    for (const auto& l : p.layers) {
      if (l.phi1.in_dim() != m + 5 || l.alpha1.in_dim() != l.phi1.out_dim() + m + 1 ||
          l.alpha2.in_dim() != l.phi1.out_dim() + m + 1 || l.alpha1.out_dim() != m || l.alpha2.out_dim() != 1) {
        throw ParseError("checkpoint: layer widths inconsistent with M=" + std::to_string(m));
      }
    }
    return p;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const JcpgnnParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << checkpoint_to_json(p).dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline JcpgnnParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace jcpa
