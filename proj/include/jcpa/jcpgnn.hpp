#pragma once

// Joint channel and power allocation GNN.
//
// Each of the S layers runs one round of message passing on the
// pair-channel graph followed by two task heads:
//
//   message   m_e   = phi1([x_j, v_(i,m), e])         for every edge e = (j, n) -> (i, m)
//   aggregate n_i   = mean over all edges into any vertex (i, *)
//   channel   c_i   = softmax(alpha1([x_i, n_i]))
//   power     rho_i = sigmoid(alpha2([x_i, n_i]))
//   state     x_i   = [c_i, rho_i]
//
// The state starts at x_i = [1, ..., 1, 1]; power is carried normalized by
// p_max and scaled only at the output.
//
// The channel part of x_j enters in slot m only (see ChannelEncoding).
//
// phi1's final affine layer commutes with the aggregation, so it is
// applied once per pair after summing the hidden activations, and phi1's
// first layer is split into a per-vertex part and a per-edge part. Both are
// exact rewrites of the per-edge MLP.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jcpa/autodiff.hpp"
#include "jcpa/hetgraph.hpp"
#include "jcpa/matrix.hpp"
#include "jcpa/metrics.hpp"
#include "jcpa/network.hpp"
#include "jcpa/random.hpp"

namespace jcpa {

/// Where a message's state and node feature come from.
///  kMixed:    sender state x_j, receiving vertex feature v_(i,m) (default);
///             the heads then see the pair's own per-channel direct gains.
///  kSender:   both from the sending vertex.
///  kReceiver: both from the receiving vertex.
enum class MessageSource { kMixed, kSender, kReceiver };

/// Pair-level reduction of messages. kMean divides the sum by the pair's
/// in-degree, keeping head inputs at the same scale for every D.
enum class Aggregation { kMean, kSum };

/// How the channel part of a state enters a message into vertex (i, m).
///  kSlot:     only slot m is populated, holding the source's weight on the
///             source vertex's channel; other slots are zero. Messages then
///             stay attributable to channel m after the per-pair sum.
///  kAbsolute: the source's full channel distribution, unchanged.
enum class ChannelEncoding { kSlot, kAbsolute };

/// How a soft channel matrix enters the training loss.
///  kExpected: sum_m w_i c_i^m log2(1 + g_ii^m p_i / (sum_j c_j^m g_ij^m p_j + sigma^2)),
///             linear in a pair's own channel distribution.
///  kDirect:   soft c_i^m scales the pair's own signal inside the SINR, the
///             same continuous relaxation as objective() on a soft matrix.
/// Both equal the hard objective on one-hot input.
enum class Relaxation { kExpected, kDirect };

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  ad::AdamConfig adam;
  std::uint64_t seed = 1;
  std::size_t patience = 0;  // 0 disables early stopping
  Relaxation relaxation = Relaxation::kExpected;

  friend bool operator==(const TrainConfig& a, const TrainConfig& b) {
    return a.epochs == b.epochs && a.batch_size == b.batch_size && a.adam.lr == b.adam.lr &&
           a.adam.beta1 == b.adam.beta1 && a.adam.beta2 == b.adam.beta2 && a.adam.eps == b.adam.eps &&
           a.seed == b.seed && a.patience == b.patience && a.relaxation == b.relaxation;
  }
};

struct ModelMeta {
  std::size_t m_channels = 2;
  std::size_t s_layers = 3;
  FeatureTransform transform;
  double p_max = 1.0;
  double noise_power = 1e-10;
  std::uint64_t seed = 0;
  TrainConfig train;
  MessageSource message_source = MessageSource::kMixed;
  ChannelEncoding channel_encoding = ChannelEncoding::kSlot;
  Aggregation aggregation = Aggregation::kMean;

  friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

struct GnnLayerParams {
  ad::MlpParams phi1;    // (M+5) -> 16 -> 32
  ad::MlpParams alpha1;  // (M+33) -> 16 -> 8 -> M, softmax
  ad::MlpParams alpha2;  // (M+33) -> 16 -> 8 -> 1, sigmoid

  friend bool operator==(const GnnLayerParams&, const GnnLayerParams&) = default;
};

struct JcpgnnParams {
  std::vector<GnnLayerParams> layers;
  ModelMeta meta;

  friend bool operator==(const JcpgnnParams&, const JcpgnnParams&) = default;
};

inline constexpr std::size_t kMessageHidden = 16;
inline constexpr std::size_t kMessageWidth = 32;

inline std::vector<std::size_t> phi1_dims(std::size_t m) { return {m + 5, kMessageHidden, kMessageWidth}; }
inline std::vector<std::size_t> alpha1_dims(std::size_t m) { return {m + 1 + kMessageWidth, 16, 8, m}; }
inline std::vector<std::size_t> alpha2_dims(std::size_t m) { return {m + 1 + kMessageWidth, 16, 8, 1}; }

inline JcpgnnParams init_params(std::size_t m_channels, std::size_t s_layers, std::uint64_t seed) {
  if (m_channels < 1) throw std::invalid_argument("init_params: M must be >= 1");
  if (s_layers < 1) throw std::invalid_argument("init_params: S must be >= 1");
  Rng rng(seed);
  JcpgnnParams p;
  p.meta.m_channels = m_channels;
  p.meta.s_layers = s_layers;
  p.meta.seed = seed;
  for (std::size_t s = 0; s < s_layers; ++s) {
    GnnLayerParams layer;
    const auto d1 = phi1_dims(m_channels);
    const auto d2 = alpha1_dims(m_channels);
    const auto d3 = alpha2_dims(m_channels);
    layer.phi1 = ad::init_mlp(d1, ad::Activation::kIdentity, rng);
    layer.alpha1 = ad::init_mlp(d2, ad::Activation::kSoftmax, rng);
    layer.alpha2 = ad::init_mlp(d3, ad::Activation::kSigmoid, rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Every trainable tensor in a fixed order: per layer phi1, alpha1, alpha2,
/// each as (weight, bias) per dense layer.
inline std::vector<Matrix*> parameter_tensors(JcpgnnParams& p) {
  std::vector<Matrix*> out;
  for (auto& layer : p.layers) {
    for (ad::MlpParams* mlp : {&layer.phi1, &layer.alpha1, &layer.alpha2}) {
      for (auto& dl : mlp->layers) {
        out.push_back(&dl.weight);
        out.push_back(&dl.bias);
      }
    }
  }
  return out;
}

inline std::size_t parameter_count(const JcpgnnParams& p) {
  std::size_t n = 0;
  for (Matrix* t : parameter_tensors(const_cast<JcpgnnParams&>(p))) n += t->size();
  return n;
}

struct ModelVars {
  std::vector<std::array<ad::MlpVars, 3>> layers;  // phi1, alpha1, alpha2

  std::vector<ad::Var> flat() const {
    std::vector<ad::Var> out;
    for (const auto& l : layers) {
      for (const auto& mlp : l) {
        for (const auto& [w, b] : mlp.layers) {
          out.push_back(w);
          out.push_back(b);
        }
      }
    }
    return out;
  }
};

inline ModelVars bind(ad::Tape& tape, const JcpgnnParams& p) {
  ModelVars v;
  for (const auto& layer : p.layers) {
    v.layers.push_back({ad::bind(tape, layer.phi1), ad::bind(tape, layer.alpha1), ad::bind(tape, layer.alpha2)});
  }
  return v;
}

struct TapeOutput {
  ad::Var channel;  // D x M, rows on the simplex (or the fixed assignment)
  ad::Var rho;      // D x 1, power / p_max in (0, 1)
};

namespace detail {

inline void check_compatible(const HeteroGraph& g, const JcpgnnParams& p) {
  if (g.m_channels != p.meta.m_channels) {
    throw ad::ShapeError("forward: graph has M=" + std::to_string(g.m_channels) + " but model expects M=" +
                         std::to_string(p.meta.m_channels));
  }
  for (const auto& layer : p.layers) {
    if (layer.phi1.layers.size() < 2 || layer.phi1.output != ad::Activation::kIdentity) {
      throw std::invalid_argument("forward: phi1 must have >= 2 layers and identity output");
    }
  }
}

struct LayerInputs {
  ad::Var state_part;    // per-vertex share of phi1's first pre-activation from the state
  ad::Var feat_part;     // ... and from the node feature
  ad::Var slot_weight;   // kSlot: rows 0..M-1 of phi1's first weight
  ad::Var vertex_share;  // kSlot: channel weight of each vertex, (D*M) x 1
  ad::Var edge_weight;   // rows for the edge feature
};

/// Summed phi1 hidden activations of one edge type, per destination pair.
inline ad::Var edge_hidden_sum(ad::Tape& tape, const ad::MlpVars& phi1, const LayerInputs& in, const EdgeList& edges,
                               const ModelMeta& meta, std::size_t d_pairs) {
  const ad::Var ef = tape.constant(edges.feat);
  const auto& ends = meta.message_source == MessageSource::kReceiver ? edges.dst : edges.src;
  const auto& feat_ends = meta.message_source == MessageSource::kSender ? edges.src : edges.dst;
  ad::Var h = tape.add(tape.gather_rows(in.state_part, ends), tape.gather_rows(in.feat_part, feat_ends));
  h = tape.add(h, tape.matmul(ef, in.edge_weight));
  if (meta.channel_encoding == ChannelEncoding::kSlot) {
    const ad::Var slot_rows = tape.gather_rows(in.slot_weight, edges.dst_channel);
    h = tape.add(h, tape.mul_col(slot_rows, tape.gather_rows(in.vertex_share, ends)));
  }
  h = tape.relu(tape.add_row(h, phi1.layers[0].second));
  for (std::size_t l = 1; l + 1 < phi1.layers.size(); ++l) {
    h = tape.relu(tape.add_row(tape.matmul(h, phi1.layers[l].first), phi1.layers[l].second));
  }
  return tape.segment_sum(h, edges.dst_pair, d_pairs);
}

}  // namespace detail

/// Runs all S layers on `tape`. The graph must outlive the tape. With
/// `fixed_channel`, the channel part of every post-layer state is replaced by
/// that one-hot matrix and the channel head's output is discarded.
inline TapeOutput forward_on_tape(ad::Tape& tape, const ModelVars& vars, const JcpgnnParams& params,
                                  const HeteroGraph& g, const Matrix* fixed_channel = nullptr) {
  detail::check_compatible(g, params);
  const std::size_t d = g.d_pairs;
  const std::size_t m = g.m_channels;
  const ad::Var node_feat = tape.constant(g.node_feat);
  const bool mean = params.meta.aggregation == Aggregation::kMean;
  Matrix scale(g.pair_in_degree);
  for (double& x : scale.data()) x = !mean ? 1.0 : x > 0.0 ? 1.0 / x : 0.0;
  const ad::Var edge_scale = tape.constant(scale);
  const ad::Var bias_count = tape.constant(mean ? Matrix(d, 1, 1.0) : g.pair_in_degree);
  const ad::Var fixed = fixed_channel != nullptr ? tape.constant(*fixed_channel) : ad::Var{};

  ad::Var c = tape.constant(Matrix(d, m, 1.0));
  ad::Var rho = tape.constant(Matrix(d, 1, 1.0));
  for (std::size_t s = 0; s < vars.layers.size(); ++s) {
    const auto& [phi1, alpha1, alpha2] = vars.layers[s];
    const ad::Var w_first = phi1.layers[0].first;
    detail::LayerInputs in;
    in.edge_weight = tape.slice_rows(w_first, m + 3, m + 5);
    if (params.meta.channel_encoding == ChannelEncoding::kSlot) {
      in.slot_weight = tape.slice_rows(w_first, 0, m);
      in.vertex_share = tape.reshape(c, d * m, 1);
      in.state_part = tape.matmul(tape.gather_rows(rho, g.vertex_pair), tape.slice_rows(w_first, m, m + 1));
    } else {
      const ad::Var state = tape.concat_cols({tape.gather_rows(c, g.vertex_pair), tape.gather_rows(rho, g.vertex_pair)});
      in.state_part = tape.matmul(state, tape.slice_rows(w_first, 0, m + 1));
    }
    in.feat_part = tape.matmul(node_feat, tape.slice_rows(w_first, m + 1, m + 3));

    ad::Var hidden;
    bool have_hidden = false;
    for (const EdgeList* edges : {&g.intf, &g.pot}) {
      if (edges->size() == 0) continue;
      const ad::Var h = detail::edge_hidden_sum(tape, phi1, in, *edges, params.meta, d);
      hidden = have_hidden ? tape.add(hidden, h) : h;
      have_hidden = true;
    }
    if (!have_hidden) {
      const std::size_t width = tape.value(phi1.layers.back().first).rows();
      hidden = tape.constant(Matrix(d, width, 0.0));
    }
    const auto& [w_last, b_last] = phi1.layers.back();
    const ad::Var aggregated = tape.add(tape.matmul(tape.mul_col(hidden, edge_scale), w_last), tape.matmul(bias_count, b_last));

    const ad::Var head_in = tape.concat_cols({c, rho, aggregated});
    const ad::Var channel = ad::mlp_forward(tape, alpha1, head_in);
    rho = ad::mlp_forward(tape, alpha2, head_in);
    c = fixed_channel != nullptr ? fixed : channel;
  }
  return TapeOutput{c, rho};
}

namespace detail {

/// out[k] += a * w[k] unless a is zero, matching the tape's matmul.
inline void axpy(double a, const double* w, double* out, std::size_t n) {
  if (a == 0.0) return;
  for (std::size_t k = 0; k < n; ++k) out[k] += a * w[k];
}

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
#define JCPA_VECTOR_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define JCPA_VECTOR_CLONES
#endif

/// Inputs of one edge sweep of a two-layer phi1 (see infer).
struct EdgeSweep {
  const std::size_t* ends;       // vertex supplying the state
  const std::size_t* feat_ends;  // vertex supplying the node feature
  const std::size_t* dst_channel;
  const std::size_t* dst_pair;
  const double* edge_feat;  // E x 2
  std::size_t n_edges;
  std::size_t m;
  std::size_t width;
  const double* state;  // (D*M*M) x width
  const double* feat;   // (D*M) x width
  const double* we0;
  const double* we1;
  double* hidden;  // D x width
};

/// hidden[pair(e)] += relu(state + feat + f0*we0 + f1*we1) over all edges.
/// W > 0 fixes the width at compile time; runs of edges into the same pair
/// accumulate in a local buffer.
template <std::size_t W>
inline void sweep_edges_impl(const EdgeSweep& s) {
  const std::size_t w = W > 0 ? W : s.width;
  const double* __restrict we0 = s.we0;
  const double* __restrict we1 = s.we1;
  std::array<double, (W > 0 ? W : 1)> local{};
  std::size_t e = 0;
  while (e < s.n_edges) {
    const std::size_t pair = s.dst_pair[e];
    double* __restrict acc = W > 0 ? local.data() : s.hidden + pair * w;
    if constexpr (W > 0) local.fill(0.0);
    for (; e < s.n_edges && s.dst_pair[e] == pair; ++e) {
      const double* __restrict sv = s.state + (s.ends[e] * s.m + s.dst_channel[e]) * w;
      const double* __restrict fv = s.feat + s.feat_ends[e] * w;
      const double f0 = s.edge_feat[2 * e];
      const double f1 = s.edge_feat[2 * e + 1];
      for (std::size_t k = 0; k < w; ++k) {
        const double x = sv[k] + fv[k] + f0 * we0[k] + f1 * we1[k];
        acc[k] += x > 0.0 ? x : 0.0;
      }
    }
    if constexpr (W > 0) {
      double* out = s.hidden + pair * w;
      for (std::size_t k = 0; k < w; ++k) out[k] += local[k];
    }
  }
}

/// Cloned per instruction set; the widest supported clone is picked at load time.
JCPA_VECTOR_CLONES inline void sweep_edges(const EdgeSweep& s) {
  if (s.width == 16) {
    sweep_edges_impl<16>(s);
  } else {
    sweep_edges_impl<0>(s);
  }
}

/// Tape-free evaluation of forward_on_tape. Every per-edge term that depends
/// on a single vertex is computed once per vertex, and per-edge activations
/// are reduced into their pair as they are produced. Agrees with the tape to
/// rounding (additions are regrouped).
inline std::pair<Matrix, Matrix> infer(const HeteroGraph& g, const JcpgnnParams& params,
                                       const Matrix* fixed_channel) {
  check_compatible(g, params);
  const std::size_t d = g.d_pairs;
  const std::size_t m = g.m_channels;
  const std::size_t nv = d * m;
  const ModelMeta& meta = params.meta;
  const bool slot = meta.channel_encoding == ChannelEncoding::kSlot;
  const bool mean = meta.aggregation == Aggregation::kMean;

  Matrix c(d, m, 1.0);
  Matrix rho(d, 1, 1.0);
  std::vector<double> state, feat, pre, tmp, next;
  for (const auto& layer : params.layers) {
    const Matrix& w = layer.phi1.layers[0].weight;
    const Matrix& b = layer.phi1.layers[0].bias;
    const std::size_t h1 = w.cols();

    // state[(u*M + n)*h1 ..]: first-layer contribution of vertex u's state to
    // a message into a channel-n vertex, bias included.
    state.assign(nv * m * h1, 0.0);
    feat.assign(nv * h1, 0.0);
    for (std::size_t u = 0; u < nv; ++u) {
      const std::size_t i = u / m;
      double* base = &state[u * m * h1];
      if (!slot) {
        for (std::size_t k = 0; k < m; ++k) axpy(c(i, k), w.row(k), base, h1);
      }
      axpy(rho(i, 0), w.row(m), base, h1);
      for (std::size_t k = 0; k < h1; ++k) base[k] += b(0, k);
      for (std::size_t n = 1; n < m; ++n) std::copy(base, base + h1, base + n * h1);
      if (slot) {
        for (std::size_t n = 0; n < m; ++n) axpy(c(i, u % m), w.row(n), base + n * h1, h1);
      }
      axpy(g.node_feat(u, 0), w.row(m + 1), &feat[u * h1], h1);
      axpy(g.node_feat(u, 1), w.row(m + 2), &feat[u * h1], h1);
    }

    const double* we0 = w.row(m + 3);
    const double* we1 = w.row(m + 4);
    const std::size_t width = layer.phi1.layers.back().weight.rows();
    const bool deep = layer.phi1.layers.size() > 2;
    Matrix hidden(d, width, 0.0);
    pre.resize(h1);
    for (const EdgeList* edges : {&g.intf, &g.pot}) {
      const auto& ends = meta.message_source == MessageSource::kReceiver ? edges->dst : edges->src;
      const auto& feat_ends = meta.message_source == MessageSource::kSender ? edges->src : edges->dst;
      if (!deep) {
        sweep_edges({ends.data(), feat_ends.data(), edges->dst_channel.data(), edges->dst_pair.data(),
                     edges->feat.data().data(), edges->size(), m, h1, state.data(), feat.data(), we0, we1,
                     hidden.data().data()});
        continue;
      }
      for (std::size_t e = 0; e < edges->size(); ++e) {
        const double* sv = &state[(ends[e] * m + edges->dst_channel[e]) * h1];
        const double* fv = &feat[feat_ends[e] * h1];
        const double f0 = edges->feat(e, 0);
        const double f1 = edges->feat(e, 1);
        double* acc = hidden.row(edges->dst_pair[e]);
        for (std::size_t k = 0; k < h1; ++k) {
          const double x = sv[k] + fv[k] + f0 * we0[k] + f1 * we1[k];
          pre[k] = x > 0.0 ? x : 0.0;
        }
        const double* h = pre.data();
        for (std::size_t l = 1; l + 1 < layer.phi1.layers.size(); ++l) {
          const auto& dl = layer.phi1.layers[l];
          next.assign(dl.weight.cols(), 0.0);
          for (std::size_t k = 0; k < dl.weight.rows(); ++k) axpy(h[k], dl.weight.row(k), next.data(), next.size());
          for (std::size_t k = 0; k < next.size(); ++k) {
            const double x = next[k] + dl.bias(0, k);
            next[k] = x > 0.0 ? x : 0.0;
          }
          tmp.swap(next);
          h = tmp.data();
        }
        for (std::size_t k = 0; k < width; ++k) acc[k] += h[k];
      }
    }

    const auto& last = layer.phi1.layers.back();
    Matrix aggregated(d, last.weight.cols(), 0.0);
    Matrix bias_term(d, last.weight.cols(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double deg = g.pair_in_degree(i, 0);
      const double scale = !mean ? 1.0 : deg > 0.0 ? 1.0 / deg : 0.0;
      double* row = hidden.row(i);
      for (std::size_t k = 0; k < width; ++k) row[k] *= scale;
      for (std::size_t k = 0; k < width; ++k) axpy(row[k], last.weight.row(k), aggregated.row(i), aggregated.cols());
      axpy(mean ? 1.0 : deg, last.bias.row(0), bias_term.row(i), bias_term.cols());
    }
    for (std::size_t k = 0; k < aggregated.size(); ++k) aggregated.data()[k] += bias_term.data()[k];

    Matrix head_in(d, m + 1 + aggregated.cols());
    for (std::size_t i = 0; i < d; ++i) {
      double* row = head_in.row(i);
      std::copy(c.row(i), c.row(i) + m, row);
      row[m] = rho(i, 0);
      std::copy(aggregated.row(i), aggregated.row(i) + aggregated.cols(), row + m + 1);
    }
    Matrix channel = ad::mlp_forward(layer.alpha1, head_in);
    rho = ad::mlp_forward(layer.alpha2, head_in);
    c = fixed_channel != nullptr ? *fixed_channel : std::move(channel);
  }
  return {std::move(c), std::move(rho)};
}

}  // namespace detail

/// Weighted sum rate of the (possibly soft) allocation as a 1x1 tensor.
/// The instance must outlive the tape.
inline ad::Var sum_rate_on_tape(ad::Tape& tape, ad::Var channel, ad::Var rho, const NetworkInstance& inst,
                                Relaxation relaxation = Relaxation::kExpected) {
  const std::size_t d = inst.d_pairs;
  const std::size_t m = inst.m_channels;
  Matrix direct(d, m);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < m; ++c) direct(i, c) = inst.gains(i, i, c);
  }
  const ad::Var power = tape.scale(rho, inst.p_max);
  const ad::Var q = tape.mul_col(channel, power);
  const ad::Var direct_gain = tape.constant(std::move(direct));
  const ad::Var signal = relaxation == Relaxation::kDirect ? tape.mul(q, direct_gain) : tape.mul_col(direct_gain, power);
  const ad::Var noise_plus_intf = tape.add_scalar(tape.channel_interference(q, inst.gains), inst.noise_power);
  const ad::Var sinr = tape.div(signal, noise_plus_intf);
  ad::Var rate = tape.scale(tape.log(tape.add_scalar(sinr, 1.0)), 1.0 / std::numbers::ln2);
  if (relaxation == Relaxation::kExpected) rate = tape.mul(rate, channel);
  const ad::Var w = tape.constant(Matrix(d, 1, inst.weights));
  return tape.sum(tape.mul_col(rate, w));
}

enum class OutputMode { kSoft, kHard };

inline std::size_t argmax_lowest(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

inline Allocation to_allocation(const Matrix& channel, const Matrix& rho, double p_max, OutputMode mode) {
  Allocation a;
  a.hard = mode == OutputMode::kHard;
  a.power.resize(rho.rows());
  for (std::size_t i = 0; i < rho.rows(); ++i) a.power[i] = std::min(rho(i, 0) * p_max, p_max);
  if (!a.hard) {
    a.channel = channel;
    return a;
  }
  a.channel = Matrix(channel.rows(), channel.cols(), 0.0);
  for (std::size_t i = 0; i < channel.rows(); ++i) a.channel(i, argmax_lowest(channel.row(i), channel.cols())) = 1.0;
  return a;
}

inline Allocation forward(const HeteroGraph& g, const JcpgnnParams& params, OutputMode mode) {
  const auto [channel, rho] = detail::infer(g, params, nullptr);
  return to_allocation(channel, rho, params.meta.p_max, mode);
}

inline Allocation forward_fixed_channel(const HeteroGraph& g, const JcpgnnParams& params, const Matrix& fixed_channel) {
  if (fixed_channel.rows() != g.d_pairs || fixed_channel.cols() != g.m_channels) {
    throw ad::ShapeError("forward_fixed_channel: expected " + std::to_string(g.d_pairs) + "x" +
                         std::to_string(g.m_channels) + " channel matrix, got " + fixed_channel.shape_string());
  }
  (void)assignment_of(fixed_channel);  // throws unless one-hot
  const auto [channel, rho] = detail::infer(g, params, &fixed_channel);
  Allocation a = to_allocation(channel, rho, params.meta.p_max, OutputMode::kSoft);
  a.hard = true;
  return a;
}

struct Sample {
  const HeteroGraph* graph;
  const NetworkInstance* instance;
};

/// Negative mean weighted sum rate of the soft outputs over `batch`.
inline double loss(std::span<const Sample> batch, const JcpgnnParams& params) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  ad::Tape tape(false);
  const ModelVars vars = bind(tape, params);
  double total = 0.0;
  for (const Sample& s : batch) {
    const TapeOutput out = forward_on_tape(tape, vars, params, *s.graph);
    total += tape.value(sum_rate_on_tape(tape, out.channel, out.rho, *s.instance, params.meta.train.relaxation))(0, 0);
  }
  return -total / static_cast<double>(batch.size());
}

/// Loss and its gradient, flattened in parameter_tensors() order.
inline double loss_and_gradient(std::span<const Sample> batch, const JcpgnnParams& params,
                                std::vector<double>& gradient) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  ad::Tape tape(true);
  const ModelVars vars = bind(tape, params);
  ad::Var total{};
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const TapeOutput out = forward_on_tape(tape, vars, params, *batch[k].graph);
    const ad::Var r = sum_rate_on_tape(tape, out.channel, out.rho, *batch[k].instance, params.meta.train.relaxation);
    total = k == 0 ? r : tape.add(total, r);
  }
  const ad::Var l = tape.scale(total, -1.0 / static_cast<double>(batch.size()));
  tape.backward(l);
  gradient.clear();
  for (ad::Var v : vars.flat()) {
    const Matrix& g = tape.grad(v);
    gradient.insert(gradient.end(), g.data().begin(), g.data().end());
  }
  return tape.value(l)(0, 0);
}

// ---- training ---------------------------------------------------------------

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelOptions {
  std::size_t s_layers = 3;
  std::uint64_t init_seed = 7;
  FeatureTransform::Kind transform = FeatureTransform::Kind::kDecibel;
  MessageSource message_source = MessageSource::kMixed;
  ChannelEncoding channel_encoding = ChannelEncoding::kSlot;
  Aggregation aggregation = Aggregation::kMean;
  FloorRule floor;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_objective = 0.0;
};

struct TrainResult {
  JcpgnnParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

inline std::vector<HeteroGraph> build_graphs(const std::vector<NetworkInstance>& instances,
                                             const FeatureTransform& t) {
  std::vector<HeteroGraph> graphs;
  graphs.reserve(instances.size());
  for (const auto& inst : instances) graphs.push_back(build_graph(inst, t));
  return graphs;
}

inline double mean_hard_objective(const std::vector<HeteroGraph>& graphs, const std::vector<NetworkInstance>& insts,
                                  const JcpgnnParams& params) {
  double total = 0.0;
  for (std::size_t k = 0; k < graphs.size(); ++k) total += objective(insts[k], forward(graphs[k], params, OutputMode::kHard));
  return graphs.empty() ? 0.0 : total / static_cast<double>(graphs.size());
}

inline void flatten(const JcpgnnParams& p, std::vector<double>& out) {
  out.clear();
  for (Matrix* t : parameter_tensors(const_cast<JcpgnnParams&>(p))) out.insert(out.end(), t->data().begin(), t->data().end());
}

inline void unflatten(std::span<const double> flat, JcpgnnParams& p) {
  std::size_t off = 0;
  for (Matrix* t : parameter_tensors(p)) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off), flat.begin() + static_cast<std::ptrdiff_t>(off + t->size()),
              t->data().begin());
    off += t->size();
  }
}

/// Fits the feature transform on `train_ds`, then minimizes the soft loss with
/// Adam over seeded shuffles. Returns the parameters of the epoch with the
/// best validation hard-mode objective (the last epoch if `val_ds` is empty).
inline TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg,
                         const ModelOptions& opts) {
  if (train_ds.instances.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  const std::size_t m = train_ds.geometry.m_channels;
  if (!val_ds.instances.empty() && val_ds.geometry.m_channels != m) {
    throw std::invalid_argument("train: train and validation sets differ in M");
  }

  JcpgnnParams params = init_params(m, opts.s_layers, opts.init_seed);
  params.meta.transform = opts.transform == FeatureTransform::Kind::kDecibel ? fit_transform(train_ds.instances, opts.floor)
                                                                             : FeatureTransform::identity();
  params.meta.p_max = train_ds.fading.p_max;
  params.meta.noise_power = train_ds.fading.noise_power;
  params.meta.train = cfg;
  params.meta.message_source = opts.message_source;
  params.meta.channel_encoding = opts.channel_encoding;
  params.meta.aggregation = opts.aggregation;

  const auto train_graphs = build_graphs(train_ds.instances, params.meta.transform);
  const auto val_graphs = build_graphs(val_ds.instances, params.meta.transform);

  TrainResult result;
  result.params = params;
  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  Rng shuffle_rng(cfg.seed);
  ad::AdamState adam;
  std::vector<std::size_t> order(train_ds.instances.size());
  std::vector<double> flat, grad;
  std::vector<Sample> batch;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back({&train_graphs[order[k]], &train_ds.instances[order[k]]});
      const double l = loss_and_gradient(batch, params, grad);
      if (!std::isfinite(l)) {
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                               std::to_string(start));
      }
      loss_sum += l * static_cast<double>(end - start);
      flatten(params, flat);
      ad::adam_step(flat, grad, adam, cfg.adam);
      unflatten(flat, params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_objective = val_graphs.empty() ? -rec.train_loss : mean_hard_objective(val_graphs, val_ds.instances, params);
    result.history.push_back(rec);

    if (val_graphs.empty() || rec.val_objective > best_val) {
      best_val = rec.val_objective;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace jcpa
