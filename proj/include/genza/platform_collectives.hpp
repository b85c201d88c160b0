#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genza/detail/json_fields.hpp"
#include "genza/error.hpp"
#include "genza/model_catalog.hpp"
#include "genza/npu_roofline.hpp"
#include "genza/workload.hpp"

namespace genza {

inline constexpr double kDefaultLinkEfficiency = 0.75;  // achieved fraction of link bandwidth
inline constexpr double kDefaultLinkLatency = 2e-6;     // s

struct InterconnectSpec {
  double link_bandwidth = 0;  // bytes/s
  double link_latency = kDefaultLinkLatency;
  double link_efficiency = kDefaultLinkEfficiency;
  double warmup = 0;  // s

  double effective_bandwidth() const { return link_bandwidth * link_efficiency; }

  void validate(const std::string& path = "icn") const {
    if (!(link_bandwidth > 0)) throw ValidationError(path + ".link_bandwidth", "must be > 0");
    if (!(link_latency >= 0)) throw ValidationError(path + ".link_latency", "must be >= 0");
    if (!(link_efficiency > 0 && link_efficiency <= 1)) {
      throw ValidationError(path + ".link_efficiency", "must be in (0, 1]");
    }
    if (!(warmup >= 0)) throw ValidationError(path + ".warmup", "must be >= 0");
  }

  bool operator==(const InterconnectSpec&) const = default;
};

struct PlatformSpec {
  std::string name = "custom";
  std::uint64_t n_npus = 1;
  NpuSpec npu;
  InterconnectSpec icn;

  void validate() const {
    if (n_npus < 1) throw ValidationError("platform.n_npus", "must be >= 1");
    npu.validate("platform.npu");
    icn.validate("platform.icn");
  }

  bool operator==(const PlatformSpec&) const = default;
};

inline InterconnectSpec icn_from_json(const nlohmann::json& j, const std::string& path) {
  detail::FieldReader r(j, path);
  InterconnectSpec icn;
  icn.link_bandwidth = r.get_number("link_bandwidth_gb_per_s") * 1e9;
  icn.link_latency = r.get_number("link_latency_us") / 1e6;
  icn.link_efficiency = r.get_number("link_efficiency");
  icn.warmup = r.get_number("warmup_us") / 1e6;
  r.finish();
  return icn;
}

inline nlohmann::json to_json(const InterconnectSpec& icn) {
  return {{"link_bandwidth_gb_per_s", icn.link_bandwidth / 1e9},
          {"link_latency_us", icn.link_latency * 1e6},
          {"link_efficiency", icn.link_efficiency},
          {"warmup_us", icn.warmup * 1e6}};
}

inline PlatformSpec platform_from_json(const nlohmann::json& j) {
  detail::FieldReader r(j, "platform");
  PlatformSpec p;
  if (r.has("name")) p.name = r.get_string("name");
  p.n_npus = r.get_uint("n_npus");
  p.npu = npu_from_json(r.raw("npu"), "platform.npu");
  p.icn = icn_from_json(r.raw("icn"), "platform.icn");
  r.finish();
  p.validate();
  return p;
}

inline nlohmann::json to_json(const PlatformSpec& p) {
  return {{"name", p.name}, {"n_npus", p.n_npus}, {"npu", to_json(p.npu)}, {"icn", to_json(p.icn)}};
}

namespace platforms {

/// A100 80 GB SXM, int8 tensor throughput, host DRAM over PCIe as the slow tier.
inline PlatformSpec a100_80gb(std::uint64_t n = 1) {
  return {"a100-80gb", n, {624e12, 0.6, {80e9, 2039e9, 0.7}, {512e9, 64e9, 1.0}},
          {300e9, kDefaultLinkLatency, kDefaultLinkEfficiency, 0}};
}

inline PlatformSpec a100_40gb(std::uint64_t n = 1) {
  return {"a100-40gb", n, {624e12, 0.6, {40e9, 1555e9, 0.7}, {512e9, 64e9, 1.0}},
          {300e9, kDefaultLinkLatency, kDefaultLinkEfficiency, 0}};
}

/// 8x H100 SXM fully connected by NVLink.
inline PlatformSpec h100_hgx8() {
  return {"h100-hgx8", 8, {1979e12, 0.6, {80e9, 3350e9, 0.7}, {1024e9, 64e9, 1.0}},
          {450e9, kDefaultLinkLatency, kDefaultLinkEfficiency, 0}};
}

/// Baseline NPU for platform-characteristic studies.
inline PlatformSpec reference_npu(std::uint64_t n = 1) {
  return {"reference", n, {800e12, 0.6, {40e9, 4000e9, 0.7}, {512e9, 64e9, 1.0}},
          {300e9, kDefaultLinkLatency, kDefaultLinkEfficiency, 0}};
}

inline std::vector<PlatformSpec> builtin() {
  return {a100_80gb(), a100_40gb(), h100_hgx8(), reference_npu()};
}

}  // namespace platforms

/// Built-in platform name or path to a platform JSON file.
inline PlatformSpec load_platform(std::string_view source) {
  for (auto& p : platforms::builtin()) {
    if (p.name == source) return p;
  }
  std::filesystem::path path(source);
  std::ifstream in(path);
  if (!in) throw ValidationError("platform", "unknown platform or unreadable file '" +
                                                 std::string(source) + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("platform", std::string("malformed JSON: ") + e.what());
  }
  return platform_from_json(j);
}

// ---------------------------------------------------------------------------
// Collectives
// ---------------------------------------------------------------------------

/// Ring all-reduce of an M-byte buffer held by each of N participants.
inline double allreduce_time(double message_bytes, std::uint64_t participants,
                             const InterconnectSpec& icn) {
  if (participants <= 1) return 0.0;
  const double n = static_cast<double>(participants);
  const double chunk = message_bytes / n;
  return icn.warmup + 2.0 * (n - 1.0) * (icn.link_latency + chunk / icn.effective_bandwidth());
}

inline double p2p_time(double message_bytes, const InterconnectSpec& icn) {
  return icn.warmup + icn.link_latency + message_bytes / icn.effective_bandwidth();
}

// ---------------------------------------------------------------------------
// Sharding
// ---------------------------------------------------------------------------

struct NpuBytes {
  double weights = 0;
  double kv = 0;
  double activations = 0;
  double total() const { return weights + kv + activations; }
};

/// One stage graph split across a tp x pp group.
struct ShardedPlan {
  Stage stage = Stage::prefill;
  std::vector<OperatorSpec> per_npu_ops;  // one layer's operators on one NPU
  std::uint64_t n_layers = 0;
  std::uint64_t tp = 1;
  std::uint64_t pp = 1;
  std::vector<std::uint64_t> layers_per_stage;
  double allreduce_bytes = 0;
  std::uint64_t allreduce_count = 0;  // per forward pass
  double p2p_bytes = 0;
  std::uint64_t p2p_count = 0;  // per forward pass
  NpuBytes per_npu_bytes;       // most loaded stage

  std::uint64_t max_stage_layers() const {
    return layers_per_stage.empty()
               ? 0
               : *std::max_element(layers_per_stage.begin(), layers_per_stage.end());
  }
};

/// First (L mod pp) stages take one extra layer.
inline std::vector<std::uint64_t> split_layers(std::uint64_t layers, std::uint64_t pp) {
  std::vector<std::uint64_t> out(pp, layers / pp);
  for (std::uint64_t i = 0; i < layers % pp; ++i) ++out[i];
  return out;
}

inline void check_placement(const ModelConfig& model, const Parallelism& par,
                            const PlatformSpec& platform) {
  par.validate(model);
  if (par.group_size() > platform.n_npus) {
    throw ValidationError("parallelism", "tp*pp = " + std::to_string(par.group_size()) +
                                             " exceeds platform n_npus = " +
                                             std::to_string(platform.n_npus));
  }
}

inline ShardedPlan shard_workload(const OperatorGraph& graph, const ModelConfig& model,
                                  const Workload& w, const PlatformSpec& platform) {
  const auto& par = w.parallelism;
  check_placement(model, par, platform);

  ShardedPlan plan;
  plan.stage = graph.stage;
  plan.n_layers = graph.n_layers;
  plan.tp = par.tp;
  plan.pp = par.pp;
  plan.layers_per_stage = split_layers(graph.n_layers, par.pp);

  const double tp = static_cast<double>(par.tp);
  plan.per_npu_ops = graph.per_layer_ops;
  for (auto& op : plan.per_npu_ops) {
    op.flops /= tp;
    op.weight_bytes /= tp;
    op.activation_bytes /= tp;
    op.kv_read_bytes /= tp;
  }

  // Layer-boundary activation: every row's new tokens at model width.
  const double boundary = static_cast<double>(graph.batch) * static_cast<double>(graph.tokens) *
                          static_cast<double>(graph.d_model) * graph.precision.act_bytes();
  if (par.tp > 1) {
    plan.allreduce_bytes = boundary;
    plan.allreduce_count = graph.collective_points_per_layer * graph.n_layers;
  }
  if (par.pp > 1) {
    plan.p2p_bytes = boundary;
    plan.p2p_count = par.pp - 1;
  }

  const double stage_layers = static_cast<double>(plan.max_stage_layers());
  for (const auto& op : plan.per_npu_ops) {
    plan.per_npu_bytes.weights += op.weight_bytes * stage_layers;
    plan.per_npu_bytes.kv += op.kv_read_bytes * stage_layers;
    plan.per_npu_bytes.activations = std::max(plan.per_npu_bytes.activations, op.activation_bytes);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// End-to-end stage time
// ---------------------------------------------------------------------------

struct StageBreakdown {
  Stage stage = Stage::prefill;
  double gemm_time = 0;
  double attention_time = 0;
  double collective_time = 0;
  double pipeline_handoff_time = 0;
  double total = 0;
  // Time spent in operators limited by each roof, summed over layers.
  double compute_bound_time = 0;
  double memory_bound_time = 0;
  double offload_bound_time = 0;
  /// Slowest pipeline stage, i.e. the steady-state interval between passes.
  double max_stage_time = 0;
  std::uint64_t allreduce_count = 0;
  std::uint64_t p2p_count = 0;
  NpuBytes per_npu_bytes;

  double network_time() const { return collective_time + pipeline_handoff_time; }

  /// Largest time share among compute, memory, offload and network.
  std::string bound() const {
    struct Share {
      const char* tag;
      double t;
    };
    const Share shares[] = {{"compute", compute_bound_time},
                            {"memory", memory_bound_time},
                            {"offload", offload_bound_time},
                            {"network", network_time()}};
    const Share* best = &shares[0];
    for (const auto& s : shares) {
      if (s.t > best->t) best = &s;
    }
    return best->tag;
  }
};

/// Component-wise average; used to summarize the first and last decode step.
inline StageBreakdown average(const StageBreakdown& a, const StageBreakdown& b) {
  StageBreakdown r = a;
  auto mid = [](double x, double y) { return 0.5 * (x + y); };
  r.gemm_time = mid(a.gemm_time, b.gemm_time);
  r.attention_time = mid(a.attention_time, b.attention_time);
  r.collective_time = mid(a.collective_time, b.collective_time);
  r.pipeline_handoff_time = mid(a.pipeline_handoff_time, b.pipeline_handoff_time);
  r.total = mid(a.total, b.total);
  r.compute_bound_time = mid(a.compute_bound_time, b.compute_bound_time);
  r.memory_bound_time = mid(a.memory_bound_time, b.memory_bound_time);
  r.offload_bound_time = mid(a.offload_bound_time, b.offload_bound_time);
  r.max_stage_time = mid(a.max_stage_time, b.max_stage_time);
  r.per_npu_bytes.weights = mid(a.per_npu_bytes.weights, b.per_npu_bytes.weights);
  r.per_npu_bytes.kv = mid(a.per_npu_bytes.kv, b.per_npu_bytes.kv);
  r.per_npu_bytes.activations = mid(a.per_npu_bytes.activations, b.per_npu_bytes.activations);
  return r;
}

/// Collectives are not overlapped with compute; pipeline stages run serially
/// for a single request.
inline StageBreakdown model_time(const ShardedPlan& plan, const PlatformSpec& platform,
                                 const OffloadPlan& offload) {
  offload.validate();
  const auto& npu = platform.npu;
  const double layers = static_cast<double>(plan.n_layers);

  double ops = 0, gemm = 0, attention = 0, c_bound = 0, m_bound = 0, o_bound = 0;
  for (const auto& op : plan.per_npu_ops) {
    const auto t = op_time(op, npu, offload);
    ops += t.op_time;
    (op.is_attention() ? attention : gemm) += t.op_time;
    switch (t.bound) {
      case Bound::compute: c_bound += t.op_time; break;
      case Bound::memory: m_bound += t.op_time; break;
      case Bound::offload: o_bound += t.op_time; break;
    }
  }
  const double ar = allreduce_time(plan.allreduce_bytes, plan.tp, platform.icn);
  const double ar_per_layer = plan.tp > 1 ? 2.0 * ar : 0.0;
  const double n2n = plan.pp > 1 ? p2p_time(plan.p2p_bytes, platform.icn) : 0.0;
  const double layer_time = ops + ar_per_layer;

  StageBreakdown b;
  b.stage = plan.stage;
  b.gemm_time = layers * gemm;
  b.attention_time = layers * attention;
  b.collective_time = layers * ar_per_layer;
  b.pipeline_handoff_time = static_cast<double>(plan.pp - 1) * n2n;
  // Summed in graph order so a 1x1 plan reproduces graph_time bit-for-bit.
  b.total = layers * ops + b.collective_time + b.pipeline_handoff_time;
  b.compute_bound_time = layers * c_bound;
  b.memory_bound_time = layers * m_bound;
  b.offload_bound_time = layers * o_bound;
  b.max_stage_time = static_cast<double>(plan.max_stage_layers()) * layer_time + n2n;
  b.allreduce_count = plan.allreduce_count;
  b.p2p_count = plan.p2p_count;
  b.per_npu_bytes = plan.per_npu_bytes;
  return b;
}

/// Offload is derived from the plan's own per-NPU footprint.
inline StageBreakdown model_time(const ShardedPlan& plan, const PlatformSpec& platform) {
  const double need = plan.per_npu_bytes.total();
  const auto offload = need > 0 ? plan_offload(need, platform.npu) : OffloadPlan::all_resident();
  return model_time(plan, platform, offload);
}

}  // namespace genza
