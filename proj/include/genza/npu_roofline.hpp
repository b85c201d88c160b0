#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genza/detail/json_fields.hpp"
#include "genza/error.hpp"
#include "genza/model_catalog.hpp"

namespace genza {

// Default achieved fractions of peak compute and fast-memory bandwidth.
inline constexpr double kDefaultComputeEfficiency = 0.6;
inline constexpr double kDefaultMemoryEfficiency = 0.7;

struct MemoryTier {
  double capacity = 0;    // bytes
  double bandwidth = 0;   // bytes/s
  double efficiency = 1;  // (0, 1]

  double effective_bandwidth() const { return bandwidth * efficiency; }

  void validate(const std::string& path) const {
    if (!(capacity > 0)) throw ValidationError(path + ".capacity", "must be > 0");
    if (!(bandwidth > 0)) throw ValidationError(path + ".bandwidth", "must be > 0");
    if (!(efficiency > 0 && efficiency <= 1)) {
      throw ValidationError(path + ".efficiency", "must be in (0, 1]");
    }
  }

  bool operator==(const MemoryTier&) const = default;
};

/// One accelerator: a compute roof plus fast (HBM-like) and slow (host/CXL)
/// memory tiers.
struct NpuSpec {
  double peak_flops = 0;  // FLOP/s
  double compute_eff = kDefaultComputeEfficiency;
  MemoryTier fast_mem;
  MemoryTier slow_mem;

  double effective_flops() const { return peak_flops * compute_eff; }

  void validate(const std::string& path = "npu") const {
    if (!(peak_flops > 0)) throw ValidationError(path + ".peak_flops", "must be > 0");
    if (!(compute_eff > 0 && compute_eff <= 1)) {
      throw ValidationError(path + ".compute_eff", "must be in (0, 1]");
    }
    fast_mem.validate(path + ".fast_mem");
    slow_mem.validate(path + ".slow_mem");
  }

  bool operator==(const NpuSpec&) const = default;
};

// JSON uses SI prefixes in the field names; base units internally.
inline MemoryTier memory_tier_from_json(const nlohmann::json& j, const std::string& path) {
  detail::FieldReader r(j, path);
  MemoryTier t;
  t.capacity = r.get_number("capacity_gb") * 1e9;
  t.bandwidth = r.get_number("bandwidth_gb_per_s") * 1e9;
  t.efficiency = r.get_number("efficiency");
  r.finish();
  return t;
}

inline nlohmann::json to_json(const MemoryTier& t) {
  return {{"capacity_gb", t.capacity / 1e9},
          {"bandwidth_gb_per_s", t.bandwidth / 1e9},
          {"efficiency", t.efficiency}};
}

inline NpuSpec npu_from_json(const nlohmann::json& j, const std::string& path = "npu") {
  detail::FieldReader r(j, path);
  NpuSpec n;
  n.peak_flops = r.get_number("peak_tflops") * 1e12;
  n.compute_eff = r.get_number("compute_eff");
  n.fast_mem = memory_tier_from_json(r.raw("fast_mem"), r.field_path("fast_mem"));
  n.slow_mem = memory_tier_from_json(r.raw("slow_mem"), r.field_path("slow_mem"));
  r.finish();
  n.validate(path);
  return n;
}

inline nlohmann::json to_json(const NpuSpec& n) {
  return {{"peak_tflops", n.peak_flops / 1e12},
          {"compute_eff", n.compute_eff},
          {"fast_mem", to_json(n.fast_mem)},
          {"slow_mem", to_json(n.slow_mem)}};
}

/// Share of every operator's bytes that lives in fast memory; the rest is
/// streamed from the slow tier.
struct OffloadPlan {
  double resident_fraction = 1.0;
  double offloaded_bytes = 0.0;

  static OffloadPlan all_resident() { return {}; }

  void validate() const {
    if (!(resident_fraction > 0 && resident_fraction <= 1)) {
      throw ValidationError("offload.resident_fraction", "must be in (0, 1]");
    }
    if (!(offloaded_bytes >= 0)) throw ValidationError("offload.offloaded_bytes", "must be >= 0");
  }

  bool offloads() const { return offloaded_bytes > 0; }
};

/// Splits `required_bytes` between the tiers. Throws OutOfMemoryError when the
/// overflow does not fit in `slow_capacity` either.
inline OffloadPlan plan_offload(double required_bytes, double available_fast,
                                double slow_capacity) {
  if (!(required_bytes > 0)) throw ValidationError("required_bytes", "must be > 0");
  if (!(available_fast > 0)) throw ValidationError("available_fast", "must be > 0");
  OffloadPlan plan;
  plan.resident_fraction = std::min(1.0, available_fast / required_bytes);
  plan.offloaded_bytes = std::max(0.0, required_bytes - available_fast);
  if (plan.offloaded_bytes > slow_capacity) {
    throw OutOfMemoryError("out of memory: need " + std::to_string(required_bytes) +
                           " B, fast tier holds " + std::to_string(available_fast) +
                           " B, slow tier holds " + std::to_string(slow_capacity) + " B");
  }
  return plan;
}

inline OffloadPlan plan_offload(double required_bytes, const NpuSpec& npu) {
  return plan_offload(required_bytes, npu.fast_mem.capacity, npu.slow_mem.capacity);
}

enum class Bound { compute, memory, offload };

inline const char* to_string(Bound b) {
  switch (b) {
    case Bound::compute: return "compute";
    case Bound::memory: return "memory";
    case Bound::offload: return "offload";
  }
  return "?";
}

struct OpTiming {
  double compute_time = 0;
  double memory_time = 0;
  double op_time = 0;
  Bound bound = Bound::memory;
};

/// Two-tier roofline for one operator.
inline OpTiming op_time(const OperatorSpec& op, const NpuSpec& npu, const OffloadPlan& plan) {
  const double bytes = op.memory_bytes();
  const double fast_share = plan.resident_fraction * bytes;
  const double fast_time = std::min(bytes, fast_share) / npu.fast_mem.effective_bandwidth();
  const double slow_time =
      bytes > fast_share ? (bytes - fast_share) / npu.slow_mem.effective_bandwidth() : 0.0;

  OpTiming t;
  t.compute_time = op.flops / npu.effective_flops();
  t.memory_time = std::max(fast_time, slow_time);
  t.op_time = std::max(t.compute_time, t.memory_time);
  if (t.compute_time > t.memory_time) {
    t.bound = Bound::compute;
  } else {
    t.bound = slow_time > fast_time ? Bound::offload : Bound::memory;
  }
  return t;
}

inline std::vector<OpTiming> op_timings(const OperatorGraph& g, const NpuSpec& npu,
                                        const OffloadPlan& plan) {
  std::vector<OpTiming> out;
  out.reserve(g.per_layer_ops.size());
  for (const auto& op : g.per_layer_ops) out.push_back(op_time(op, npu, plan));
  return out;
}

/// Per-layer time: sum of operator times, no communication.
inline double graph_time(const OperatorGraph& g, const NpuSpec& npu, const OffloadPlan& plan) {
  double total = 0;
  for (const auto& op : g.per_layer_ops) total += op_time(op, npu, plan).op_time;
  return total;
}

}  // namespace genza
