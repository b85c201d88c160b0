#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "genza/error.hpp"
#include "genza/model_catalog.hpp"
#include "genza/npu_roofline.hpp"
#include "genza/workload.hpp"

namespace genza {

// HBM3e, per stack.
inline constexpr double kHbm3eStackBandwidth = 1.2e12;  // bytes/s
inline constexpr double kHbm3eStackCapacity = 36e9;     // bytes

struct CapacityBreakdown {
  double total = 0;
  double weights = 0;         // every expert, they must all be resident
  double kv = 0;
  double active_weights = 0;  // weights touched by one token
};

struct RequirementReport {
  std::uint64_t context_tokens = 0;
  double capacity_bytes = 0;
  std::optional<double> flops_required;  // FLOP/s of peak compute to provision
  double bandwidth_required = 0;         // bytes/s
  CapacityBreakdown per_component;
  double bw_stacks = 0;
  double capacity_stacks = 0;
};

inline double weight_bytes(std::uint64_t params, const Precision& p) {
  return detail::bits_to_bytes(params, p.weight_bits);
}

inline CapacityBreakdown required_capacity(const Workload& w) {
  w.validate();
  const auto params = count_params(w.model);
  CapacityBreakdown c;
  c.weights = weight_bytes(params.total, w.precision);
  c.active_weights = weight_bytes(params.active_per_token, w.precision);
  c.kv = kv_cache_bytes(w.model, w.batch, w.use_case.beam_size, w.use_case.input_tokens,
                        w.use_case.output_tokens, w.precision);
  c.total = c.weights + c.kv;
  return c;
}

/// Peak FLOP/s so that the whole prefill pass finishes within `ttft_slo`.
inline double required_flops(const Workload& w, double ttft_slo,
                             double compute_eff = kDefaultComputeEfficiency) {
  w.validate();
  if (!(ttft_slo > 0)) throw ValidationError("ttft_slo", "must be > 0");
  if (!(compute_eff > 0 && compute_eff <= 1)) {
    throw ValidationError("compute_eff", "must be in (0, 1]");
  }
  const auto g = build_prefill_graph(w.model, w.batch, w.use_case.input_tokens, w.precision);
  return g.total_flops() / (ttft_slo * compute_eff);
}

/// Bytes/s needed to stream active weights plus the end-of-generation KV cache
/// once per `tpot_slo`.
inline double required_bandwidth(const Workload& w, double tpot_slo) {
  if (!(tpot_slo > 0)) throw ValidationError("tpot_slo", "must be > 0");
  const auto c = required_capacity(w);
  return (c.active_weights + c.kv) / tpot_slo;
}

inline RequirementReport make_requirement_report(const Workload& w, double tpot_slo,
                                                 std::optional<double> ttft_slo,
                                                 double compute_eff = kDefaultComputeEfficiency) {
  RequirementReport r;
  r.context_tokens = w.use_case.input_tokens;
  r.per_component = required_capacity(w);
  r.capacity_bytes = r.per_component.total;
  r.bandwidth_required = required_bandwidth(w, tpot_slo);
  if (ttft_slo) r.flops_required = required_flops(w, *ttft_slo, compute_eff);
  r.bw_stacks = r.bandwidth_required / kHbm3eStackBandwidth;
  r.capacity_stacks = r.capacity_bytes / kHbm3eStackCapacity;
  return r;
}

/// TPOT budget for generating text as fast as a person reads it.
inline double reading_rate_tpot(double words_per_minute = 300.0, double tokens_per_word = 1.0) {
  if (!(words_per_minute > 0)) throw ValidationError("words_per_minute", "must be > 0");
  if (!(tokens_per_word > 0)) throw ValidationError("tokens_per_word", "must be > 0");
  return 60.0 / (words_per_minute * tokens_per_word);
}

struct AssistantScenario {
  std::uint64_t decode_tokens = 2000;
  std::uint64_t beams = 4;
  std::uint64_t batch = 1;
  double tpot_slo = reading_rate_tpot();
  Precision precision = Precision::int8();
};

/// Bandwidth and capacity requirements as the prompt grows. A context of 0 is
/// allowed here and leaves only the beams' decode KV.
inline std::vector<RequirementReport> extreme_scale_curve(
    const ModelConfig& model, const std::vector<std::uint64_t>& contexts,
    const AssistantScenario& s = {}) {
  if (!std::is_sorted(contexts.begin(), contexts.end())) {
    throw ValidationError("contexts", "must be ascending");
  }
  if (!(s.tpot_slo > 0)) throw ValidationError("tpot_slo", "must be > 0");
  model.validate();
  s.precision.validate();
  if (s.batch < 1) throw ValidationError("batch", "must be >= 1");
  if (s.beams < 1) throw ValidationError("beam_size", "must be >= 1");

  const auto params = count_params(model);
  std::vector<RequirementReport> out;
  out.reserve(contexts.size());
  for (auto ctx : contexts) {
    RequirementReport r;
    r.context_tokens = ctx;
    auto& c = r.per_component;
    c.weights = weight_bytes(params.total, s.precision);
    c.active_weights = weight_bytes(params.active_per_token, s.precision);
    c.kv = kv_cache_bytes(model, s.batch, s.beams, ctx, s.decode_tokens, s.precision);
    c.total = c.weights + c.kv;
    r.capacity_bytes = c.total;
    r.bandwidth_required = (c.active_weights + c.kv) / s.tpot_slo;
    r.bw_stacks = r.bandwidth_required / kHbm3eStackBandwidth;
    r.capacity_stacks = r.capacity_bytes / kHbm3eStackCapacity;
    out.push_back(r);
  }
  return out;
}

}  // namespace genza
