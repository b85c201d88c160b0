#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "genza/error.hpp"
#include "genza/model_catalog.hpp"
#include "genza/npu_roofline.hpp"
#include "genza/platform_collectives.hpp"
#include "genza/workload.hpp"

namespace genza {

struct MemoryReport {
  NpuBytes per_npu;               // footprint of the most loaded NPU
  double per_npu_required = 0;    // bytes
  double per_npu_fast = 0;        // fast-tier capacity, bytes
  double offloaded = 0;           // bytes spilled to the slow tier
  double resident_fraction = 1;
  bool fits = true;
};

struct InferenceMetrics {
  double ttft = 0;
  double tpot_mean = 0;
  double tpot_first = 0;
  double tpot_last = 0;
  double latency = 0;
  double throughput = 0;          // output tokens/s, B / tpot_mean
  double prefill_throughput = 0;  // requests/s with prompts streaming through the pipeline
  std::uint64_t replicas = 1;     // data-parallel copies of the tp x pp group
  MemoryReport memory;
  StageBreakdown prefill_breakdown;
  StageBreakdown decode_breakdown;
  bool meets_ttft_slo = false;
  bool meets_tpot_slo = false;
};

/// Per-NPU bytes that must be resident for the whole request: weights of the
/// largest pipeline stage (all experts), its share of the end-of-generation
/// KV cache, and the largest single operator's activations.
inline MemoryReport memory_requirement(const Workload& w, const PlatformSpec& platform) {
  const auto& m = w.model;
  const auto& par = w.parallelism;
  const double tp = static_cast<double>(par.tp);
  const auto stages = split_layers(m.n_layers, par.pp);
  const double stage_share =
      static_cast<double>(*std::max_element(stages.begin(), stages.end())) /
      static_cast<double>(m.n_layers);

  const auto prefill = build_prefill_graph(m, w.batch, w.use_case.input_tokens, w.precision);
  const auto decode =
      build_decode_graph(m, effective_decode_batch(w),
                         w.use_case.input_tokens + w.use_case.output_tokens - 1, w.precision);

  MemoryReport r;
  r.per_npu.weights = prefill.total_weight_bytes() * stage_share / tp;
  r.per_npu.kv = kv_cache_bytes(m, w.batch, w.use_case.beam_size, w.use_case.input_tokens,
                                w.use_case.output_tokens, w.precision) *
                 stage_share / tp;
  r.per_npu.activations =
      std::max(prefill.max_activation_bytes(), decode.max_activation_bytes()) / tp;
  r.per_npu_required = r.per_npu.total();
  r.per_npu_fast = platform.npu.fast_mem.capacity;
  r.offloaded = std::max(0.0, r.per_npu_required - r.per_npu_fast);
  r.resident_fraction = std::min(1.0, r.per_npu_fast / r.per_npu_required);
  r.fits = r.offloaded == 0.0;
  return r;
}

/// One decode step producing output token `i` (1-based).
inline StageBreakdown decode_step(const Workload& w, const PlatformSpec& platform,
                                  const OffloadPlan& offload, std::uint64_t i) {
  const auto graph = build_decode_graph(w.model, effective_decode_batch(w),
                                        w.use_case.input_tokens + i - 1, w.precision);
  return model_time(shard_workload(graph, w.model, w, platform), platform, offload);
}

inline InferenceMetrics analyze(const Workload& w, const PlatformSpec& platform) {
  w.validate();
  platform.validate();
  check_placement(w.model, w.parallelism, platform);

  InferenceMetrics out;
  out.memory = memory_requirement(w, platform);
  const auto offload = plan_offload(out.memory.per_npu_required, platform.npu);

  const auto prefill_graph =
      build_prefill_graph(w.model, w.batch, w.use_case.input_tokens, w.precision);
  out.prefill_breakdown =
      model_time(shard_workload(prefill_graph, w.model, w, platform), platform, offload);

  // Each op time is the max of two affine functions of the context, so per-step
  // TPOT is convex and the first/last average bounds the mean from above; it is
  // exact whenever no operator changes bound along the way.
  const auto first = decode_step(w, platform, offload, 1);
  const auto last = decode_step(w, platform, offload, w.use_case.output_tokens);
  out.decode_breakdown = average(first, last);

  const double batch = static_cast<double>(w.batch);
  out.ttft = out.prefill_breakdown.total;
  out.tpot_first = first.total;
  out.tpot_last = last.total;
  out.tpot_mean = out.decode_breakdown.total;
  out.latency = out.ttft + out.tpot_mean * static_cast<double>(w.use_case.output_tokens);
  out.throughput = batch / out.tpot_mean;
  out.prefill_throughput = batch / out.prefill_breakdown.max_stage_time;
  out.replicas = platform.n_npus / w.parallelism.group_size();
  out.meets_ttft_slo = out.ttft <= w.use_case.ttft_slo;
  out.meets_tpot_slo = out.tpot_mean <= w.use_case.tpot_slo;
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepPoint {
  double value = 0;
  std::string label;  // overrides `value` in reports when set
  Parallelism parallelism;
  std::optional<InferenceMetrics> metrics;
  std::string error;  // set when the point could not be evaluated
  std::optional<std::uint64_t> max_feasible_batch;

  bool fits() const { return metrics && metrics->memory.fits; }
};

struct SweepResult {
  std::string axis;
  std::vector<SweepPoint> points;
  std::optional<std::size_t> saturation;    // throughput stops growing here
  std::optional<std::size_t> oom_boundary;  // first point that offloads or fails
  std::optional<std::size_t> best_prefill;
  std::optional<std::size_t> best_decode;
};

inline SweepPoint evaluate_point(const Workload& w, const PlatformSpec& platform, double value) {
  SweepPoint p;
  p.value = value;
  p.parallelism = w.parallelism;
  try {
    p.metrics = analyze(w, platform);
  } catch (const ModelError& e) {
    p.error = e.what();
  } catch (const ValidationError& e) {
    p.error = e.what();
  }
  return p;
}

inline void annotate_oom(SweepResult& r) {
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    if (!r.points[i].fits()) {
      r.oom_boundary = i;
      return;
    }
  }
}

inline constexpr double kDefaultSaturationGain = 0.01;

/// Static-batching sweep. Saturation marks the last batch before the relative
/// throughput gain per unit of batch falls below `saturation_gain`.
inline SweepResult batch_sweep(const Workload& w, const PlatformSpec& platform,
                               const std::vector<std::uint64_t>& batches,
                               double saturation_gain = kDefaultSaturationGain) {
  if (batches.empty()) throw ValidationError("batches", "must be non-empty");
  if (!std::is_sorted(batches.begin(), batches.end()) ||
      std::adjacent_find(batches.begin(), batches.end()) != batches.end()) {
    throw ValidationError("batches", "must be strictly ascending");
  }
  SweepResult r;
  r.axis = "batch";
  for (auto b : batches) {
    Workload wb = w;
    wb.batch = b;
    r.points.push_back(evaluate_point(wb, platform, static_cast<double>(b)));
  }
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const auto& prev = r.points[i - 1];
    const auto& cur = r.points[i];
    if (!prev.metrics || !cur.metrics) continue;
    const double gain = (cur.metrics->throughput / prev.metrics->throughput - 1.0) /
                        (cur.value - prev.value);
    if (gain < saturation_gain) {
      r.saturation = i - 1;
      break;
    }
  }
  annotate_oom(r);
  return r;
}

/// Largest batch (up to `limit`) whose footprint stays in fast memory; 0 if
/// even B = 1 spills.
inline std::uint64_t max_feasible_batch(const Workload& w, const PlatformSpec& platform,
                                        std::uint64_t limit = 4096) {
  auto fits = [&](std::uint64_t b) {
    Workload wb = w;
    wb.batch = b;
    return memory_requirement(wb, platform).fits;
  };
  if (!fits(1)) return 0;
  std::uint64_t lo = 1, hi = limit;
  if (fits(hi)) return hi;
  while (hi - lo > 1) {
    const auto mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

/// Every (tp, pp) with tp*pp <= n_npus, tp <= heads and pp <= layers. Best
/// configurations are picked among those that occupy the whole platform:
/// prefill by pipelined request throughput, decode by token throughput.
inline SweepResult parallelism_compare(const Workload& w, const PlatformSpec& platform) {
  SweepResult r;
  r.axis = "parallelism";
  const auto n = platform.n_npus;
  for (std::uint64_t tp = 1; tp <= std::min(n, w.model.n_heads); ++tp) {
    for (std::uint64_t pp = 1; pp <= std::min(n / tp, w.model.n_layers); ++pp) {
      Workload wc = w;
      wc.parallelism.tp = tp;
      wc.parallelism.pp = pp;
      auto p = evaluate_point(wc, platform, static_cast<double>(r.points.size()));
      p.label = "tp" + std::to_string(tp) + "xpp" + std::to_string(pp);
      p.max_feasible_batch = max_feasible_batch(wc, platform);
      r.points.push_back(std::move(p));
    }
  }

  bool any_full = false;
  for (const auto& p : r.points) any_full |= p.parallelism.group_size() == n;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    if (!p.metrics || (any_full && p.parallelism.group_size() != n)) continue;
    if (!r.best_prefill ||
        p.metrics->prefill_throughput > r.points[*r.best_prefill].metrics->prefill_throughput) {
      r.best_prefill = i;
    }
    if (!r.best_decode ||
        p.metrics->throughput > r.points[*r.best_decode].metrics->throughput) {
      r.best_decode = i;
    }
  }
  annotate_oom(r);
  return r;
}

enum class PlatformAxis { flops, mem_bw, icn_bw, link_latency };

inline const char* to_string(PlatformAxis a) {
  switch (a) {
    case PlatformAxis::flops: return "flops";
    case PlatformAxis::mem_bw: return "mem_bw";
    case PlatformAxis::icn_bw: return "icn_bw";
    case PlatformAxis::link_latency: return "link_latency";
  }
  return "?";
}

inline PlatformAxis platform_axis_from_name(const std::string& s) {
  if (s == "flops") return PlatformAxis::flops;
  if (s == "mem_bw" || s == "mem-bw") return PlatformAxis::mem_bw;
  if (s == "icn_bw" || s == "icn-bw") return PlatformAxis::icn_bw;
  if (s == "link_latency" || s == "link-latency") return PlatformAxis::link_latency;
  throw ValidationError("axis", "unknown axis '" + s +
                                    "' (expected flops, mem_bw, icn_bw or link_latency)");
}

inline PlatformSpec scale_platform(PlatformSpec p, PlatformAxis axis, double factor) {
  switch (axis) {
    case PlatformAxis::flops: p.npu.peak_flops *= factor; break;
    case PlatformAxis::mem_bw: p.npu.fast_mem.bandwidth *= factor; break;
    case PlatformAxis::icn_bw: p.icn.link_bandwidth *= factor; break;
    case PlatformAxis::link_latency: p.icn.link_latency *= factor; break;
  }
  return p;
}

/// Scales one platform characteristic by each multiplier, all else fixed.
inline SweepResult characteristic_sweep(const Workload& w, const PlatformSpec& platform,
                                        PlatformAxis axis, std::vector<double> multipliers) {
  if (multipliers.empty()) throw ValidationError("multipliers", "must be non-empty");
  for (double x : multipliers) {
    if (!(x > 0)) throw ValidationError("multipliers", "must all be > 0");
  }
  std::sort(multipliers.begin(), multipliers.end());
  SweepResult r;
  r.axis = to_string(axis);
  for (double x : multipliers) {
    r.points.push_back(evaluate_point(w, scale_platform(platform, axis, x), x));
  }
  annotate_oom(r);
  return r;
}

}  // namespace genza
