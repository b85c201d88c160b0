#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genza/analyzer.hpp"
#include "genza/error.hpp"
#include "genza/requirements.hpp"

namespace genza::report {

inline constexpr int kSchemaVersion = 1;

inline constexpr std::string_view kSweepCsvHeader =
    "axis,ttft_s,tpot_ms,latency_s,throughput_tps,fits,prefill_bound,decode_bound";
inline constexpr std::string_view kRequirementCsvHeader =
    "context_tokens,bw_TBps,capacity_TB,bw_stacks,capacity_stacks,weights_TB,kv_TB";

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& field) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(field, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Axis ranges: "a:b:logN", "a:b:stepK" or a comma list.
// ---------------------------------------------------------------------------

inline std::vector<double> parse_range(std::string_view spec, const std::string& field) {
  if (spec.find(':') == std::string_view::npos) {
    std::vector<double> out;
    for (const auto& tok : split(spec, ',')) out.push_back(parse_double(tok, field));
    if (out.empty()) throw ValidationError(field, "empty list");
    return out;
  }
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw ValidationError(field, "expected start:stop:logN or start:stop:stepK");
  const double start = parse_double(parts[0], field);
  const double stop = parse_double(parts[1], field);
  if (!(stop >= start)) throw ValidationError(field, "stop must be >= start");
  const std::string_view kind = parts[2];
  std::vector<double> out;
  if (kind.rfind("log", 0) == 0) {
    const double n = parse_double(kind.substr(3), field);
    if (!(n >= 1) || std::floor(n) != n) throw ValidationError(field, "logN needs integer N >= 1");
    if (!(start > 0)) throw ValidationError(field, "log range needs start > 0");
    const auto count = static_cast<std::size_t>(n);
    if (count == 1) return {start};
    const double ratio = std::log(stop / start) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(i + 1 == count ? stop : start * std::exp(ratio * static_cast<double>(i)));
    }
  } else if (kind.rfind("step", 0) == 0) {
    const double step = parse_double(kind.substr(4), field);
    if (!(step > 0)) throw ValidationError(field, "stepK needs K > 0");
    for (std::size_t i = 0;; ++i) {
      const double v = start + step * static_cast<double>(i);
      if (v > stop) break;
      out.push_back(v);
    }
  } else {
    throw ValidationError(field, "unknown range kind '" + std::string(kind) + "'");
  }
  return out;
}

/// Integer axis: values rounded to the nearest count; colliding values collapse.
inline std::vector<std::uint64_t> parse_count_range(std::string_view spec, const std::string& field,
                                                    std::uint64_t min_value) {
  std::vector<std::uint64_t> out;
  for (double v : parse_range(spec, field)) {
    if (!(v >= static_cast<double>(min_value))) {
      throw ValidationError(field, "values must be >= " + std::to_string(min_value));
    }
    const auto c = static_cast<std::uint64_t>(std::llround(v));
    if (out.empty() || out.back() != c) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const NpuBytes& b) {
  return {{"weights", b.weights}, {"kv", b.kv}, {"activations", b.activations}};
}

inline nlohmann::json to_json(const StageBreakdown& b) {
  return {{"stage", to_string(b.stage)},
          {"gemm_s", b.gemm_time},
          {"attention_s", b.attention_time},
          {"collective_s", b.collective_time},
          {"handoff_s", b.pipeline_handoff_time},
          {"total_s", b.total},
          {"compute_bound_s", b.compute_bound_time},
          {"memory_bound_s", b.memory_bound_time},
          {"offload_bound_s", b.offload_bound_time},
          {"max_stage_s", b.max_stage_time},
          {"allreduce_count", b.allreduce_count},
          {"p2p_count", b.p2p_count},
          {"bound", b.bound()},
          {"per_npu_bytes", to_json(b.per_npu_bytes)}};
}

inline nlohmann::json to_json(const MemoryReport& m) {
  return {{"per_npu", to_json(m.per_npu)},
          {"per_npu_required", m.per_npu_required},
          {"per_npu_fast", m.per_npu_fast},
          {"offloaded", m.offloaded},
          {"resident_fraction", m.resident_fraction},
          {"fits", m.fits}};
}

inline nlohmann::json to_json(const InferenceMetrics& m) {
  return {{"ttft_s", m.ttft},
          {"tpot_mean_s", m.tpot_mean},
          {"tpot_first_s", m.tpot_first},
          {"tpot_last_s", m.tpot_last},
          {"latency_s", m.latency},
          {"throughput_tps", m.throughput},
          {"prefill_throughput_rps", m.prefill_throughput},
          {"replicas", m.replicas},
          {"meets_ttft_slo", m.meets_ttft_slo},
          {"meets_tpot_slo", m.meets_tpot_slo},
          {"memory", to_json(m.memory)},
          {"prefill", to_json(m.prefill_breakdown)},
          {"decode", to_json(m.decode_breakdown)}};
}

inline nlohmann::json to_json(const Workload& w) {
  return {{"use_case", genza::to_json(w.use_case)},
          {"model", genza::to_json(w.model)},
          {"batch", w.batch},
          {"precision", w.precision.name},
          {"parallelism", {{"tp", w.parallelism.tp}, {"pp", w.parallelism.pp}}}};
}

inline nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    nlohmann::json j{{"value", p.value},
                     {"parallelism", {{"tp", p.parallelism.tp}, {"pp", p.parallelism.pp}}}};
    if (!p.label.empty()) j["label"] = p.label;
    if (p.metrics) j["metrics"] = to_json(*p.metrics);
    if (!p.error.empty()) j["error"] = p.error;
    if (p.max_feasible_batch) j["max_feasible_batch"] = *p.max_feasible_batch;
    points.push_back(std::move(j));
  }
  nlohmann::json ann = nlohmann::json::object();
  auto put = [&](const char* key, const std::optional<std::size_t>& idx) {
    ann[key] = idx ? nlohmann::json(*idx) : nlohmann::json(nullptr);
  };
  put("saturation", r.saturation);
  put("oom_boundary", r.oom_boundary);
  put("best_prefill", r.best_prefill);
  put("best_decode", r.best_decode);
  return {{"axis", r.axis}, {"points", points}, {"annotations", ann}};
}

inline nlohmann::json to_json(const RequirementReport& r) {
  nlohmann::json j{{"context_tokens", r.context_tokens},
                   {"capacity_bytes", r.capacity_bytes},
                   {"bandwidth_required", r.bandwidth_required},
                   {"per_component",
                    {{"weights_bytes", r.per_component.weights},
                     {"kv_bytes", r.per_component.kv},
                     {"active_weights_bytes", r.per_component.active_weights}}},
                   {"hbm3e_equivalents",
                    {{"bw_stacks", r.bw_stacks}, {"capacity_stacks", r.capacity_stacks}}}};
  j["flops_required"] = r.flops_required ? nlohmann::json(*r.flops_required) : nlohmann::json(nullptr);
  return j;
}

/// Wraps a payload in the versioned envelope. Keys come out sorted.
inline std::string json_document(const std::string& kind, nlohmann::json payload) {
  nlohmann::json doc{{"schema_version", kSchemaVersion}, {"kind", kind}, {"result", std::move(payload)}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string axis;
  double ttft_s = 0;
  double tpot_ms = 0;
  double latency_s = 0;
  double throughput_tps = 0;
  bool fits = false;
  std::string prefill_bound;
  std::string decode_bound;

  bool operator==(const SweepRow&) const = default;
};

inline std::string axis_label(const SweepPoint& p) {
  return p.label.empty() ? format_double(p.value) : p.label;
}

inline std::vector<SweepRow> sweep_rows(const SweepResult& r) {
  std::vector<SweepRow> rows;
  for (const auto& p : r.points) {
    SweepRow row;
    row.axis = axis_label(p);
    if (p.metrics) {
      row.ttft_s = p.metrics->ttft;
      row.tpot_ms = p.metrics->tpot_mean * 1e3;
      row.latency_s = p.metrics->latency;
      row.throughput_tps = p.metrics->throughput;
      row.fits = p.metrics->memory.fits;
      row.prefill_bound = p.metrics->prefill_breakdown.bound();
      row.decode_bound = p.metrics->decode_breakdown.bound();
    } else {
      row.ttft_s = row.tpot_ms = row.latency_s = row.throughput_tps = std::nan("");
      row.prefill_bound = row.decode_bound = "error";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << kSweepCsvHeader << "\n";
  for (const auto& row : sweep_rows(r)) {
    os << row.axis << ',' << format_double(row.ttft_s) << ',' << format_double(row.tpot_ms)
       << ',' << format_double(row.latency_s) << ',' << format_double(row.throughput_tps) << ','
       << (row.fits ? "true" : "false") << ',' << row.prefill_bound << ',' << row.decode_bound
       << "\n";
  }
  return os.str();
}

inline std::vector<SweepRow> parse_sweep_csv(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != kSweepCsvHeader) {
    throw ValidationError("csv", "unexpected sweep CSV header");
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 8) throw ValidationError("csv", "row " + std::to_string(i) + ": expected 8 fields");
    auto num = [&](const std::string& s) {
      return s == "nan" ? std::nan("") : parse_double(s, "csv");
    };
    rows.push_back({f[0], num(f[1]), num(f[2]), num(f[3]), num(f[4]), f[5] == "true", f[6], f[7]});
  }
  return rows;
}

struct RequirementRow {
  std::uint64_t context_tokens = 0;
  double bw_TBps = 0;
  double capacity_TB = 0;
  double bw_stacks = 0;
  double capacity_stacks = 0;
  double weights_TB = 0;
  double kv_TB = 0;

  bool operator==(const RequirementRow&) const = default;
};

inline RequirementRow requirement_row(const RequirementReport& r) {
  return {r.context_tokens,
          r.bandwidth_required / 1e12,
          r.capacity_bytes / 1e12,
          r.bw_stacks,
          r.capacity_stacks,
          r.per_component.weights / 1e12,
          r.per_component.kv / 1e12};
}

inline std::string requirement_csv(const std::vector<RequirementReport>& reports) {
  std::ostringstream os;
  os << kRequirementCsvHeader << "\n";
  for (const auto& r : reports) {
    const auto row = requirement_row(r);
    os << row.context_tokens << ',' << format_double(row.bw_TBps) << ','
       << format_double(row.capacity_TB) << ',' << format_double(row.bw_stacks) << ','
       << format_double(row.capacity_stacks) << ',' << format_double(row.weights_TB) << ','
       << format_double(row.kv_TB) << "\n";
  }
  return os.str();
}

inline std::vector<RequirementRow> parse_requirement_csv(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != kRequirementCsvHeader) {
    throw ValidationError("csv", "unexpected requirement CSV header");
  }
  std::vector<RequirementRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 7) throw ValidationError("csv", "row " + std::to_string(i) + ": expected 7 fields");
    RequirementRow row;
    row.context_tokens = static_cast<std::uint64_t>(parse_double(f[0], "csv"));
    row.bw_TBps = parse_double(f[1], "csv");
    row.capacity_TB = parse_double(f[2], "csv");
    row.bw_stacks = parse_double(f[3], "csv");
    row.capacity_stacks = parse_double(f[4], "csv");
    row.weights_TB = parse_double(f[5], "csv");
    row.kv_TB = parse_double(f[6], "csv");
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Markdown
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}
}  // namespace detail

inline std::string breakdown_table(const InferenceMetrics& m) {
  std::ostringstream os;
  os << "| stage | gemm (s) | attention (s) | collective (s) | handoff (s) | total (s) | bound |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto* b : {&m.prefill_breakdown, &m.decode_breakdown}) {
    os << "| " << to_string(b->stage) << " | " << detail::fixed(b->gemm_time, 6) << " | "
       << detail::fixed(b->attention_time, 6) << " | " << detail::fixed(b->collective_time, 6)
       << " | " << detail::fixed(b->pipeline_handoff_time, 6) << " | "
       << detail::fixed(b->total, 6) << " | " << b->bound() << " |\n";
  }
  return os.str();
}

inline std::string analyze_markdown(const Workload& w, const PlatformSpec& p,
                                    const InferenceMetrics& m) {
  std::ostringstream os;
  os << "# " << w.model.name << " / " << w.use_case.name << " on " << p.name << " x" << p.n_npus
     << "\n\n"
     << "batch " << w.batch << ", beams " << w.use_case.beam_size << ", " << w.precision.name
     << ", tp " << w.parallelism.tp << ", pp " << w.parallelism.pp << "\n\n"
     << "| metric | value |\n|---|---|\n"
     << "| TTFT (s) | " << detail::fixed(m.ttft, 6) << " |\n"
     << "| TPOT mean (ms) | " << detail::fixed(m.tpot_mean * 1e3, 4) << " |\n"
     << "| TPOT first/last (ms) | " << detail::fixed(m.tpot_first * 1e3, 4) << " / "
     << detail::fixed(m.tpot_last * 1e3, 4) << " |\n"
     << "| latency (s) | " << detail::fixed(m.latency, 4) << " |\n"
     << "| throughput (tokens/s) | " << detail::fixed(m.throughput, 2) << " |\n"
     << "| per-NPU memory (GB) | " << detail::fixed(m.memory.per_npu_required / 1e9, 3) << " of "
     << detail::fixed(m.memory.per_npu_fast / 1e9, 3) << " |\n"
     << "| offloaded (GB) | " << detail::fixed(m.memory.offloaded / 1e9, 3) << " |\n"
     << "| meets TTFT / TPOT SLO | " << (m.meets_ttft_slo ? "yes" : "no") << " / "
     << (m.meets_tpot_slo ? "yes" : "no") << " |\n\n"
     << "## Runtime breakdown\n\n"
     << breakdown_table(m);
  return os.str();
}

inline std::string sweep_markdown(const SweepResult& r) {
  std::ostringstream os;
  os << "# Sweep over " << r.axis << "\n\n"
     << "| " << r.axis << " | TTFT (s) | TPOT (ms) | latency (s) | throughput (tok/s) | fits | "
        "prefill bound | decode bound |\n"
     << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& row : sweep_rows(r)) {
    os << "| " << row.axis << " | " << detail::fixed(row.ttft_s, 6) << " | "
       << detail::fixed(row.tpot_ms, 4) << " | " << detail::fixed(row.latency_s, 4) << " | "
       << detail::fixed(row.throughput_tps, 2) << " | " << (row.fits ? "yes" : "no") << " | "
       << row.prefill_bound << " | " << row.decode_bound << " |\n";
  }
  auto note = [&](const char* what, const std::optional<std::size_t>& idx) {
    if (idx) os << "\n" << what << ": " << axis_label(r.points[*idx]);
  };
  note("saturation", r.saturation);
  note("first offload/OOM point", r.oom_boundary);
  note("best prefill", r.best_prefill);
  note("best decode", r.best_decode);
  os << "\n";
  return os.str();
}

inline std::string requirement_markdown(const std::vector<RequirementReport>& reports) {
  std::ostringstream os;
  os << "| context | bandwidth (TB/s) | capacity (TB) | HBM3e stacks (bw) | HBM3e stacks (cap) | "
        "weights (TB) | KV (TB) | compute (PFLOP/s) |\n"
     << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    os << "| " << r.context_tokens << " | " << detail::fixed(r.bandwidth_required / 1e12, 3)
       << " | " << detail::fixed(r.capacity_bytes / 1e12, 3) << " | "
       << detail::fixed(r.bw_stacks, 1) << " | " << detail::fixed(r.capacity_stacks, 1) << " | "
       << detail::fixed(r.per_component.weights / 1e12, 3) << " | "
       << detail::fixed(r.per_component.kv / 1e12, 3) << " | "
       << (r.flops_required ? detail::fixed(*r.flops_required / 1e15, 3) : std::string("-"))
       << " |\n";
  }
  return os.str();
}

}  // namespace genza::report
