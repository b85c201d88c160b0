// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Targets and tolerances are fixed here and must not be loosened to turn a line green.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "genza/genza.hpp"
#include "oracle/loop_nest.hpp"

using namespace genza;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

bool within_rel(double v, double target, double rel) { return std::abs(v / target - 1.0) <= rel; }

void check(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [miss]");
}

// 1 -------------------------------------------------------------------------
Outcome moe_params() {
  Outcome o;
  const auto p = count_params(load_model_config("gpt4-1.8t"));
  const double active = static_cast<double>(p.active_per_token);
  const double attn = static_cast<double>(p.attention);
  check(o, active >= 2.5e11 && active <= 3.1e11, "active " + num(active) + " in [2.5e11, 3.1e11]");
  check(o, within_rel(attn, 5.5e10, 0.10), "attention " + num(attn) + " vs 5.5e10 +-10%");
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome flops_per_param() {
  Outcome o;
  for (const auto& m : builtin_models()) {
    const auto g = build_decode_graph(m, 1, 0, Precision::int8());
    const double ratio = g.total_flops() / static_cast<double>(count_params(m).active_per_token);
    check(o, ratio >= 1.9 && ratio <= 2.1, m.name + " " + num(ratio));
  }
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome oracle_equivalence() {
  const std::uint64_t vals[] = {1, 2, 3, 5, 8};
  std::uint64_t cases = 0, mismatches = 0, pick = 0;
  std::string first_bad;
  for (auto rows : vals)
    for (auto seq : vals)
      for (auto heads : vals)
        for (auto hd : vals)
          for (auto ff : vals)
            for (auto kvh : vals) {
              if (heads % kvh != 0) continue;
              // MoE shape and gating rotate through every legal combination.
              const std::uint64_t e = vals[pick % 5];
              const std::uint64_t k = vals[(pick / 5) % 5] > e ? e : vals[(pick / 5) % 5];
              const bool gated = (pick / 25) % 2 == 0;
              ++pick;
              ModelConfig m{"probe", heads * hd, 1, heads, kvh,
                            static_cast<double>(ff) / static_cast<double>(heads * hd), e, k, gated};
              for (int stage = 0; stage < 2; ++stage) {
                const bool prefill = stage == 0;
                const auto g = prefill ? build_prefill_graph(m, rows, seq, Precision::fp16())
                                       : build_decode_graph(m, rows, seq, Precision::fp16());
                oracle::LayerDims L{rows, prefill ? seq : 1, prefill ? seq : seq + 1, heads, kvh,
                                    hd, ff, e, k, gated};
                const auto macs = oracle::layer_macs(L);
                ++cases;
                bool ok = macs.size() == g.per_layer_ops.size();
                for (const auto& op : g.per_layer_ops) {
                  auto it = macs.find(op.name());
                  ok = ok && it != macs.end() && op.flops == 2.0 * static_cast<double>(it->second);
                }
                if (!ok) {
                  ++mismatches;
                  if (first_bad.empty()) {
                    first_bad = "rows=" + std::to_string(rows) + " seq=" + std::to_string(seq) +
                                " H=" + std::to_string(heads) + " d=" + std::to_string(hd);
                  }
                }
              }
            }
  Outcome o;
  check(o, mismatches == 0,
        std::to_string(cases) + " shapes, " + std::to_string(mismatches) + " mismatches" +
            (first_bad.empty() ? "" : " (first " + first_bad + ")"));
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome kv_ratio() {
  Outcome o;
  const std::pair<const char*, double> targets[] = {{"llama2-7b", 0.82},
                                                    {"mixtral-8x7b", 0.11},
                                                    {"llama3-70b", 0.20},
                                                    {"gpt3-175b", 0.27},
                                                    {"gpt4-1.8t", 0.028}};
  for (const auto& [name, target] : targets) {
    const auto w = make_workload(find_use_case("codegen"), load_model_config(name), 1);
    const auto c = required_capacity(w);
    const double ratio = c.kv / c.active_weights;
    check(o, within_rel(ratio, target, 0.30),
          std::string(name) + " " + num(ratio, 3) + " vs " + num(target, 3));
  }
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome batching_study() {
  Outcome o;
  const UseCase uc{"batching", 2000, 200, 1, 1.0, 1.0};
  const auto w = make_workload(uc, load_model_config("llama2-7b"), 1);
  std::vector<std::uint64_t> batches;
  for (std::uint64_t b = 1; b <= 64; ++b) batches.push_back(b);
  const auto r = batch_sweep(w, platforms::a100_80gb(1), batches);
  const auto& b1 = *r.points[0].metrics;
  const auto& b44 = *r.points[43].metrics;
  const double thr = b44.throughput / b1.throughput;
  const double tpot = b44.tpot_mean / b1.tpot_mean;
  check(o, within_rel(thr, 10.9, 0.20), "throughput x" + num(thr, 3) + " vs 10.9");
  check(o, within_rel(tpot, 1.83, 0.20), "TPOT x" + num(tpot, 3) + " vs 1.83");
  const double sat = r.saturation ? r.points[*r.saturation].value : -1;
  check(o, r.saturation && std::abs(sat - 38) <= 8, "saturation B=" + num(sat) + " vs 38");
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome collective_counts() {
  Outcome o;
  const auto m = load_model_config("gpt3-175b");
  const auto platform = platforms::reference_npu(8);
  const auto g = build_prefill_graph(m, 1, 1000, Precision::int8());
  const auto tp8 = make_workload(find_use_case("qa"), m, 1, Precision::int8(), {8, 1});
  const auto pp8 = make_workload(find_use_case("qa"), m, 1, Precision::int8(), {1, 8});
  const auto a = shard_workload(g, m, tp8, platform);
  const auto b = shard_workload(g, m, pp8, platform);
  check(o, a.allreduce_count == 192, "tp8 all-reduces " + std::to_string(a.allreduce_count));
  check(o, b.p2p_count == 7, "pp8 handoffs " + std::to_string(b.p2p_count));
  check(o, a.p2p_count == 0 && b.allreduce_count == 0, "no cross terms");
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome characteristic_sweeps() {
  Outcome o;
  const auto mix = load_model_config("mixtral-8x7b");

  const auto rag = make_workload(find_use_case("qa-rag"), mix, 1, Precision::int8(), {2, 1});
  auto s = characteristic_sweep(rag, platforms::reference_npu(2), PlatformAxis::flops, {1, 12});
  const auto& f1 = *s.points[0].metrics;
  const auto& f12 = *s.points[1].metrics;
  const double ttft_x = f1.ttft / f12.ttft;
  check(o, within_rel(ttft_x, 4.33, 0.25), "flops x12 TTFT /" + num(ttft_x, 3) + " vs 4.33");
  check(o, f1.tpot_mean == f12.tpot_mean, "flops x12 decode unchanged");

  const auto sum = make_workload(find_use_case("summarization"), mix, 1, Precision::int8(), {2, 1});
  s = characteristic_sweep(sum, platforms::reference_npu(2), PlatformAxis::mem_bw, {1, 8});
  const auto& m1 = *s.points[0].metrics;
  const auto& m8 = *s.points[1].metrics;
  const double tpot_x = m1.tpot_mean / m8.tpot_mean;
  check(o, within_rel(tpot_x, 4.21, 0.25), "mem_bw x8 TPOT /" + num(tpot_x, 3) + " vs 4.21");
  check(o, m1.ttft == m8.ttft, "mem_bw x8 prefill unchanged");

  const auto code = make_workload(find_use_case("codegen"), load_model_config("gpt3-175b"), 1,
                                  Precision::int8(), {12, 2});
  s = characteristic_sweep(code, platforms::reference_npu(24), PlatformAxis::link_latency,
                           {0.1 / 2.0, 1});
  const double lat_x = s.points[1].metrics->tpot_mean / s.points[0].metrics->tpot_mean;
  check(o, within_rel(lat_x, 1.8, 0.30), "link 2->0.1us decode /" + num(lat_x, 3) + " vs 1.8");
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome requirement_ratios() {
  Outcome o;
  const auto qa = find_use_case("qa");
  const auto rag = find_use_case("qa-rag");
  for (const auto& m : builtin_models()) {
    if (m.is_moe()) continue;
    const auto a = make_workload(qa, m, 1);
    const auto b = make_workload(rag, m, 1);
    const double x = required_flops(b, rag.ttft_slo) / required_flops(a, qa.ttft_slo);
    check(o, within_rel(x, 5.41, 0.05), m.name + " FLOP/s x" + num(x, 3) + " vs 5.41");
  }
  const auto g4 = load_model_config("gpt4-1.8t");
  const double bw = required_bandwidth(make_workload(rag, g4, 1), rag.tpot_slo) /
                    required_bandwidth(make_workload(qa, g4, 1), qa.tpot_slo);
  check(o, std::abs(bw - 1.08) <= 0.04, "gpt4-1.8t bandwidth x" + num(bw, 4) + " vs 1.08");
  return o;
}

// 9 -------------------------------------------------------------------------
Outcome extreme_scale() {
  Outcome o;
  const auto r = extreme_scale_curve(load_model_config("super-llm-10t"), {2000000}).front();
  check(o, within_rel(r.bandwidth_required, 40e12, 0.30),
        "bandwidth " + num(r.bandwidth_required / 1e12, 3) + " TB/s vs 40");
  check(o, within_rel(r.bw_stacks, 32, 0.30), num(r.bw_stacks, 3) + " stacks vs 32");
  check(o, within_rel(r.capacity_bytes, 15e12, 0.30),
        "capacity " + num(r.capacity_bytes / 1e12, 3) + " TB vs 15");
  check(o, within_rel(r.capacity_stacks, 400, 0.30), num(r.capacity_stacks, 3) + " stacks vs 400");
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome identities() {
  std::mt19937_64 rng(20241015);
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  const auto& models = builtin_models();
  const char* precisions[] = {"fp16", "fp8", "int8", "int4"};
  std::uint64_t checked = 0;
  std::map<std::string, std::uint64_t> violations;
  std::map<std::string, std::string> witness;
  auto expect = [&](bool ok, const std::string& what, const std::string& where) {
    if (ok) return;
    if (violations[what]++ == 0) witness[what] = where;
  };
  const double tol = 1e-12;
  auto close = [&](double a, double b) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
  };

  for (int i = 0; i < 1000; ++i) {
    const auto& m = models[pick(0, models.size() - 2)];
    UseCase uc{"rand", pick(1, 4096), pick(1, 512), pick(1, 4), 1.0, 1.0};
    const auto prec = Precision::from_name(precisions[pick(0, 3)]);
    const std::uint64_t batch = pick(1, 32);
    std::uint64_t tp = 1, pp = 1;
    if (i % 2) {
      tp = std::uint64_t{1} << pick(0, 3);
      while (m.n_heads % tp) tp /= 2;
      pp = pick(1, 4);
    }
    const auto w = make_workload(uc, m, batch, prec, {tp, pp});
    auto platform = platforms::h100_hgx8();
    platform.n_npus = 32;
    platform.npu.slow_mem.capacity = 1e15;
    const auto met = analyze(w, platform);
    const std::string where = "#" + std::to_string(i) + " " + m.name + " B=" +
                              std::to_string(batch) + " tp" + std::to_string(tp) + "xpp" +
                              std::to_string(pp) + " resident " +
                              num(met.memory.resident_fraction, 4);
    expect(close(met.latency, met.ttft + met.tpot_mean * static_cast<double>(uc.output_tokens)),
           "latency = ttft + tpot*out", where);
    expect(met.throughput == static_cast<double>(batch) / met.tpot_mean, "throughput = B/tpot",
           where);

    // tp = pp = 1 reduces to the single-NPU roofline sum.
    const auto g = build_prefill_graph(m, batch, uc.input_tokens, prec);
    const auto single = make_workload(uc, m, batch, prec);
    const auto plan = shard_workload(g, m, single, platform);
    const auto off = OffloadPlan::all_resident();
    expect(model_time(plan, platform, off).total ==
               graph_time(g, platform.npu, off) * static_cast<double>(m.n_layers),
           "1x1 platform = single NPU", where);

    // Requirement x SLO is invariant in the SLO.
    const double s1 = 0.01 * static_cast<double>(pick(1, 100));
    const double s2 = 0.01 * static_cast<double>(pick(1, 100));
    expect(close(required_bandwidth(w, s1) * s1, required_bandwidth(w, s2) * s2), "bw*slo",
           where);
    expect(close(required_flops(w, s1) * s1, required_flops(w, s2) * s2), "flops*slo", where);

    expect(allreduce_time(static_cast<double>(pick(1, 1u << 30)), 1, platform.icn) == 0.0,
           "all-reduce N=1", where);

    // Every cost grows with batch, prompt and output length.
    auto bigger = w;
    bigger.batch += 1;
    bigger.use_case.input_tokens += 1;
    bigger.use_case.output_tokens += 1;
    const auto g2 = build_prefill_graph(m, batch + 1, uc.input_tokens + 1, prec);
    const auto d1 = build_decode_graph(m, batch, uc.input_tokens, prec);
    const auto d2 = build_decode_graph(m, batch + 1, uc.input_tokens + 1, prec);
    bool ops_grow = g.per_layer_ops.size() == g2.per_layer_ops.size();
    for (std::size_t k = 0; ops_grow && k < g.per_layer_ops.size(); ++k) {
      ops_grow = g2.per_layer_ops[k].flops >= g.per_layer_ops[k].flops &&
                 g2.per_layer_ops[k].memory_bytes() >= g.per_layer_ops[k].memory_bytes() &&
                 d2.per_layer_ops[k].flops >= d1.per_layer_ops[k].flops &&
                 d2.per_layer_ops[k].memory_bytes() >= d1.per_layer_ops[k].memory_bytes();
    }
    expect(ops_grow, "operator FLOPs/bytes monotone", where);
    expect(required_capacity(bigger).total >= required_capacity(w).total &&
               required_bandwidth(bigger, 1.0) >= required_bandwidth(w, 1.0) &&
               required_flops(bigger, 1.0) >= required_flops(w, 1.0),
           "requirements monotone", where);
    const auto met2 = analyze(bigger, platform);
    expect(met2.memory.per_npu_required >= met.memory.per_npu_required, "memory monotone", where);
    expect(met2.ttft >= met.ttft && met2.tpot_mean >= met.tpot_mean && met2.latency >= met.latency,
           "times monotone", where + " -> " + num(met2.memory.resident_fraction, 4) + ", TPOT " +
                                 num(met.tpot_mean * 1e3, 5) + " -> " +
                                 num(met2.tpot_mean * 1e3, 5) + " ms");
    ++checked;
  }
  Outcome o;
  std::string detail = std::to_string(checked) + " workloads";
  for (const auto& [what, count] : violations) {
    detail += ", '" + what + "' violated " + std::to_string(count) + "x (first " + witness[what] + ")";
  }
  check(o, violations.empty(), detail);
  return o;
}

// 11 ------------------------------------------------------------------------
Outcome offload_cliff() {
  Outcome o;
  const UseCase uc{"offload", 8000, 256, 4, 1.0, 1.0};
  const auto w = make_workload(uc, load_model_config("llama3-70b"), 1, Precision::int8(), {2, 1});
  std::vector<std::uint64_t> batches;
  for (std::uint64_t b = 1; b <= 32; ++b) batches.push_back(b);
  const auto r = batch_sweep(w, platforms::a100_40gb(2), batches);
  if (!r.oom_boundary || *r.oom_boundary == 0) {
    check(o, false, "no fitting-to-offloading transition in B=1..32");
    return o;
  }
  const auto& fit = r.points[*r.oom_boundary - 1];
  const auto& spill = r.points[*r.oom_boundary];
  if (!spill.metrics) {
    check(o, false, "B=" + num(spill.value) + " fails outright: " + spill.error);
    return o;
  }
  const double x = spill.metrics->latency / fit.metrics->latency;
  check(o, x > 10.0,
        "B=" + num(fit.value) + " -> B=" + num(spill.value) + " latency x" + num(x, 3) + " vs > 10");
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "MoE parameter accounting", 1, moe_params},
      {2, "FLOP/parameter consistency", 1, flops_per_param},
      {3, "Oracle equivalence", 60, oracle_equivalence},
      {4, "KV-ratio table", 1, kv_ratio},
      {5, "Batching study", 10, batching_study},
      {6, "Collective asymmetry", 1, collective_counts},
      {7, "Characteristic-scaling signs", 30, characteristic_sweeps},
      {8, "Requirement ratios", 5, requirement_ratios},
      {9, "Extreme scale", 5, extreme_scale},
      {10, "Exact identities", 60, identities},
      {11, "Offload cliff", 10, offload_cliff},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt <= c.budget_s;
    if (!in_time) out.detail += "; runtime over " + num(c.budget_s) + " s budget";
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("%s [%2d] %s: %s (%.2f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), dt);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
