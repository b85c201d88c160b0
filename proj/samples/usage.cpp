// Library walkthrough: analyze one deployment, sweep its batch size, then ask
// what hardware would be needed to serve it within its SLOs.

#include <cstdio>

#include "genza/genza.hpp"

int main() {
  using namespace genza;

  const auto model = load_model_config("llama3-70b");
  const auto chat = find_use_case("chat");
  const auto platform = platforms::h100_hgx8();

  // Tensor-parallel across all eight GPUs, four concurrent requests.
  const auto w = make_workload(chat, model, 4, Precision::int8(), {8, 1});
  const auto m = analyze(w, platform);
  std::printf("%s / %s on %s: TTFT %.3f s, TPOT %.2f ms, %.0f tokens/s, %s-bound decode\n",
              model.name.c_str(), chat.name.c_str(), platform.name.c_str(), m.ttft,
              m.tpot_mean * 1e3, m.throughput, m.decode_breakdown.bound().c_str());

  const auto sweep = batch_sweep(w, platform, {1, 2, 4, 8, 16, 32, 64, 128});
  std::printf("\n%s", report::sweep_markdown(sweep).c_str());

  const auto req = make_requirement_report(w, chat.tpot_slo, chat.ttft_slo);
  std::printf("\nTo meet %.0f ms TPOT: %.1f TB/s (%.1f HBM3e stacks), %.0f GB capacity, %.2f PFLOP/s\n",
              chat.tpot_slo * 1e3, req.bandwidth_required / 1e12, req.bw_stacks,
              req.capacity_bytes / 1e9, *req.flops_required / 1e15);
  return 0;
}
