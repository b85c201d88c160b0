#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "genza/analyzer.hpp"
#include "genza/error.hpp"
#include "genza/model_catalog.hpp"
#include "genza/platform_collectives.hpp"
#include "genza/report.hpp"
#include "genza/requirements.hpp"
#include "genza/workload.hpp"

namespace genza::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kModel = 2 };

/// Everything a single command invocation needs, straight from the flags.
struct RunConfig {
  std::string command;

  std::string model;
  std::string usecase = "qa";
  std::string platform = "a100-80gb";
  std::optional<std::uint64_t> npus;
  std::uint64_t batch = 1;
  std::string precision = "int8";
  std::uint64_t tp = 1, pp = 1, ep = 1, sp = 1;

  std::optional<std::uint64_t> input_tokens;
  std::optional<std::uint64_t> output_tokens;
  std::optional<std::uint64_t> beams;
  std::optional<double> ttft_slo;
  std::optional<double> tpot_slo;
  std::optional<double> compute_eff;
  std::optional<double> mem_eff;
  std::optional<double> link_eff;

  std::optional<std::string> output_dir;
  std::string formats = "json";

  std::string batches = "1:64:step1";
  double saturation_gain = kDefaultSaturationGain;
  std::string axis = "flops";
  std::string multipliers = "1,2,4,8";
  std::string contexts = "1000:2000000:log32";
  std::uint64_t decode_tokens = 2000;
  double words_per_minute = 300;
  double tokens_per_word = 1;
};

/// Rendered output keyed by file extension, in emission order.
using Rendered = std::vector<std::pair<std::string, std::string>>;

inline std::vector<std::string> parse_formats(const std::string& spec) {
  std::vector<std::string> out;
  for (const auto& f : report::split(spec, ',')) {
    if (f != "csv" && f != "json" && f != "md") {
      throw ValidationError("format", "unknown format '" + f + "' (expected csv, json or md)");
    }
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  if (out.empty()) throw ValidationError("format", "at least one format is required");
  return out;
}

inline UseCase resolve_use_case(const RunConfig& c) {
  UseCase u = find_use_case(c.usecase);
  if (c.input_tokens) u.input_tokens = *c.input_tokens;
  if (c.output_tokens) u.output_tokens = *c.output_tokens;
  if (c.beams) u.beam_size = *c.beams;
  if (c.ttft_slo) u.ttft_slo = *c.ttft_slo;
  if (c.tpot_slo) u.tpot_slo = *c.tpot_slo;
  u.validate();
  return u;
}

inline Workload resolve_workload(const RunConfig& c) {
  if (c.model.empty()) throw ValidationError("model", "--model is required");
  return make_workload(resolve_use_case(c), load_model_config(c.model), c.batch,
                       Precision::from_name(c.precision), {c.tp, c.pp, c.ep, c.sp});
}

inline bool is_builtin_platform(const std::string& source) {
  for (const auto& p : platforms::builtin()) {
    if (p.name == source) return true;
  }
  return false;
}

/// Built-in platforms default to just enough NPUs for the requested tp x pp.
inline PlatformSpec resolve_platform(const RunConfig& c) {
  PlatformSpec p = load_platform(c.platform);
  if (c.npus) {
    p.n_npus = *c.npus;
  } else if (is_builtin_platform(c.platform)) {
    p.n_npus = c.tp * c.pp;
  }
  if (c.compute_eff) p.npu.compute_eff = *c.compute_eff;
  if (c.mem_eff) p.npu.fast_mem.efficiency = *c.mem_eff;
  if (c.link_eff) p.icn.link_efficiency = *c.link_eff;
  p.validate();
  return p;
}

namespace detail {

inline Rendered render_sweep(const SweepResult& r, const std::vector<std::string>& formats) {
  Rendered out;
  for (const auto& f : formats) {
    if (f == "csv") out.emplace_back(f, report::sweep_csv(r));
    if (f == "json") out.emplace_back(f, report::json_document("sweep", report::to_json(r)));
    if (f == "md") out.emplace_back(f, report::sweep_markdown(r));
  }
  return out;
}

inline Rendered render_requirements(const std::vector<RequirementReport>& rs,
                                    const std::vector<std::string>& formats,
                                    const std::string& kind, nlohmann::json context) {
  Rendered out;
  for (const auto& f : formats) {
    if (f == "csv") out.emplace_back(f, report::requirement_csv(rs));
    if (f == "json") {
      nlohmann::json points = nlohmann::json::array();
      for (const auto& r : rs) points.push_back(report::to_json(r));
      context["reports"] = std::move(points);
      out.emplace_back(f, report::json_document(kind, context));
    }
    if (f == "md") out.emplace_back(f, report::requirement_markdown(rs));
  }
  return out;
}

inline Rendered cmd_analyze(const RunConfig& c, const std::vector<std::string>& formats) {
  const auto w = resolve_workload(c);
  const auto p = resolve_platform(c);
  const auto m = analyze(w, p);
  Rendered out;
  for (const auto& f : formats) {
    if (f == "csv") {
      SweepResult one;
      one.axis = "batch";
      SweepPoint pt;
      pt.value = static_cast<double>(w.batch);
      pt.parallelism = w.parallelism;
      pt.metrics = m;
      one.points.push_back(pt);
      out.emplace_back(f, report::sweep_csv(one));
    }
    if (f == "json") {
      out.emplace_back(f, report::json_document(
                              "analyze", {{"workload", report::to_json(w)},
                                          {"platform", to_json(p)},
                                          {"metrics", report::to_json(m)}}));
    }
    if (f == "md") out.emplace_back(f, report::analyze_markdown(w, p, m));
  }
  return out;
}

inline Rendered cmd_sweep_batch(const RunConfig& c, const std::vector<std::string>& formats) {
  const auto w = resolve_workload(c);
  const auto p = resolve_platform(c);
  const auto batches = report::parse_count_range(c.batches, "batches", 1);
  if (!(c.saturation_gain > 0)) throw ValidationError("saturation_gain", "must be > 0");
  return render_sweep(batch_sweep(w, p, batches, c.saturation_gain), formats);
}

inline Rendered cmd_compare(const RunConfig& c, const std::vector<std::string>& formats) {
  const auto w = resolve_workload(c);
  const auto p = resolve_platform(c);
  return render_sweep(parallelism_compare(w, p), formats);
}

inline Rendered cmd_characteristic(const RunConfig& c, const std::vector<std::string>& formats) {
  const auto axis = platform_axis_from_name(c.axis);
  const auto w = resolve_workload(c);
  const auto p = resolve_platform(c);
  const auto mult = report::parse_range(c.multipliers, "multipliers");
  return render_sweep(characteristic_sweep(w, p, axis, mult), formats);
}

inline Rendered cmd_require(const RunConfig& c, const std::vector<std::string>& formats) {
  const auto w = resolve_workload(c);
  const double eff = c.compute_eff.value_or(kDefaultComputeEfficiency);
  const auto r = make_requirement_report(w, w.use_case.tpot_slo, w.use_case.ttft_slo, eff);
  return render_requirements({r}, formats, "require",
                             {{"workload", report::to_json(w)}, {"compute_eff", eff}});
}

inline Rendered cmd_extreme(const RunConfig& c, const std::vector<std::string>& formats) {
  const auto model = load_model_config(c.model.empty() ? "super-llm-10t" : c.model);
  AssistantScenario s;
  s.decode_tokens = c.decode_tokens;
  s.beams = c.beams.value_or(s.beams);
  s.batch = c.batch;
  s.precision = Precision::from_name(c.precision);
  s.tpot_slo = c.tpot_slo.value_or(reading_rate_tpot(c.words_per_minute, c.tokens_per_word));
  const auto contexts = report::parse_count_range(c.contexts, "contexts", 0);
  const auto curve = extreme_scale_curve(model, contexts, s);
  return render_requirements(curve, formats, "extreme-scale",
                             {{"model", to_json(model)},
                              {"scenario",
                               {{"decode_tokens", s.decode_tokens},
                                {"beams", s.beams},
                                {"batch", s.batch},
                                {"tpot_slo", s.tpot_slo},
                                {"precision", s.precision.name}}}});
}

inline Rendered cmd_list_models(const std::vector<std::string>& formats) {
  Rendered out;
  for (const auto& f : formats) {
    std::ostringstream os;
    if (f == "csv") {
      os << "name,d_model,n_layers,n_heads,kv_heads,ff_ratio,n_experts,experts_per_token,"
            "mlp_gated,params_total,params_active\n";
      for (const auto& m : builtin_models()) {
        const auto pc = count_params(m);
        os << m.name << ',' << m.d_model << ',' << m.n_layers << ',' << m.n_heads << ','
           << m.kv_heads << ',' << report::format_double(m.ff_ratio) << ',' << m.n_experts << ','
           << m.experts_per_token << ',' << (m.mlp_gated ? "true" : "false") << ',' << pc.total
           << ',' << pc.active_per_token << "\n";
      }
      out.emplace_back(f, os.str());
    }
    if (f == "json") {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& m : builtin_models()) arr.push_back(to_json(m));
      out.emplace_back(f, report::json_document("models", arr));
    }
    if (f == "md") {
      os << "| name | d_model | layers | heads | kv heads | experts | params (B) | active (B) |\n"
         << "|---|---|---|---|---|---|---|---|\n";
      for (const auto& m : builtin_models()) {
        const auto pc = count_params(m);
        os << "| " << m.name << " | " << m.d_model << " | " << m.n_layers << " | " << m.n_heads
           << " | " << m.kv_heads << " | " << m.experts_per_token << "/" << m.n_experts << " | "
           << report::detail::fixed(static_cast<double>(pc.total) / 1e9, 1) << " | "
           << report::detail::fixed(static_cast<double>(pc.active_per_token) / 1e9, 1) << " |\n";
      }
      out.emplace_back(f, os.str());
    }
  }
  return out;
}

inline Rendered cmd_list_usecases(const std::vector<std::string>& formats) {
  Rendered out;
  for (const auto& f : formats) {
    std::ostringstream os;
    if (f == "csv") {
      os << "name,input_tokens,output_tokens,beam_size,ttft_slo,tpot_slo\n";
      for (const auto& u : builtin_use_cases()) {
        os << u.name << ',' << u.input_tokens << ',' << u.output_tokens << ',' << u.beam_size
           << ',' << report::format_double(u.ttft_slo) << ','
           << report::format_double(u.tpot_slo) << "\n";
      }
      out.emplace_back(f, os.str());
    }
    if (f == "json") {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& u : builtin_use_cases()) arr.push_back(to_json(u));
      out.emplace_back(f, report::json_document("use_cases", arr));
    }
    if (f == "md") {
      os << "| name | prompt | output | beams | TTFT SLO (s) | TPOT SLO (ms) |\n"
         << "|---|---|---|---|---|---|\n";
      for (const auto& u : builtin_use_cases()) {
        os << "| " << u.name << " | " << u.input_tokens << " | " << u.output_tokens << " | "
           << u.beam_size << " | " << report::format_double(u.ttft_slo) << " | "
           << report::format_double(u.tpot_slo * 1e3) << " |\n";
      }
      out.emplace_back(f, os.str());
    }
  }
  return out;
}

}  // namespace detail

/// Runs the analysis for `c` and renders every requested format in memory.
inline Rendered execute(const RunConfig& c) {
  const auto formats = parse_formats(c.formats);
  if (c.command == "analyze") return detail::cmd_analyze(c, formats);
  if (c.command == "sweep-batch") return detail::cmd_sweep_batch(c, formats);
  if (c.command == "compare-parallelism") return detail::cmd_compare(c, formats);
  if (c.command == "sweep-characteristic") return detail::cmd_characteristic(c, formats);
  if (c.command == "require") return detail::cmd_require(c, formats);
  if (c.command == "extreme-scale") return detail::cmd_extreme(c, formats);
  if (c.command == "list-models") return detail::cmd_list_models(formats);
  if (c.command == "list-usecases") return detail::cmd_list_usecases(formats);
  throw ValidationError("command", "unknown command '" + c.command + "'");
}

/// Writes `<dir>/<command>.<ext>` for every rendered format. Each file goes to a
/// temporary name first so a failed write leaves no partial file behind.
inline std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir,
                                                        const std::string& command,
                                                        const Rendered& rendered) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ValidationError("output", "cannot create directory '" + dir.string() + "'");
  }
  std::vector<fs::path> written;
  for (const auto& [ext, body] : rendered) {
    const fs::path target = dir / (command + "." + ext);
    const fs::path tmp = dir / ("." + command + "." + ext + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary);
      os << body;
      if (!os) {
        fs::remove(tmp, ec);
        throw ValidationError("output", "cannot write '" + target.string() + "'");
      }
    }
    fs::rename(tmp, target, ec);
    if (ec) {
      fs::remove(tmp, ec);
      throw ValidationError("output", "cannot write '" + target.string() + "'");
    }
    written.push_back(target);
  }
  return written;
}

/// One-line JSON diagnostic.
inline std::string error_line(const std::string& kind, const std::string& field,
                              const std::string& message) {
  return nlohmann::json{{"error", kind}, {"field", field}, {"message", message}}.dump();
}

namespace detail {

inline void add_workload_flags(CLI::App& app, RunConfig& c, bool model_required) {
  auto* m = app.add_option("--model", c.model, "built-in model name, JSON file, or name on GENZA_MODEL_PATH");
  if (model_required) m->required();
  app.add_option("--usecase", c.usecase, "QA, Chat, QA+RAG, Summarization or CodeGen")
      ->capture_default_str();
  app.add_option("--batch", c.batch, "requests per batch")->capture_default_str();
  app.add_option("--precision", c.precision, "fp16, fp8, int8 or int4")->capture_default_str();
  app.add_option("--tp", c.tp, "tensor-parallel degree")->capture_default_str();
  app.add_option("--pp", c.pp, "pipeline-parallel degree")->capture_default_str();
  app.add_option("--ep", c.ep, "expert-parallel degree (only 1 is modeled)");
  app.add_option("--sp", c.sp, "sequence-parallel degree (only 1 is modeled)");
  app.add_option("--input-tokens", c.input_tokens, "override prompt length");
  app.add_option("--output-tokens", c.output_tokens, "override output length");
  app.add_option("--beams", c.beams, "override beam width");
  app.add_option("--ttft-slo", c.ttft_slo, "override TTFT target (s)");
  app.add_option("--tpot-slo", c.tpot_slo, "override TPOT target (s)");
}

inline void add_platform_flags(CLI::App& app, RunConfig& c) {
  std::string names;
  for (const auto& p : platforms::builtin()) names += (names.empty() ? "" : ", ") + p.name;
  app.add_option("--platform", c.platform, "platform JSON file or one of: " + names)
      ->capture_default_str();
  app.add_option("--npus", c.npus, "override NPU count");
  app.add_option("--compute-eff", c.compute_eff, "override compute efficiency");
  app.add_option("--mem-eff", c.mem_eff, "override fast-memory efficiency");
  app.add_option("--link-eff", c.link_eff, "override link efficiency");
}

inline void add_output_flags(CLI::App& app, RunConfig& c) {
  app.add_option("-o,--output", c.output_dir, "output directory (stdout when omitted)");
  app.add_option("--format", c.formats, "comma-separated subset of csv,json,md")
      ->capture_default_str();
}

}  // namespace detail

/// Parses `argv`, runs the command and writes its outputs. Returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Analytical LLM inference performance and requirements model", "genza"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  auto* analyze_cmd = app.add_subcommand("analyze", "TTFT, TPOT, latency, throughput and memory");
  auto* sweep_cmd = app.add_subcommand("sweep-batch", "static-batching sweep");
  auto* compare_cmd = app.add_subcommand("compare-parallelism", "every tp x pp split of the platform");
  auto* char_cmd = app.add_subcommand("sweep-characteristic", "scale one platform characteristic");
  auto* require_cmd = app.add_subcommand("require", "compute, bandwidth and capacity to meet the SLOs");
  auto* extreme_cmd = app.add_subcommand("extreme-scale", "requirements as the context grows");
  auto* models_cmd = app.add_subcommand("list-models", "built-in models");
  auto* usecases_cmd = app.add_subcommand("list-usecases", "built-in use cases");

  for (auto* sub : {analyze_cmd, sweep_cmd, compare_cmd, char_cmd}) {
    detail::add_workload_flags(*sub, c, true);
    detail::add_platform_flags(*sub, c);
  }
  detail::add_workload_flags(*require_cmd, c, true);
  require_cmd->add_option("--compute-eff", c.compute_eff, "compute efficiency assumed for FLOP/s");
  sweep_cmd->add_option("--batches", c.batches, "batch axis: a:b:stepK, a:b:logN or a list")
      ->capture_default_str();
  sweep_cmd->add_option("--saturation-gain", c.saturation_gain,
                        "marginal throughput gain per unit batch that counts as saturated")
      ->capture_default_str();
  char_cmd->add_option("--axis", c.axis, "flops, mem_bw, icn_bw or link_latency")
      ->capture_default_str();
  char_cmd->add_option("--multipliers", c.multipliers, "scale factors: list or range")
      ->capture_default_str();

  extreme_cmd->add_option("--model", c.model, "model (default super-llm-10t)");
  extreme_cmd->add_option("--contexts", c.contexts, "context axis: a:b:logN, a:b:stepK or a list")
      ->capture_default_str();
  extreme_cmd->add_option("--decode-tokens", c.decode_tokens, "tokens generated per request")
      ->capture_default_str();
  extreme_cmd->add_option("--beams", c.beams, "beam width (default 4)");
  extreme_cmd->add_option("--batch", c.batch, "requests")->capture_default_str();
  extreme_cmd->add_option("--precision", c.precision, "fp16, fp8, int8 or int4")
      ->capture_default_str();
  extreme_cmd->add_option("--tpot-slo", c.tpot_slo, "TPOT target (s), default from reading rate");
  extreme_cmd->add_option("--words-per-minute", c.words_per_minute, "reading rate")
      ->capture_default_str();
  extreme_cmd->add_option("--tokens-per-word", c.tokens_per_word, "tokens per word")
      ->capture_default_str();

  for (auto* sub : {analyze_cmd, sweep_cmd, compare_cmd, char_cmd, require_cmd, extreme_cmd,
                    models_cmd, usecases_cmd}) {
    detail::add_output_flags(*sub, c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", "argv", e.what()) << "\n";
    return kValidation;
  }
  c.command = app.get_subcommands().front()->get_name();

  try {
    const auto rendered = execute(c);
    if (c.output_dir) {
      write_outputs(*c.output_dir, c.command, rendered);
    } else {
      for (const auto& [ext, body] : rendered) out << body;
    }
  } catch (const ValidationError& e) {
    err << error_line("validation", e.field(), e.what()) << "\n";
    return kValidation;
  } catch (const ModelError& e) {
    err << error_line(e.kind(), "model", e.what()) << "\n";
    return kModel;
  }
  return kOk;
}

}  // namespace genza::cli
