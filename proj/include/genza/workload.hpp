#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genza/detail/checked.hpp"
#include "genza/detail/json_fields.hpp"
#include "genza/error.hpp"
#include "genza/model_catalog.hpp"

namespace genza {

/// A serving scenario: prompt/response sizes, beam width and latency targets.
struct UseCase {
  std::string name;
  std::uint64_t input_tokens = 1;
  std::uint64_t output_tokens = 1;
  std::uint64_t beam_size = 1;
  double ttft_slo = 1.0;  // s
  double tpot_slo = 1.0;  // s

  void validate() const {
    if (input_tokens < 1) throw ValidationError("use_case.input_tokens", "must be >= 1");
    if (output_tokens < 1) throw ValidationError("use_case.output_tokens", "must be >= 1");
    if (beam_size < 1) throw ValidationError("use_case.beam_size", "must be >= 1");
    if (!(ttft_slo > 0)) throw ValidationError("use_case.ttft_slo", "must be > 0");
    if (!(tpot_slo > 0)) throw ValidationError("use_case.tpot_slo", "must be > 0");
  }

  bool operator==(const UseCase&) const = default;
};

inline const std::vector<UseCase>& builtin_use_cases() {
  static const std::vector<UseCase> cases = {
      {"QA", 1000, 200, 4, 0.2, 0.010},
      {"Chat", 3000, 1000, 2, 0.2, 0.010},
      {"QA+RAG", 10000, 200, 4, 0.4, 0.010},
      {"Summarization", 15000, 1000, 4, 2.0, 0.020},
      {"CodeGen", 20000, 50, 4, 0.5, 0.020},
  };
  return cases;
}

namespace detail {
// "QA+RAG", "qa-rag" and "qa_rag" all name the same use case.
inline std::string fold_name(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}
}  // namespace detail

inline UseCase find_use_case(std::string_view name) {
  const auto key = detail::fold_name(name);
  for (const auto& uc : builtin_use_cases()) {
    if (detail::fold_name(uc.name) == key) return uc;
  }
  throw ValidationError("use_case", "unknown use case '" + std::string(name) + "'");
}

inline nlohmann::json to_json(const UseCase& u) {
  return nlohmann::json{{"name", u.name},
                        {"input_tokens", u.input_tokens},
                        {"output_tokens", u.output_tokens},
                        {"beam_size", u.beam_size},
                        {"ttft_slo", u.ttft_slo},
                        {"tpot_slo", u.tpot_slo}};
}

inline UseCase use_case_from_json(const nlohmann::json& j, const std::string& path = "use_case") {
  detail::FieldReader r(j, path);
  UseCase u;
  u.name = r.get_string("name");
  u.input_tokens = r.get_uint("input_tokens");
  u.output_tokens = r.get_uint("output_tokens");
  u.beam_size = r.get_uint("beam_size");
  u.ttft_slo = r.get_number("ttft_slo");
  u.tpot_slo = r.get_number("tpot_slo");
  r.finish();
  u.validate();
  return u;
}

/// Model-partitioning degrees. Expert and sequence parallelism are carried so
/// configurations can name them, but the cost model rejects them.
struct Parallelism {
  std::uint64_t tp = 1;
  std::uint64_t pp = 1;
  std::uint64_t ep = 1;
  std::uint64_t sp = 1;

  std::uint64_t group_size() const { return tp * pp; }

  void validate(const ModelConfig& m) const {
    if (tp < 1) throw ValidationError("parallelism.tp", "must be >= 1");
    if (pp < 1) throw ValidationError("parallelism.pp", "must be >= 1");
    if (pp > m.n_layers) throw ValidationError("parallelism.pp", "pp exceeds layer count");
    if (tp > m.n_heads) throw ValidationError("parallelism.tp", "tp exceeds head count");
    if (ep > 1) throw UnsupportedError("expert parallelism is not modeled");
    if (sp > 1) throw UnsupportedError("sequence parallelism is not modeled");
  }

  bool operator==(const Parallelism&) const = default;
};

struct Workload {
  UseCase use_case;
  ModelConfig model;
  std::uint64_t batch = 1;
  Precision precision = Precision::int8();
  Parallelism parallelism;

  void validate() const {
    use_case.validate();
    model.validate();
    precision.validate();
    if (batch < 1) throw ValidationError("batch", "must be >= 1");
    parallelism.validate(model);
  }
};

inline Workload make_workload(UseCase use_case, ModelConfig model, std::uint64_t batch,
                              Precision precision = Precision::int8(),
                              Parallelism parallelism = {}) {
  Workload w{std::move(use_case), std::move(model), batch, std::move(precision), parallelism};
  w.validate();
  return w;
}

/// Rows processed per decode step: every beam of every request.
inline std::uint64_t effective_decode_batch(const Workload& w) {
  return detail::mul(w.batch, w.use_case.beam_size);
}

}  // namespace genza
