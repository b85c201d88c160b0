#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genza/detail/checked.hpp"
#include "genza/detail/json_fields.hpp"
#include "genza/error.hpp"

namespace genza {

// ---------------------------------------------------------------------------
// Precision
// ---------------------------------------------------------------------------

/// Storage width of weights, activations and KV-cache entries. Widths are kept
/// in bits so that sub-byte formats (int4) are costed exactly.
struct Precision {
  std::string name;
  std::uint64_t weight_bits = 8;
  std::uint64_t act_bits = 8;
  std::uint64_t kv_bits = 8;

  double weight_bytes() const { return static_cast<double>(weight_bits) / 8.0; }
  double act_bytes() const { return static_cast<double>(act_bits) / 8.0; }
  double kv_bytes() const { return static_cast<double>(kv_bits) / 8.0; }

  static Precision fp16() { return {"fp16", 16, 16, 16}; }
  static Precision int8() { return {"int8", 8, 8, 8}; }
  static Precision fp8() { return {"fp8", 8, 8, 8}; }
  static Precision int4() { return {"int4", 4, 4, 4}; }

  static Precision from_name(std::string_view name) {
    if (name == "fp16") return fp16();
    if (name == "int8") return int8();
    if (name == "fp8") return fp8();
    if (name == "int4") return int4();
    throw ValidationError("precision", "unknown precision '" + std::string(name) +
                                           "' (expected fp16, int8, fp8 or int4)");
  }

  void validate() const {
    if (weight_bits == 0) throw ValidationError("precision.weight_bits", "must be positive");
    if (act_bits == 0) throw ValidationError("precision.act_bits", "must be positive");
    if (kv_bits == 0) throw ValidationError("precision.kv_bits", "must be positive");
  }

  bool operator==(const Precision&) const = default;
};

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

/// Architecture hyperparameters of one decoder-only LLM.
struct ModelConfig {
  std::string name;
  std::uint64_t d_model = 0;
  std::uint64_t n_layers = 0;
  std::uint64_t n_heads = 0;
  std::uint64_t kv_heads = 0;
  double ff_ratio = 0.0;
  std::uint64_t n_experts = 1;
  std::uint64_t experts_per_token = 1;
  bool mlp_gated = true;

  std::uint64_t head_dim() const { return d_model / n_heads; }
  std::uint64_t d_ff() const {
    return static_cast<std::uint64_t>(std::llround(ff_ratio * static_cast<double>(d_model)));
  }
  /// Output width of the fused Q/K/V projection (GQA narrows K and V).
  std::uint64_t qkv_width() const { return d_model + 2 * kv_heads * head_dim(); }
  std::uint64_t mlp_matrices() const { return mlp_gated ? 3 : 2; }
  bool is_moe() const { return n_experts > 1; }

  void validate() const {
    auto positive = [](std::uint64_t v, const char* field) {
      if (v == 0) throw ValidationError(std::string("model.") + field, "must be positive");
    };
    if (name.empty()) throw ValidationError("model.name", "must be non-empty");
    positive(d_model, "d_model");
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(kv_heads, "kv_heads");
    positive(n_experts, "n_experts");
    positive(experts_per_token, "experts_per_token");
    if (!(ff_ratio > 0.0) || !std::isfinite(ff_ratio)) {
      throw ValidationError("model.ff_ratio", "must be positive and finite");
    }
    if (d_model % n_heads != 0) {
      throw ValidationError("model.n_heads", "head dim not integral (d_model % n_heads != 0)");
    }
    if (kv_heads > n_heads) throw ValidationError("model.kv_heads", "must not exceed n_heads");
    if (n_heads % kv_heads != 0) {
      throw ValidationError("model.kv_heads", "n_heads must be a multiple of kv_heads");
    }
    if (experts_per_token > n_experts) {
      throw ValidationError("model.experts_per_token", "must not exceed n_experts");
    }
    if (d_ff() == 0) throw ValidationError("model.ff_ratio", "feed-forward width rounds to zero");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const ModelConfig& m) {
  return nlohmann::json{{"name", m.name},
                        {"d_model", m.d_model},
                        {"n_layers", m.n_layers},
                        {"n_heads", m.n_heads},
                        {"kv_heads", m.kv_heads},
                        {"ff_ratio", m.ff_ratio},
                        {"n_experts", m.n_experts},
                        {"experts_per_token", m.experts_per_token},
                        {"mlp_gated", m.mlp_gated}};
}

inline ModelConfig model_from_json(const nlohmann::json& j, const std::string& path = "model") {
  detail::FieldReader r(j, path);
  ModelConfig m;
  m.name = r.get_string("name");
  m.d_model = r.get_uint("d_model");
  m.n_layers = r.get_uint("n_layers");
  m.n_heads = r.get_uint("n_heads");
  m.kv_heads = r.get_uint("kv_heads");
  m.ff_ratio = r.get_number("ff_ratio");
  m.n_experts = r.get_uint("n_experts");
  m.experts_per_token = r.get_uint("experts_per_token");
  m.mlp_gated = r.get_bool("mlp_gated");
  r.finish();
  m.validate();
  return m;
}

/// The built-in model table.
inline const std::vector<ModelConfig>& builtin_models() {
  static const std::vector<ModelConfig> models = {
      {"llama2-7b", 4096, 32, 32, 32, 2.6875, 1, 1, true},
      {"mixtral-8x7b", 4096, 32, 32, 8, 3.5, 8, 2, true},
      {"llama3-70b", 8192, 80, 64, 8, 3.5, 1, 1, true},
      {"gpt3-175b", 12288, 96, 96, 96, 4.0, 1, 1, false},
      {"gpt4-1.8t", 10752, 120, 84, 84, 4.0, 16, 2, false},
      {"super-llm-10t", 13824, 128, 108, 108, 4.0, 32, 4, true},
  };
  return models;
}

inline const ModelConfig* find_builtin_model(std::string_view name) {
  for (const auto& m : builtin_models()) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

inline ModelConfig load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model", "cannot open model file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model", "malformed JSON in '" + path.string() + "': " + e.what());
  }
  return model_from_json(j);
}

/// Resolves a built-in name, a path to a JSON file, or `<name>.json` inside one
/// of the directories listed in GENZA_MODEL_PATH (':'-separated).
inline ModelConfig load_model_config(std::string_view source) {
  if (const auto* m = find_builtin_model(source)) return *m;

  namespace fs = std::filesystem;
  const fs::path direct(source);
  if (fs::is_regular_file(direct)) return load_model_file(direct);

  if (const char* env = std::getenv("GENZA_MODEL_PATH")) {
    std::string_view dirs(env);
    while (!dirs.empty()) {
      auto sep = dirs.find(':');
      auto dir = dirs.substr(0, sep);
      if (!dir.empty()) {
        fs::path candidate = fs::path(dir) / (std::string(source) + ".json");
        if (fs::is_regular_file(candidate)) return load_model_file(candidate);
      }
      if (sep == std::string_view::npos) break;
      dirs.remove_prefix(sep + 1);
    }
  }
  throw ValidationError("model", "unknown model '" + std::string(source) + "'");
}

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

/// Decoder-layer parameters, embeddings and LM head excluded.
struct ParamCount {
  std::uint64_t total = 0;
  std::uint64_t active_per_token = 0;
  std::uint64_t attention = 0;  // Q, K, V, O summed over all layers
};

inline std::uint64_t attention_params_per_layer(const ModelConfig& m) {
  return detail::add(detail::mul(m.d_model, m.qkv_width()), detail::mul(m.d_model, m.d_model));
}

inline std::uint64_t mlp_params_per_expert(const ModelConfig& m) {
  return detail::mul({m.mlp_matrices(), m.d_model, m.d_ff()});
}

inline ParamCount count_params(const ModelConfig& m) {
  const auto attn = attention_params_per_layer(m);
  const auto mlp = mlp_params_per_expert(m);
  ParamCount p;
  p.attention = detail::mul(m.n_layers, attn);
  p.total = detail::mul(m.n_layers, detail::add(attn, detail::mul(m.n_experts, mlp)));
  p.active_per_token =
      detail::mul(m.n_layers, detail::add(attn, detail::mul(m.experts_per_token, mlp)));
  return p;
}

// ---------------------------------------------------------------------------
// Operators and graphs
// ---------------------------------------------------------------------------

enum class OpKind { qkv_proj, score_qk, context_pv, out_proj, ff_up, ff_gate, ff_down };

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::qkv_proj: return "QKV_proj";
    case OpKind::score_qk: return "ScoreQK";
    case OpKind::context_pv: return "ContextPV";
    case OpKind::out_proj: return "OutProj";
    case OpKind::ff_up: return "FFup";
    case OpKind::ff_gate: return "FFgate";
    case OpKind::ff_down: return "FFdown";
  }
  return "?";
}

using Shape = std::vector<std::uint64_t>;

/// One matmul of a decoder layer. `flops` counts 2 per multiply-accumulate;
/// the three byte counts sum to the operator's memory traffic.
struct OperatorSpec {
  OpKind kind{};
  std::vector<Shape> input_shapes;
  Shape output_shape;
  double flops = 0;
  double weight_bytes = 0;
  double activation_bytes = 0;
  double kv_read_bytes = 0;
  bool is_weight_bearing = false;
  bool is_kv_bearing = false;

  double memory_bytes() const { return weight_bytes + activation_bytes + kv_read_bytes; }
  bool is_attention() const { return kind == OpKind::score_qk || kind == OpKind::context_pv; }
  const char* name() const { return to_string(kind); }
};

enum class Stage { prefill, decode };

inline const char* to_string(Stage s) { return s == Stage::prefill ? "prefill" : "decode"; }

struct OperatorGraph {
  Stage stage = Stage::prefill;
  std::vector<OperatorSpec> per_layer_ops;
  std::uint64_t n_layers = 0;
  std::uint64_t collective_points_per_layer = 2;
  std::uint64_t batch = 0;    // rows per pass (B for prefill, B*S_b for decode)
  std::uint64_t tokens = 0;   // new tokens per row in this pass
  std::uint64_t context = 0;  // attended sequence length
  std::uint64_t d_model = 0;
  Precision precision;

  double layer_flops() const {
    double s = 0;
    for (const auto& op : per_layer_ops) s += op.flops;
    return s;
  }
  double layer_weight_bytes() const {
    double s = 0;
    for (const auto& op : per_layer_ops) s += op.weight_bytes;
    return s;
  }
  double layer_kv_bytes() const {
    double s = 0;
    for (const auto& op : per_layer_ops) s += op.kv_read_bytes;
    return s;
  }
  double max_activation_bytes() const {
    double s = 0;
    for (const auto& op : per_layer_ops) s = std::max(s, op.activation_bytes);
    return s;
  }
  double total_flops() const { return layer_flops() * static_cast<double>(n_layers); }
  double total_weight_bytes() const {
    return layer_weight_bytes() * static_cast<double>(n_layers);
  }
};

namespace detail {

// Shared body of the prefill and decode builders. `rows` sequences each push
// `q_len` new tokens through the layer while attending over `ctx_len`
// positions. Decode reads K/V from the cache; prefill produces them in-pass.
inline OperatorGraph build_layer_graph(const ModelConfig& m, Stage stage, std::uint64_t rows,
                                       std::uint64_t q_len, std::uint64_t ctx_len,
                                       std::uint64_t expert_weight_sets, const Precision& p) {
  const std::uint64_t D = m.d_model;
  const std::uint64_t H = m.n_heads;
  const std::uint64_t d = m.head_dim();
  const std::uint64_t kv_w = m.kv_heads * d;
  const std::uint64_t qkv_w = m.qkv_width();
  const std::uint64_t ff = m.d_ff();
  const std::uint64_t K = m.experts_per_token;
  const std::uint64_t tok = mul(rows, q_len);  // token rows entering the layer
  const bool from_cache = stage == Stage::decode;
  const auto wb = p.weight_bits;
  const auto ab = p.act_bits;
  const auto kb = p.kv_bits;

  OperatorGraph g;
  g.stage = stage;
  g.n_layers = m.n_layers;
  g.batch = rows;
  g.tokens = q_len;
  g.context = ctx_len;
  g.d_model = D;
  g.precision = p;

  auto flops = [](std::uint64_t macs) { return static_cast<double>(mul(2, macs)); };

  {
    OperatorSpec op;
    op.kind = OpKind::qkv_proj;
    op.input_shapes = {{rows, q_len, D}, {D, qkv_w}};
    op.output_shape = {rows, q_len, qkv_w};
    op.flops = flops(mul({tok, D, qkv_w}));
    op.weight_bytes = bits_to_bytes(mul(D, qkv_w), wb);
    op.activation_bytes = bits_to_bytes(add(mul(tok, D), mul(tok, qkv_w)), ab);
    op.is_weight_bearing = true;
    g.per_layer_ops.push_back(std::move(op));
  }

  const std::uint64_t scores = mul({rows, H, q_len, ctx_len});
  const std::uint64_t kv_elems = mul(rows, mul(ctx_len, kv_w));
  {
    OperatorSpec op;
    op.kind = OpKind::score_qk;
    op.input_shapes = {{rows, q_len, H, d}, {rows, ctx_len, m.kv_heads, d}};
    op.output_shape = {rows, H, q_len, ctx_len};
    op.flops = flops(mul(scores, d));
    if (from_cache) {
      op.kv_read_bytes = bits_to_bytes(kv_elems, kb);
      op.activation_bytes = bits_to_bytes(add(mul(tok, D), scores), ab);
      op.is_kv_bearing = true;
    } else {
      op.activation_bytes = bits_to_bytes(add({mul(tok, D), kv_elems, scores}), ab);
    }
    g.per_layer_ops.push_back(std::move(op));
  }
  {
    OperatorSpec op;
    op.kind = OpKind::context_pv;
    op.input_shapes = {{rows, H, q_len, ctx_len}, {rows, ctx_len, m.kv_heads, d}};
    op.output_shape = {rows, q_len, H, d};
    op.flops = flops(mul(scores, d));
    if (from_cache) {
      op.kv_read_bytes = bits_to_bytes(kv_elems, kb);
      op.activation_bytes = bits_to_bytes(add(scores, mul(tok, D)), ab);
      op.is_kv_bearing = true;
    } else {
      op.activation_bytes = bits_to_bytes(add({scores, kv_elems, mul(tok, D)}), ab);
    }
    g.per_layer_ops.push_back(std::move(op));
  }
  {
    OperatorSpec op;
    op.kind = OpKind::out_proj;
    op.input_shapes = {{rows, q_len, D}, {D, D}};
    op.output_shape = {rows, q_len, D};
    op.flops = flops(mul({tok, D, D}));
    op.weight_bytes = bits_to_bytes(mul(D, D), wb);
    op.activation_bytes = bits_to_bytes(mul({2, tok, D}), ab);
    op.is_weight_bearing = true;
    g.per_layer_ops.push_back(std::move(op));
  }

  // Each token is routed to K experts; `expert_weight_sets` copies of every
  // MLP matrix are streamed (all E in prefill, K in decode).
  const std::uint64_t routed = mul(tok, K);
  auto mlp_op = [&](OpKind kind, std::uint64_t in_w, std::uint64_t out_w) {
    OperatorSpec op;
    op.kind = kind;
    Shape weight = {in_w, out_w};
    if (expert_weight_sets > 1) weight.insert(weight.begin(), expert_weight_sets);
    op.input_shapes = {{rows, mul(q_len, K), in_w}, weight};
    op.output_shape = {rows, mul(q_len, K), out_w};
    op.flops = flops(mul({routed, in_w, out_w}));
    op.weight_bytes = bits_to_bytes(mul({expert_weight_sets, in_w, out_w}), wb);
    op.activation_bytes = bits_to_bytes(add(mul(routed, in_w), mul(routed, out_w)), ab);
    op.is_weight_bearing = true;
    return op;
  };
  g.per_layer_ops.push_back(mlp_op(OpKind::ff_up, D, ff));
  if (m.mlp_gated) g.per_layer_ops.push_back(mlp_op(OpKind::ff_gate, D, ff));
  g.per_layer_ops.push_back(mlp_op(OpKind::ff_down, ff, D));
  return g;
}

}  // namespace detail

/// One decoder layer of the prefill pass over `prompt_len` tokens per sequence.
inline OperatorGraph build_prefill_graph(const ModelConfig& m, std::uint64_t batch,
                                         std::uint64_t prompt_len, const Precision& p) {
  m.validate();
  p.validate();
  if (batch < 1) throw ValidationError("batch", "must be >= 1");
  if (prompt_len < 1) throw ValidationError("prompt_len", "must be >= 1");
  return detail::build_layer_graph(m, Stage::prefill, batch, prompt_len, prompt_len,
                                   m.n_experts, p);
}

/// One decoder layer of a single decode step. `batch_eff` is B*S_b and
/// `context_len` the number of tokens already in the cache.
inline OperatorGraph build_decode_graph(const ModelConfig& m, std::uint64_t batch_eff,
                                        std::uint64_t context_len, const Precision& p) {
  m.validate();
  p.validate();
  if (batch_eff < 1) throw ValidationError("batch_eff", "must be >= 1");
  return detail::build_layer_graph(m, Stage::decode, batch_eff, 1,
                                   detail::add(context_len, 1), m.experts_per_token, p);
}

/// Whole-model KV cache: the prompt's K/V are shared by all beams, each beam
/// appends its own decode K/V.
inline double kv_cache_bytes(const ModelConfig& m, std::uint64_t batch, std::uint64_t beams,
                             std::uint64_t prompt_len, std::uint64_t decode_len,
                             const Precision& p) {
  if (beams < 1) throw ValidationError("beam_size", "must be >= 1");
  const auto tokens = detail::add(prompt_len, detail::mul(beams, decode_len));
  const auto elems =
      detail::mul({2, batch, tokens, m.kv_heads, m.head_dim(), m.n_layers});
  return detail::bits_to_bytes(elems, p.kv_bits);
}

}  // namespace genza
