#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "genza/model_catalog.hpp"
#include "genza/report.hpp"
#include "genza/workload.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result genza_run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const auto err_path = fs::temp_directory_path() / ("genza_cli_err_" + std::to_string(++counter));
  const std::string cmd = env + " " GENZA_CLI_PATH " " + args + " 2>" + err_path.string();
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  fs::remove(err_path);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("genza_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kPlatform = std::string(GENZA_SOURCE_DIR) + "/configs/platforms/hgx8.json";

}  // namespace

TEST(Cli, AnalyzeWritesCsvAndJson) {
  const auto dir = fresh_dir("analyze");
  const auto r = genza_run("analyze --model llama2-7b --usecase qa --platform " + kPlatform +
                           " --batch 4 -o " + dir.string() + " --format csv,json");
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir / "analyze.csv"));
  ASSERT_TRUE(fs::exists(dir / "analyze.json"));
  const auto j = nlohmann::json::parse(slurp(dir / "analyze.json"));
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_GT(j.at("result").at("metrics").at("ttft_s").get<double>(), 0);
  const auto rows = genza::report::parse_sweep_csv(slurp(dir / "analyze.csv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].axis, "4");
}

TEST(Cli, RequireJsonToStdout) {
  const auto r = genza_run("require --model gpt4-1.8t --usecase qa-rag --format json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("schema_version"), 1);
  const auto& rep = j.at("result").at("reports").at(0);
  EXPECT_EQ(rep.at("context_tokens"), 10000);
  EXPECT_GT(rep.at("bandwidth_required").get<double>(), 0);
  EXPECT_GT(rep.at("flops_required").get<double>(), 0);
}

TEST(Cli, ExtremeScaleCurve) {
  const auto dir = fresh_dir("extreme");
  const auto r = genza_run("extreme-scale --model super-llm-10t --contexts 1000:2000000:log32 -o " +
                           dir.string() + " --format csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = genza::report::parse_requirement_csv(slurp(dir / "extreme-scale.csv"));
  ASSERT_EQ(rows.size(), 32u);
  EXPECT_EQ(rows.front().context_tokens, 1000u);
  EXPECT_EQ(rows.back().context_tokens, 2000000u);
}

TEST(Cli, ByteIdenticalReruns) {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  const std::string args = "sweep-batch --model mixtral-8x7b --usecase chat --tp 2 --batches 1:16:log5 "
                           "--format csv,json,md -o ";
  ASSERT_EQ(genza_run(args + a.string()).code, 0);
  ASSERT_EQ(genza_run(args + b.string()).code, 0);
  for (const char* f : {"sweep-batch.csv", "sweep-batch.json", "sweep-batch.md"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
}

TEST(Cli, ValidationErrorExitsOneWithoutFiles) {
  const auto dir = fresh_dir("invalid");
  const auto r = genza_run("analyze --model llama2-7b --pp 40 --format csv,json -o " + dir.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(dir));
  const auto line = r.err.substr(0, r.err.find('\n'));
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("error"), "validation");
  EXPECT_EQ(j.at("field"), "parallelism.pp");
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1);
}

TEST(Cli, UnknownFlagExitsOne) {
  const auto r = genza_run("analyze --model llama2-7b --bogus 3");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "usage");
}

TEST(Cli, BadFormatAndMissingFile) {
  EXPECT_EQ(genza_run("list-models --format xml").code, 1);
  const auto r = genza_run("analyze --model llama2-7b --platform /no/such/file.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("field"), "platform");
}

TEST(Cli, OutOfMemoryExitsTwo) {
  const auto r = genza_run("analyze --model gpt4-1.8t --usecase qa --platform a100-40gb");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "oom");
}

TEST(Cli, UnsupportedParallelismExitsTwo) {
  const auto r = genza_run("analyze --model mixtral-8x7b --ep 2");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "unsupported");
}

TEST(Cli, ListedNamesRoundTripIntoAnalyze) {
  const auto models = genza_run("list-models --format json");
  ASSERT_EQ(models.code, 0);
  const auto usecases = genza_run("list-usecases --format json");
  ASSERT_EQ(usecases.code, 0);
  const auto mj = nlohmann::json::parse(models.out).at("result");
  const auto uj = nlohmann::json::parse(usecases.out).at("result");
  EXPECT_EQ(mj.size(), genza::builtin_models().size());
  EXPECT_EQ(uj.size(), genza::builtin_use_cases().size());
  for (const auto& u : uj) {
    const auto r = genza_run("analyze --model llama2-7b --usecase '" + u.at("name").get<std::string>() + "'");
    EXPECT_EQ(r.code, 0) << r.err;
  }
  for (const auto& m : mj) {
    const auto r = genza_run("require --model " + m.at("name").get<std::string>());
    EXPECT_EQ(r.code, 0) << r.err;
  }
}

TEST(Cli, ModelPathEnvironment) {
  const auto dir = fresh_dir("models");
  fs::create_directories(dir);
  auto m = genza::builtin_models()[0];
  m.name = "my-model";
  std::ofstream(dir / "my-model.json") << genza::to_json(m).dump();
  const auto r = genza_run("analyze --model my-model", "GENZA_MODEL_PATH=" + dir.string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(genza_run("analyze --model my-model", "GENZA_MODEL_PATH=").code, 1);
}

TEST(Cli, OtherCommands) {
  EXPECT_EQ(genza_run("compare-parallelism --model llama2-7b --npus 8 --format csv").code, 0);
  const auto r = genza_run("sweep-characteristic --model mixtral-8x7b --usecase qa-rag --tp 2 "
                           "--platform reference --axis flops --multipliers 1,12 --format csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = genza::report::parse_sweep_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].tpot_ms, rows[1].tpot_ms);
  EXPECT_EQ(genza_run("list-usecases --format md").code, 0);
  EXPECT_EQ(genza_run("--help").code, 0);
  EXPECT_EQ(genza_run("").code, 1);
}
