// Copyright 2026 The Encode Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "encode/cli.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "encode/datagen.h"
#include "encode/inference.h"
#include "encode/store.h"
#include "json.hpp"
#include "test_util.h"

namespace encode {
namespace {

using testing::ScratchDir;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "encode");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> small_gen(const std::filesystem::path& out) {
  return {"gen-data", "--users", "6", "--L", "60", "--items", "300", "--d", "8", "--categories", "4",
          "--interests", "2", "--samples-pos", "4", "--samples-neg", "4", "--out", out.string()};
}

// Runs the offline pipeline into `dir` and returns the artifact paths.
void pipeline(const ScratchDir& dir, const std::string& seed) {
  auto gen = small_gen(dir / "d.jsonl");
  gen.insert(gen.begin(), {"--seed", seed});
  ASSERT_EQ(run_cli(gen).code, 0);
  ASSERT_EQ(run_cli({"--seed", seed, "train-proj", "--data", (dir / "d.jsonl").string(), "--m", "3", "--steps",
                     "20", "--batch", "32", "--out", (dir / "p.bin").string()})
                .code,
            0);
  ASSERT_EQ(run_cli({"--seed", seed, "extract", "--data", (dir / "d.jsonl").string(), "--proj",
                     (dir / "p.bin").string(), "--K", "5", "--parallel", "2", "--out", (dir / "s.bin").string()})
                .code,
            0);
  ASSERT_EQ(run_cli({"--seed", seed, "train-head", "--data", (dir / "d.jsonl").string(), "--proj",
                     (dir / "p.bin").string(), "--K", "5", "--head-lr", "0.01", "--head-batch", "8", "--out",
                     (dir / "h.bin").string()})
                .code,
            0);
}

TEST(Cli, HelpAndUsageErrors) {
  const Result help = run_cli({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  for (const char* sub : {"gen-data", "train-proj", "extract", "train-head", "score", "serve", "bench",
                          "evaluate", "ablate"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(run_cli({"gen-data", "--help"}).code, cli::kExitOk);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"gen-data", "--users", "many"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"ablate"}).code, cli::kExitUsage);  // --sweep is required
}

TEST(Cli, ConfigErrorsExitTwoRuntimeErrorsExitOne) {
  ScratchDir dir("cli");
  auto zero_len = small_gen(dir / "d.jsonl");
  zero_len[4] = "0";  // --L 0
  const Result r = run_cli(zero_len);
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_EQ(run_cli({"train-proj", "--data", (dir / "missing.jsonl").string()}).code, cli::kExitFailure);
  ASSERT_EQ(run_cli(small_gen(dir / "d.jsonl")).code, 0);
  EXPECT_EQ(run_cli({"train-proj", "--data", (dir / "d.jsonl").string(), "--loss", "hinge"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"train-proj", "--data", (dir / "d.jsonl").string(), "--m", "9"}).code, cli::kExitUsage);
}

TEST(Cli, PipelineIsByteIdenticalForASeed) {
  ScratchDir a("cli-a"), b("cli-b"), c("cli-c");
  pipeline(a, "7");
  pipeline(b, "7");
  pipeline(c, "8");
  for (const char* f : {"d.jsonl", "p.bin", "s.bin", "h.bin"}) {
    const std::string bytes = slurp(a / f);
    EXPECT_FALSE(bytes.empty()) << f;
    EXPECT_EQ(bytes, slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "d.jsonl"), slurp(c / "d.jsonl"));
  const auto snap = Snapshot::open(a / "s.bin");
  EXPECT_EQ(snap->size(), 6u);
  EXPECT_LE(snap->k_max(), 5u);
  EXPECT_TRUE(read_head(a / "h.bin").trained);
}

TEST(Cli, EnvironmentSeedOverridesFlag) {
  ScratchDir dir("cli");
  auto with_flag = small_gen(dir / "flag.jsonl");
  with_flag.insert(with_flag.begin(), {"--seed", "3"});
  ASSERT_EQ(run_cli(with_flag).code, 0);

  ::setenv("ENCODE_SEED", "3", 1);
  auto with_env = small_gen(dir / "env.jsonl");
  with_env.insert(with_env.begin(), {"--seed", "99"});
  const int code = run_cli(with_env).code;
  ::setenv("ENCODE_SEED", "not-a-number", 1);
  const int bad = run_cli(small_gen(dir / "bad.jsonl")).code;
  ::unsetenv("ENCODE_SEED");
  ASSERT_EQ(code, 0);
  EXPECT_EQ(slurp(dir / "flag.jsonl"), slurp(dir / "env.jsonl"));
  EXPECT_EQ(bad, cli::kExitUsage);
}

TEST(Cli, ScoreAnswersRequestFile) {
  ScratchDir dir("cli");
  pipeline(dir, "1");
  const Dataset ds = read_dataset(dir / "d.jsonl");
  const std::uint64_t user = ds.sequences[0].user_id;
  const std::uint64_t item = ds.catalog.items()[0].id;
  {
    std::ofstream req(dir / "req.jsonl");
    req << R"({"user": )" << user << R"(, "items": [)" << item << "]}\n";
    req << R"({"user": 12345, "items": [0]})" << "\n";
  }
  const std::vector<std::string> base = {"score", "--store", (dir / "s.bin").string(), "--data",
                                         (dir / "d.jsonl").string(), "--requests", (dir / "req.jsonl").string()};
  auto with_head = base;
  with_head.insert(with_head.end(), {"--head", (dir / "h.bin").string()});
  const Result r = run_cli(with_head);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  const auto j = nlohmann::json::parse(first);
  EXPECT_EQ(j["user"], user);
  ASSERT_EQ(j["scores"].size(), 1u);
  EXPECT_GT(j["scores"][0].get<double>(), 0.0);
  EXPECT_LT(j["scores"][0].get<double>(), 1.0);
  EXPECT_EQ(second, R"({"error":"user_not_found"})");

  auto zero = base;
  zero.push_back("--zero-head");
  const Result z = run_cli(zero);
  ASSERT_EQ(z.code, 0);
  EXPECT_EQ(nlohmann::json::parse(z.out.substr(0, z.out.find('\n')))["scores"][0], 0.5);

  auto both = with_head;
  both.push_back("--zero-head");
  EXPECT_EQ(run_cli(both).code, cli::kExitUsage);
  EXPECT_EQ(run_cli(base).code, cli::kExitUsage);
}

TEST(Cli, ServeOverStdin) {
  ScratchDir dir("cli");
  pipeline(dir, "2");
  const Dataset ds = read_dataset(dir / "d.jsonl");
  const std::string input = "{\"user\": " + std::to_string(ds.sequences[1].user_id) + ", \"items\": [" +
                            std::to_string(ds.catalog.items()[3].id) + "]}\n{\"cmd\": \"reload\"}\n";
  const Result r = run_cli({"serve", "--store", (dir / "s.bin").string(), "--data", (dir / "d.jsonl").string(),
                            "--head", (dir / "h.bin").string()},
                           input);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"scores\""), std::string::npos);
  EXPECT_NE(r.out.find(R"({"reloaded":true,"generation":2})"), std::string::npos);
}

TEST(Cli, EvaluateAndAblateWriteReports) {
  ScratchDir dir("cli");
  pipeline(dir, "3");
  const std::string data = (dir / "d.jsonl").string();
  const Result e = run_cli({"evaluate", "--data", data, "--proj", (dir / "p.bin").string(), "--K", "5",
                            "--strategies", "encode,din_l,avg_pooling", "--top-k", "10", "--head-lr", "0.01",
                            "--head-batch", "8", "--out-dir", dir.path().string()});
  ASSERT_EQ(e.code, 0) << e.err;
  const std::string ri = slurp(dir / "ri_report.csv");
  EXPECT_EQ(ri.rfind("strategy,seed,pairs,ri,oracle_entropy\n", 0), 0u);
  EXPECT_NE(ri.find("\navg_pooling,"), std::string::npos);
  EXPECT_EQ(slurp(dir / "auc_report.csv").rfind("strategy,seed,auc,gauc,final_loss\n", 0), 0u);

  const Result a = run_cli({"ablate", "--data", data, "--sweep", "K", "--values", "2..4", "--m", "3", "--steps",
                            "5", "--batch", "16", "--head-lr", "0.01", "--head-batch", "8", "--out",
                            (dir / "abl.csv").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  std::istringstream rows(slurp(dir / "abl.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(rows, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "sweep,value,strategy,seed,pairs,ri,oracle_entropy,auc,gauc");
  EXPECT_EQ(lines[1].rfind("K,2,encode,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("K,4,encode,", 0), 0u);
  EXPECT_EQ(run_cli({"ablate", "--data", data, "--sweep", "gamma"}).code, cli::kExitUsage);
}

TEST(Cli, BenchWritesCsv) {
  ScratchDir dir("cli");
  const Result r = run_cli({"bench", "--L", "100,200", "--repetitions", "2", "--warmup", "1", "--batch", "2",
                            "--items", "300", "--d", "8", "--m", "3", "--K", "4", "--out",
                            (dir / "b.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream rows(slurp(dir / "b.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(rows, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "strategy,L,K,p50_us,p95_us,p99_us,metric_evals");
  EXPECT_EQ(run_cli({"bench", "--L", "0"}).code, cli::kExitUsage);
}

TEST(Cli, IngestsEventLog) {
  ScratchDir dir("cli");
  {
    std::ofstream log(dir / "log.csv");
    log << "user_id,item_id,timestamp,category\n1,10,5,0\n1,11,6,1\n2,10,7,0\n";
  }
  const Result r = run_cli({"gen-data", "--from-log", (dir / "log.csv").string(), "--d", "4", "--out",
                            (dir / "d.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset ds = read_dataset(dir / "d.jsonl");
  EXPECT_EQ(ds.sequences.size(), 2u);
  EXPECT_EQ(ds.catalog.size(), 2u);
  EXPECT_EQ(ds.catalog.dim(), 4u);
}

}  // namespace
}  // namespace encode
