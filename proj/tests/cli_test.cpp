#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "lowprec/trace.hpp"
#include "lowprec/trainer.hpp"

namespace lowprec {
namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string base = testing::TempDir() + "lowprec_cli_" + std::to_string(getpid()) + "_" +
                           std::to_string(counter++);
  const std::string out = base + ".out";
  const std::string err = base + ".err";
  const std::string cmd = std::string(CLI_BINARY_PATH) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  CliResult r;
  if (status >= 0 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = slurp(out);
  r.err = slurp(err);
  std::remove(out.c_str());
  std::remove(err.c_str());
  return r;
}

std::string write_file(const std::string& name, const std::string& text) {
  const std::string path = testing::TempDir() + name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string base_config(const std::string& trace_path) {
  return
      "depth = 1\n"
      "dim = 16\n"
      "heads = 2\n"
      "mlp_ratio = 2.0\n"
      "iterations = 8\n"
      "warmup_iterations = 2\n"
      "batch_size = 4\n"
      "seed = 11\n"
      "trace_path = " + trace_path + "\n";
}

TEST(Cli, TrainRunsAndWritesTheTrace) {
  const std::string trace = testing::TempDir() + "cli_train_a.jsonl";
  const std::string cfg = write_file("cli_cfg_a.txt", base_config(trace));
  const CliResult r = run_cli("train --config " + cfg);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("train: 8 iterations"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("trace written to " + trace), std::string::npos);
  EXPECT_EQ(read_trace(trace).records.size(), size_t(8));
  std::remove(trace.c_str());
  std::remove(cfg.c_str());
}

TEST(Cli, TrainTracesAreByteIdenticalAcrossRuns) {
  const std::string ta = testing::TempDir() + "cli_det_a.jsonl";
  const std::string tb = testing::TempDir() + "cli_det_b.jsonl";
  const std::string extra = "linear_mode = SwitchBack\nlayer_scale.init = 0.1\n";
  const std::string ca = write_file("cli_det_a.txt", base_config(ta) + extra);
  const std::string cb = write_file("cli_det_b.txt", base_config(tb) + extra);
  ASSERT_EQ(run_cli("train --config " + ca).code, 0);
  ASSERT_EQ(run_cli("train --config " + cb).code, 0);
  const std::string bytes_a = slurp(ta);
  EXPECT_FALSE(bytes_a.empty());
  EXPECT_EQ(bytes_a, slurp(tb));
  for (const std::string& p : {ta, tb, ca, cb}) std::remove(p.c_str());
}

TEST(Cli, TrainRejectsBadConfigsWithExitOne) {
  const std::string cfg = write_file("cli_cfg_bad.txt", "wat = 1\n");
  const CliResult r = run_cli("train --config " + cfg);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unknown key"), std::string::npos) << r.err;
  std::remove(cfg.c_str());
  EXPECT_EQ(run_cli("train --config " + testing::TempDir() + "no_such_config.txt").code, 1);
}

TEST(Cli, TrainRuntimeFailureExitsTwo) {
  const std::string cfg = write_file("cli_cfg_diverge.txt",
                                     "depth = 1\n"
                                     "dim = 16\n"
                                     "heads = 2\n"
                                     "iterations = 5\n"
                                     "warmup_iterations = 1\n"
                                     "batch_size = 4\n"
                                     "optimizer.lr = 1e25\n"
                                     "optimizer.clipping = none\n");
  const CliResult r = run_cli("train --config " + cfg);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos) << r.err;
  std::remove(cfg.c_str());
}

TEST(Cli, AnalyzeWritesTheReportNextToTheTrace) {
  // build a trace with a known embedding rms spike via the starvation hook
  const std::string trace = testing::TempDir() + "cli_analyze.jsonl";
  ModelConfig model;
  model.depth = 1;
  model.dim = 32;
  model.heads = 4;
  model.mlp_ratio = 2.0;
  TrainConfig tc;
  tc.iterations = 240;
  tc.warmup_iterations = 10;
  tc.batch_size = 16;
  tc.seed = 5;
  tc.input_starve_until = 200;
  tc.input_starve_scale = 0.0;
  tc.trace_path = trace;
  train(model, tc);

  const CliResult r = run_cli("analyze --trace " + trace);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("layer embed.weight:"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("rms_spike iter=201"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("negative control:"), std::string::npos);
  EXPECT_NE(r.out.find("report written to " + trace + ".report"), std::string::npos);
  const std::string report = slurp(trace + ".report");
  EXPECT_FALSE(report.empty());
  EXPECT_EQ(r.out.find(report), size_t(0));  // stdout starts with the report bytes

  const CliResult quiet = run_cli("analyze --trace " + trace + " --rms-threshold 1e9");
  EXPECT_EQ(quiet.code, 0);
  EXPECT_NE(quiet.out.find("0 rms spikes"), std::string::npos) << quiet.out;

  std::remove(trace.c_str());
  std::remove((trace + ".report").c_str());
}

TEST(Cli, AnalyzeMissingTraceExitsOne) {
  EXPECT_EQ(run_cli("analyze --trace " + testing::TempDir() + "no_such_trace.jsonl").code, 1);
}

TEST(Cli, BenchWritesTheCsvSchema) {
  const std::string csv_path = testing::TempDir() + "cli_bench.csv";
  const CliResult r = run_cli("bench --sizes 4x8,2x16 --repeats 3 --out " + csv_path);
  EXPECT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(csv_path);
  EXPECT_EQ(r.out, csv);  // echoed verbatim
  EXPECT_EQ(csv.find("op,b,dim,repeats,mean_ns,p50_ns\n"), size_t(0));
  EXPECT_NE(csv.find("quantize_rowwise,4,8,3,"), std::string::npos);
  EXPECT_NE(csv.find("switchback_fwd_bwd,2,16,3,"), std::string::npos);
  EXPECT_NE(csv.find("quantize_fraction"), std::string::npos);
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 2 * 7);  // header + 7 ops per size
  std::remove(csv_path.c_str());
}

TEST(Cli, NoisePrintsOneRowPerK) {
  const CliResult r = run_cli("noise --k 8,64 --sigma-q 0.1 --trials 200");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("k,predicted,empirical,rel_error\n"), size_t(0));
  EXPECT_NE(r.out.find("\n8,"), std::string::npos);
  EXPECT_NE(r.out.find("\n64,"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOneAndHelpExitsZero) {
  EXPECT_EQ(run_cli("").code, 1);                       // a subcommand is required
  EXPECT_EQ(run_cli("train").code, 1);                  // --config is required
  EXPECT_EQ(run_cli("bench --sizes 4x8").code, 1);      // --repeats/--out missing
  EXPECT_EQ(run_cli("frobnicate").code, 1);
  EXPECT_EQ(run_cli("noise --k , --sigma-q 0.1 --trials 10").code, 1);
  EXPECT_EQ(run_cli("bench --sizes 4y8 --repeats 1 --out /dev/null").code, 1);
  const CliResult help = run_cli("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("train"), std::string::npos);
}

}  // namespace
}  // namespace lowprec
