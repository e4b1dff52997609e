#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowprec/analyze.hpp"
#include "lowprec/bench.hpp"
#include "lowprec/config.hpp"
#include "lowprec/noise.hpp"
#include "lowprec/trainer.hpp"

namespace {

std::vector<int64_t> parse_int_list(const std::string& list) {
  std::vector<int64_t> out;
  std::istringstream in(list);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stoll(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::invalid_argument("expected a comma-separated integer list, got '" + tok + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

int run_train(const std::string& config_path) {
  lowprec::RunConfig cfg = lowprec::load_config(config_path);
  lowprec::TrainResult res = lowprec::train(cfg.model, cfg.train);
  double final_loss = res.trace.records.empty() ? 0.0 : res.trace.records.back().loss;
  std::cout << "train: " << res.trace.records.size() << " iterations, final loss " << final_loss
            << "\n";
  if (!cfg.train.trace_path.empty())
    std::cout << "trace written to " << cfg.train.trace_path << "\n";
  return 0;
}

int run_bench(const std::string& sizes, int64_t repeats, const std::string& out_path) {
  std::string csv = lowprec::bench_csv(lowprec::run_bench(lowprec::parse_bench_sizes(sizes), repeats));
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::invalid_argument("bench: cannot write '" + out_path + "'");
  out << csv;
  out.flush();
  if (!out) throw std::invalid_argument("bench: write failed: " + out_path);
  std::cout << csv;
  return 0;
}

int run_analyze(const std::string& trace_path, const lowprec::SpikeParams& params) {
  lowprec::AnalyzeOptions opt;
  opt.params = params;
  lowprec::AnalyzeResult result = lowprec::analyze_trace_file(trace_path, opt);
  std::cout << result.report_text;
  std::cout << "report written to " << trace_path << ".report\n";
  return 0;
}

int run_noise(const std::string& k_list, double sigma_q, int64_t trials) {
  std::vector<lowprec::NoiseReportRow> rows =
      lowprec::noise_report(parse_int_list(k_list), sigma_q, trials, /*seed=*/1);
  std::cout << "k,predicted,empirical,rel_error\n";
  for (const auto& r : rows)
    std::cout << r.k << ',' << r.predicted << ',' << r.empirical << ',' << r.rel_error << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-precision training toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* train_cmd = app.add_subcommand("train", "run the training loop from a config file");
  train_cmd->add_option("--config", config_path, "key = value config file")->required();

  std::string sizes;
  int64_t repeats = 0;
  std::string bench_out;
  CLI::App* bench_cmd = app.add_subcommand("bench", "micro-benchmark the quantized kernels");
  bench_cmd->add_option("--sizes", sizes, "comma-separated <b>x<dim> pairs, e.g. 64x128,256x256")
      ->required();
  bench_cmd->add_option("--repeats", repeats, "timed repetitions per op")->required();
  bench_cmd->add_option("--out", bench_out, "CSV output path")->required();

  std::string trace_path;
  lowprec::SpikeParams params;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "spike analysis of a training trace");
  analyze_cmd->add_option("--trace", trace_path, "trace file from train")->required();
  analyze_cmd->add_option("--rms-threshold", params.rms_threshold, "RMS spike threshold")
      ->capture_default_str();
  analyze_cmd->add_option("--loss-z", params.loss_z, "loss z-score threshold")
      ->capture_default_str();
  analyze_cmd
      ->add_option("--warmup-skip", params.warmup_skip, "ignore loss spikes at iterations <= this")
      ->capture_default_str();
  analyze_cmd->add_option("--lag-max", params.lag_max, "largest RMS-to-loss lag")
      ->capture_default_str();

  std::string k_list;
  double sigma_q = 0.0;
  int64_t trials = 0;
  CLI::App* noise_cmd =
      app.add_subcommand("noise", "quantization-noise variance law: prediction vs Monte Carlo");
  noise_cmd->add_option("--k", k_list, "comma-separated inner dimensions")->required();
  noise_cmd->add_option("--sigma-q", sigma_q, "quantization-noise stdev")->required();
  noise_cmd->add_option("--trials", trials, "Monte Carlo trials per k")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help/error text
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(config_path);
    if (*bench_cmd) return run_bench(sizes, repeats, bench_out);
    if (*analyze_cmd) return run_analyze(trace_path, params);
    if (*noise_cmd) return run_noise(k_list, sigma_q, trials);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    // Only training has runtime failures (exit 2); elsewhere a failure means
    // bad inputs.
    return *train_cmd ? 2 : 1;
  }
  return 1;
}
