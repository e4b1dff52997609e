#pragma once

#include <cstdint>
#include <string>

#include "lowprec/model.hpp"
#include "lowprec/optimizer.hpp"
#include "lowprec/task.hpp"
#include "lowprec/trace.hpp"

namespace lowprec {

// Scalar optimizer settings; the trainer turns lr into the linear-warmup +
// cosine-decay schedule over (warmup_iterations, iterations).
struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double beta2_warmup_lambda = 0.0;  // > 0 switches beta2 to 1 - t^-lambda
  double eps = 1e-6;
  double weight_decay = 0.0;
  Clipping clipping = Clipping::kUpdateClip;
  double max_grad_norm = 1.0;
};

struct TrainConfig {
  TaskKind task = TaskKind::kSyntheticClassify;
  int64_t iterations = 100;
  int64_t warmup_iterations = 10;
  int64_t batch_size = 32;
  uint64_t seed = 1;
  bool loss_scale_set = false;  // true once a loss_scale is configured
  double loss_scale = 1.0;
  std::string trace_path;  // empty: keep the trace in memory only
  OptimizerConfig optimizer;

  // Experiment hooks, programmatic-only (not config-file keys).
  double cluster_noise = 2.0;
  double teacher_scale = 1.0;
  // Iterations <= input_starve_until see inputs multiplied by
  // input_starve_scale: with 0.0 the embedding gradient is exactly zero until
  // the "distribution shift" at input_starve_until + 1.
  int64_t input_starve_until = 0;
  double input_starve_scale = 0.0;
};

struct TrainResult {
  TrainTrace trace;
  ModelParams params;
};

// Deterministic single-threaded loop: batch, forward, loss, loss-scale,
// backward, unscale+filter, optimizer step, telemetry. Parameter init and
// batch generation use independent streams derived from cfg.seed. Throws
// std::runtime_error on a non-finite loss when no scaler is configured and
// on non-finite activations inside the forward pass.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg);

// The lr schedule train() uses, exposed for verification.
double lr_at(const OptimizerConfig& opt, int64_t warmup_iterations, int64_t iterations,
             int64_t t);

// Fraction of argmax-correct predictions over `batches` fresh batches.
double classify_accuracy(const ModelConfig& model_cfg, const ModelParams& params,
                         const TaskSpec& spec, int64_t batch_size, uint64_t seed,
                         int64_t batches);

}  // namespace lowprec
