#include "lowprec/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace lowprec {

namespace {

// Independent sub-streams of the user seed.
constexpr uint64_t kParamStream = 1;
constexpr uint64_t kDataStream = 2;

TaskSpec task_spec_for(const TrainConfig& cfg) {
  TaskSpec spec;
  spec.kind = cfg.task;
  spec.cluster_noise = cfg.cluster_noise;
  spec.teacher_scale = cfg.teacher_scale;
  return spec;
}

}  // namespace

double lr_at(const OptimizerConfig& opt, int64_t warmup_iterations, int64_t iterations,
             int64_t t) {
  if (warmup_iterations > 0 && t <= warmup_iterations)
    return opt.lr * double(t) / double(warmup_iterations);
  if (iterations <= warmup_iterations) return opt.lr;
  const double p = double(t - warmup_iterations) / double(iterations - warmup_iterations);
  return 0.5 * opt.lr * (1.0 + std::cos(M_PI * p));
}

TrainResult train(const ModelConfig& model_cfg_in, const TrainConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("train: iterations must be >= 1");
  if (cfg.warmup_iterations < 0 || cfg.warmup_iterations >= cfg.iterations)
    throw std::invalid_argument("train: need 0 <= warmup_iterations < iterations");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.loss_scale_set && !(cfg.loss_scale > 0))
    throw std::invalid_argument("train: loss_scale must be > 0");

  const TaskSpec spec = task_spec_for(cfg);
  ModelConfig model_cfg = model_cfg_in;
  model_cfg.input_dim = spec.input_dim;
  model_cfg.output_dim = spec.output_dim;

  TrainResult result;
  result.params = init_params(model_cfg, derive_seed(cfg.seed, kParamStream));
  const uint64_t data_seed = derive_seed(cfg.seed, kDataStream);

  auto named = named_tensors(result.params, model_cfg);
  std::vector<TensorOptState> states;
  states.reserve(named.size());
  for (auto& [name, tensor] : named)
    states.push_back(TensorOptState::zeros(tensor->rows(), tensor->cols()));

  OptimizerHyperparams hp;
  hp.lr_schedule = [&cfg](int64_t t) {
    return lr_at(cfg.optimizer, cfg.warmup_iterations, cfg.iterations, t);
  };
  hp.beta1 = cfg.optimizer.beta1;
  hp.beta2 = cfg.optimizer.beta2;
  hp.beta2_warmup_lambda = cfg.optimizer.beta2_warmup_lambda;
  hp.eps = cfg.optimizer.eps;
  hp.weight_decay = cfg.optimizer.weight_decay;
  hp.clipping = cfg.optimizer.clipping;
  hp.max_grad_norm = cfg.optimizer.max_grad_norm;

  LossScaler scaler;
  scaler.scale = cfg.loss_scale_set ? cfg.loss_scale : 1.0;

  const double nan = std::nan("");

  for (int64_t t = 1; t <= cfg.iterations; ++t) {
    Batch batch = make_batch(spec, cfg.batch_size, data_seed, t);
    if (t <= cfg.input_starve_until) {
      const int64_t n = batch.inputs.rows() * batch.inputs.cols();
      for (int64_t i = 0; i < n; ++i)
        batch.inputs.data()[i] = float(double(batch.inputs.data()[i]) * cfg.input_starve_scale);
    }

    IterationRecord rec;
    rec.iter = t;

    ModelTape tape;
    std::vector<double> feats;
    Matrix logits;
    try {
      logits = model_forward(model_cfg, result.params, batch.inputs, &tape, &feats);
    } catch (const std::exception& e) {
      throw std::runtime_error("train: forward failed at iteration " + std::to_string(t) +
                               ": " + e.what());
    }
    for (size_t k = 0; k < feats.size(); ++k) rec.feat_absmean[int64_t(k)] = feats[k];

    Matrix d_logits;
    double loss;
    if (cfg.task == TaskKind::kSyntheticClassify)
      loss = cross_entropy_loss(logits, batch.labels, &d_logits);
    else
      loss = mse_loss(logits, batch.targets, &d_logits);
    rec.loss = loss;
    rec.loss_finite = std::isfinite(loss);

    if (!rec.loss_finite) {
      if (!cfg.loss_scale_set)
        throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(t) +
                                 " with no loss scaler configured");
      // Nothing can be backpropagated; record the iteration as fully skipped.
      for (auto& [name, tensor] : named) {
        rec.rms[name] = nan;
        rec.grad_absmax[name] = nan;
        rec.skipped_tensors.push_back(name);
      }
      result.trace.records.push_back(std::move(rec));
      continue;
    }

    if (scaler.scale != 1.0) {
      const int64_t n = d_logits.rows() * d_logits.cols();
      for (int64_t i = 0; i < n; ++i)
        d_logits.data()[i] = float(double(d_logits.data()[i]) * scaler.scale);
    }

    ModelParams grads = model_backward(model_cfg, result.params, tape, d_logits);
    auto grads_named = named_tensors(grads, model_cfg);

    std::vector<Matrix> grad_list;
    grad_list.reserve(grads_named.size());
    for (auto& [name, g] : grads_named) grad_list.push_back(*g);
    FilterResult filtered = filter_nonfinite(grad_list, scaler);

    std::vector<bool> is_skipped(named.size(), false);
    for (size_t idx : filtered.skipped) is_skipped[idx] = true;

    std::vector<TensorRef> refs;
    std::vector<size_t> ref_index;
    for (size_t i = 0; i < named.size(); ++i) {
      rec.grad_absmax[named[i].first] = double(filtered.grads[i].abs_max());
      if (is_skipped[i]) {
        rec.rms[named[i].first] = nan;
        rec.skipped_tensors.push_back(named[i].first);
        continue;
      }
      TensorRef ref;
      ref.name = named[i].first;
      ref.param = named[i].second;
      ref.grad = &filtered.grads[i];
      ref.state = &states[i];
      refs.push_back(ref);
      ref_index.push_back(i);
    }

    const std::vector<TensorStepInfo> infos = optimizer_step(refs, hp, t);
    for (size_t r = 0; r < refs.size(); ++r)
      rec.rms[named[ref_index[r]].first] = infos[r].rms;

    result.trace.records.push_back(std::move(rec));
  }

  if (!cfg.trace_path.empty()) write_trace(result.trace, cfg.trace_path);
  return result;
}

double classify_accuracy(const ModelConfig& model_cfg_in, const ModelParams& params,
                         const TaskSpec& spec, int64_t batch_size, uint64_t seed,
                         int64_t batches) {
  ModelConfig model_cfg = model_cfg_in;
  model_cfg.input_dim = spec.input_dim;
  model_cfg.output_dim = spec.output_dim;
  int64_t correct = 0, total = 0;
  for (int64_t b = 1; b <= batches; ++b) {
    const Batch batch = make_batch(spec, batch_size, seed, b);
    const Matrix logits = model_forward(model_cfg, params, batch.inputs);
    for (int64_t i = 0; i < logits.rows(); ++i) {
      int64_t arg = 0;
      for (int64_t j = 1; j < logits.cols(); ++j)
        if (logits(i, j) > logits(i, arg)) arg = j;
      correct += arg == batch.labels[size_t(i)];
      ++total;
    }
  }
  return double(correct) / double(total);
}

}  // namespace lowprec
