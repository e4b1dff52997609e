#include "lowprec/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace lowprec {

const char* to_string(Clipping c) {
  switch (c) {
    case Clipping::kNone: return "none";
    case Clipping::kUpdateClip: return "update_clip";
    case Clipping::kGradClip: return "grad_clip";
  }
  return "?";
}

Clipping parse_clipping(const std::string& name) {
  if (name == "none") return Clipping::kNone;
  if (name == "update_clip") return Clipping::kUpdateClip;
  if (name == "grad_clip") return Clipping::kGradClip;
  throw std::invalid_argument("unknown clipping mode: " + name);
}

TensorOptState TensorOptState::zeros(int64_t rows, int64_t cols) {
  TensorOptState s;
  s.v = Matrix(rows, cols);
  s.u = Matrix(rows, cols);
  return s;
}

double compute_rms(const Matrix& g, const Matrix& u, double eps) {
  if (!g.same_shape(u)) throw std::invalid_argument("compute_rms: shape mismatch");
  const double floor = eps * eps;
  double acc = 0.0;
  const int64_t n = g.rows() * g.cols();
  for (int64_t i = 0; i < n; ++i) {
    const double gi = double(g.data()[i]);
    const double ui = std::max(double(u.data()[i]), floor);
    acc += gi * gi / ui;
  }
  return std::sqrt(acc / double(n));
}

double beta2_warmup(int64_t t, double lambda) {
  if (t < 1) throw std::invalid_argument("beta2_warmup: t must be >= 1");
  if (lambda <= 0) throw std::invalid_argument("beta2_warmup: lambda must be > 0");
  const double b = 1.0 - std::pow(double(t), -lambda);
  return std::min(b, std::nextafter(1.0, 0.0));
}

namespace {

double global_norm(const std::vector<Matrix>& grads) {
  double ss = 0.0;
  for (const Matrix& g : grads) {
    const int64_t n = g.rows() * g.cols();
    for (int64_t i = 0; i < n; ++i) ss += double(g.data()[i]) * double(g.data()[i]);
  }
  return std::sqrt(ss);
}

// Debiased decay rate: beta * (1 - beta^(t-1)) / (1 - beta^t); zero at t=1.
double debias(double beta, int64_t t) {
  if (beta == 0.0) return 0.0;
  const double num = 1.0 - std::pow(beta, double(t - 1));
  const double den = 1.0 - std::pow(beta, double(t));
  return beta * num / den;
}

}  // namespace

void grad_clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  if (max_norm <= 0) throw std::invalid_argument("grad_clip: max_norm must be > 0");
  const double norm = global_norm(grads);
  if (!(norm > max_norm)) return;
  const double c = max_norm / norm;
  for (Matrix& g : grads) {
    const int64_t n = g.rows() * g.cols();
    for (int64_t i = 0; i < n; ++i) g.data()[i] = float(double(g.data()[i]) * c);
  }
}

FilterResult filter_nonfinite(const std::vector<Matrix>& grads, const LossScaler& scaler) {
  if (!(scaler.scale > 0)) throw std::invalid_argument("loss scaler: scale must be > 0");
  FilterResult r;
  r.grads.reserve(grads.size());
  for (size_t i = 0; i < grads.size(); ++i) {
    Matrix g = grads[i];
    const int64_t n = g.rows() * g.cols();
    for (int64_t j = 0; j < n; ++j)
      g.data()[j] = float(double(g.data()[j]) / scaler.scale);
    if (!g.all_finite()) r.skipped.push_back(i);
    r.grads.push_back(std::move(g));
  }
  if (!scaler.per_tensor_skip && !r.skipped.empty()) {
    r.skipped.clear();
    for (size_t i = 0; i < grads.size(); ++i) r.skipped.push_back(i);
  }
  return r;
}

std::vector<TensorStepInfo> optimizer_step(std::vector<TensorRef>& tensors,
                                           const OptimizerHyperparams& hp, int64_t t) {
  if (t < 1) throw std::invalid_argument("optimizer_step: t must be >= 1");
  if (!hp.lr_schedule) throw std::invalid_argument("optimizer_step: lr_schedule not set");
  for (const TensorRef& ref : tensors) {
    if (!ref.param || !ref.grad || !ref.state)
      throw std::invalid_argument("optimizer_step: null tensor reference");
    if (!ref.param->same_shape(*ref.grad) || !ref.param->same_shape(ref.state->v) ||
        !ref.param->same_shape(ref.state->u))
      throw std::invalid_argument("optimizer_step: shape mismatch for " + ref.name);
  }

  const double alpha = hp.lr_schedule(t);
  const double b1 = debias(hp.beta1, t);
  const double b2 = hp.beta2_warmup_lambda > 0 ? beta2_warmup(t, hp.beta2_warmup_lambda)
                                               : debias(hp.beta2, t);

  // Gradient clipping couples tensors through the global norm; everything
  // else below is per-tensor.
  double clip = 1.0;
  if (hp.clipping == Clipping::kGradClip) {
    double ss = 0.0;
    for (const TensorRef& ref : tensors) {
      const Matrix& g = *ref.grad;
      const int64_t n = g.rows() * g.cols();
      for (int64_t i = 0; i < n; ++i) ss += double(g.data()[i]) * double(g.data()[i]);
    }
    const double norm = std::sqrt(ss);
    if (norm > hp.max_grad_norm) clip = hp.max_grad_norm / norm;
  }

  std::vector<TensorStepInfo> infos(tensors.size());
  for (size_t ti = 0; ti < tensors.size(); ++ti) {
    TensorRef& ref = tensors[ti];
    Matrix& theta = *ref.param;
    Matrix& v = ref.state->v;
    Matrix& u = ref.state->u;
    const Matrix& g_raw = *ref.grad;
    const int64_t n = theta.rows() * theta.cols();

    for (int64_t i = 0; i < n; ++i) {
      const double g = double(g_raw.data()[i]) * clip;
      v.data()[i] = float(b1 * double(v.data()[i]) + (1.0 - b1) * g);
      u.data()[i] = float(b2 * double(u.data()[i]) + (1.0 - b2) * g * g);
    }

    double rms;
    {
      const double floor = hp.eps * hp.eps;
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const double g = double(g_raw.data()[i]) * clip;
        acc += g * g / std::max(double(u.data()[i]), floor);
      }
      rms = std::sqrt(acc / double(n));
    }

    const double eta =
        hp.clipping == Clipping::kUpdateClip ? alpha / std::max(1.0, rms) : alpha;

    for (int64_t i = 0; i < n; ++i) {
      const double th = double(theta.data()[i]);
      const double upd =
          double(v.data()[i]) / (std::sqrt(double(u.data()[i])) + hp.eps);
      theta.data()[i] = float(th - eta * hp.weight_decay * th - eta * upd);
    }

    infos[ti] = TensorStepInfo{rms, eta};
  }
  return infos;
}

}  // namespace lowprec
