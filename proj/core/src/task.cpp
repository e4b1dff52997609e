#include "lowprec/task.hpp"

#include <cmath>
#include <stdexcept>

namespace lowprec {

namespace {

// Internal streams for the task's frozen randomness, independent of the
// user's seed so every run sees the same geometry.
constexpr uint64_t kCentersSeed = 0x636c757374657273ULL;
constexpr uint64_t kTeacherSeed = 0x7465616368657200ULL;

Matrix teacher_weights(const TaskSpec& spec) {
  const double stdev = spec.teacher_scale / std::sqrt(double(spec.input_dim));
  return gaussian_matrix(spec.output_dim, spec.input_dim, 0.0, stdev, kTeacherSeed);
}

}  // namespace

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kSyntheticClassify: return "synthetic_classify";
    case TaskKind::kSyntheticRegress: return "synthetic_regress";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  if (name == "synthetic_classify") return TaskKind::kSyntheticClassify;
  if (name == "synthetic_regress") return TaskKind::kSyntheticRegress;
  throw std::invalid_argument("unknown task: " + name);
}

Matrix cluster_centers(const TaskSpec& spec) {
  return gaussian_matrix(spec.output_dim, spec.input_dim, 0.0, 1.0, kCentersSeed);
}

Batch make_batch(const TaskSpec& spec, int64_t batch_size, uint64_t seed, int64_t iteration) {
  if (batch_size < 1) throw std::invalid_argument("make_batch: batch_size must be >= 1");
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw std::invalid_argument("make_batch: dimensions must be >= 1");
  Rng rng(derive_seed(seed, uint64_t(iteration)));
  Batch batch;
  batch.inputs = Matrix(batch_size, spec.input_dim);

  if (spec.kind == TaskKind::kSyntheticClassify) {
    const Matrix centers = cluster_centers(spec);
    batch.labels.resize(size_t(batch_size));
    for (int64_t i = 0; i < batch_size; ++i) {
      const int64_t label = int64_t(rng.uniform_int(uint64_t(spec.output_dim)));
      batch.labels[size_t(i)] = label;
      for (int64_t j = 0; j < spec.input_dim; ++j)
        batch.inputs(i, j) =
            float(double(centers(label, j)) + rng.gaussian(0.0, spec.cluster_noise));
    }
    return batch;
  }

  for (int64_t i = 0; i < batch_size; ++i)
    for (int64_t j = 0; j < spec.input_dim; ++j)
      batch.inputs(i, j) = float(rng.gaussian());
  batch.targets = matmul(batch.inputs, teacher_weights(spec));
  return batch;
}

}  // namespace lowprec
