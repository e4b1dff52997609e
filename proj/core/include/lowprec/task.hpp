#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lowprec/matrix.hpp"

namespace lowprec {

enum class TaskKind { kSyntheticClassify, kSyntheticRegress };

const char* to_string(TaskKind kind);
TaskKind parse_task(const std::string& name);

// Synthetic data generators. Classify draws each sample from one of
// output_dim Gaussian clusters whose centers come from a fixed internal
// stream (identical across user seeds); regress pushes unit-Gaussian inputs
// through a frozen random linear teacher. Batches are deterministic per
// (seed, iteration).
struct TaskSpec {
  TaskKind kind = TaskKind::kSyntheticClassify;
  int64_t input_dim = 32;
  int64_t output_dim = 8;
  double cluster_noise = 2.0;   // classify: per-dimension noise stdev
  double teacher_scale = 1.0;   // regress: 0 makes all targets exactly zero
};

struct Batch {
  Matrix inputs;                // batch_size x input_dim
  std::vector<int64_t> labels;  // classify only
  Matrix targets;               // regress only, batch_size x output_dim
};

Batch make_batch(const TaskSpec& spec, int64_t batch_size, uint64_t seed, int64_t iteration);

// Cluster centers used by the classify task (output_dim x input_dim).
Matrix cluster_centers(const TaskSpec& spec);

}  // namespace lowprec
