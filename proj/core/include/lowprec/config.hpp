#pragma once

#include <string>

#include "lowprec/model.hpp"
#include "lowprec/trainer.hpp"

namespace lowprec {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

// Parses a `key = value` document. `#` starts a comment, blank lines are
// skipped, keys may appear at most once. The key set is fixed:
//
//   model:      depth, dim, heads, mlp_ratio, layer_scale.enabled,
//               layer_scale.init, linear_mode, numeric_format,
//               fp8_forward_format, fp8_gradient_format, embed_norm
//   training:   task, iterations, warmup_iterations, batch_size, seed,
//               loss_scale, trace_path
//   optimizer:  optimizer.lr, optimizer.beta1, optimizer.beta2,
//               optimizer.beta2_warmup_lambda, optimizer.eps,
//               optimizer.weight_decay, optimizer.clipping,
//               optimizer.max_grad_norm
//
// Unknown keys, malformed lines, duplicate keys, unparsable values, and
// violated invariants (warmup_iterations < iterations, dim divisible by
// heads) all throw std::invalid_argument naming the offending line.
// Omitted keys keep their defaults. Input/output widths are fixed by the
// task, not by the file.
RunConfig parse_config_text(const std::string& text);

// parse_config_text over the file's contents; unreadable file throws.
RunConfig load_config(const std::string& path);

}  // namespace lowprec
