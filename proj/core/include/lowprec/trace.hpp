#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lowprec {

// One training iteration's telemetry. Serialized as one JSON object per line
// with flat dotted keys: iter, loss, loss_finite, rms.<tensor>,
// grad_absmax.<tensor>, feat_absmean.<block_index>, skipped_tensors.
// Non-finite numeric values serialize as null; loss_finite records whether
// the loss was finite when it happened.
struct IterationRecord {
  int64_t iter = 0;
  double loss = 0.0;
  bool loss_finite = true;
  std::map<std::string, double> rms;
  std::map<std::string, double> grad_absmax;
  std::map<int64_t, double> feat_absmean;
  std::vector<std::string> skipped_tensors;
};

struct TrainTrace {
  std::vector<IterationRecord> records;
};

// Exact serialized form of one record (no trailing newline). Key order is
// lexicographic, so equal records produce identical bytes.
std::string trace_line(const IterationRecord& rec);

void write_trace(const TrainTrace& trace, const std::string& path);

// Throws std::runtime_error on unreadable or malformed input.
TrainTrace read_trace(const std::string& path);

}  // namespace lowprec
