#pragma once

#include <string>

#include "lowprec/stability.hpp"

namespace lowprec {

struct AnalyzeOptions {
  SpikeParams params;
  std::string rms_layer = "embed.weight";
  // Negative-control layer; empty picks one automatically: the first
  // projection of the middle block found in the trace's RMS keys.
  std::string control_layer;
};

struct AnalyzeResult {
  SpikeReport primary;
  SpikeReport control;
  std::string report_text;  // both sections, ready to print
};

// Loads the trace, runs spike analysis on the primary layer and the
// negative-control layer, and writes report_text to `<trace_path>.report`.
// Throws on unreadable/malformed traces and on unknown layer names.
AnalyzeResult analyze_trace_file(const std::string& trace_path, const AnalyzeOptions& options);

// The control pick used when AnalyzeOptions.control_layer is empty.
std::string pick_control_layer(const TrainTrace& trace);

}  // namespace lowprec
