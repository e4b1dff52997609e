#include "lowprec/analyze.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace lowprec {

std::string pick_control_layer(const TrainTrace& trace) {
  if (trace.records.empty()) throw std::invalid_argument("analyze: empty trace");
  const auto& rms = trace.records.front().rms;
  const std::string prefix = "blocks.";
  int64_t max_idx = -1;
  for (const auto& [key, value] : rms) {
    (void)value;
    if (key.rfind(prefix, 0) != 0) continue;
    size_t dot = key.find('.', prefix.size());
    if (dot == std::string::npos) continue;
    try {
      max_idx = std::max(max_idx, int64_t(std::stoll(key.substr(prefix.size(), dot - prefix.size()))));
    } catch (const std::exception&) {
    }
  }
  if (max_idx < 0)
    throw std::invalid_argument("analyze: trace has no blocks.* rms series to use as a control");
  const std::string block = prefix + std::to_string(max_idx / 2) + ".";
  const std::string preferred = block + "attn.wq";
  if (rms.count(preferred)) return preferred;
  for (const auto& [key, value] : rms) {
    (void)value;
    if (key.rfind(block, 0) == 0) return key;  // map order: first key of the block
  }
  throw std::invalid_argument("analyze: no rms series under " + block);
}

AnalyzeResult analyze_trace_file(const std::string& trace_path, const AnalyzeOptions& options) {
  AnalyzeResult result;
  TrainTrace trace = read_trace(trace_path);
  const std::string control =
      options.control_layer.empty() ? pick_control_layer(trace) : options.control_layer;
  result.primary = analyze_trace(trace, options.rms_layer, options.params);
  result.control = analyze_trace(trace, control, options.params);
  result.report_text = render_spike_report(result.primary) + "negative control:\n" +
                       render_spike_report(result.control);

  const std::string report_path = trace_path + ".report";
  std::ofstream out(report_path, std::ios::binary);
  if (!out) throw std::runtime_error("analyze: cannot write " + report_path);
  out << result.report_text;
  out.flush();
  if (!out) throw std::runtime_error("analyze: write failed: " + report_path);
  return result;
}

}  // namespace lowprec
