#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lowprec/trace.hpp"

namespace lowprec {

struct SpikeParams {
  double rms_threshold = 2.3;
  double loss_z = 3.2;
  int64_t warmup_skip = 1000;  // loss-spike detection ignores iterations <= this
  int64_t window = 100;        // trailing window for running mean/std, current excluded
  int64_t min_hits = 2;        // exceedances required within one dedup_window span
  int64_t dedup_window = 10;
  int64_t lag_min = 1;
  int64_t lag_max = 8;
};

// Iterations (start_iter + position) where the series reaches `threshold`;
// runs of exceedances within dedup_window collapse to the earliest.
std::vector<int64_t> detect_rms_spikes(const std::vector<double>& series, double threshold,
                                       int64_t dedup_window, int64_t start_iter = 0);

// Iterations t > warmup_skip where loss exceeds the trailing-window mean by
// z running standard deviations (population std over the `window` previous
// values, current excluded; zero std disables detection at that point).
// A cluster is emitted (at its earliest member) only when at least min_hits
// exceedances fall within one dedup_window span.
std::vector<int64_t> detect_loss_spikes(const std::vector<double>& series, double z,
                                        int64_t warmup_skip, int64_t window, int64_t min_hits,
                                        int64_t dedup_window, int64_t start_iter = 0);

struct MatchedPair {
  int64_t rms_iter = 0;
  int64_t loss_iter = 0;
  int64_t lag = 0;  // loss_iter - rms_iter, in [lag_min, lag_max]
};

struct MatchResult {
  std::vector<MatchedPair> matched;
  std::vector<int64_t> unmatched_loss;
};

// A loss spike at t matches when an RMS spike exists in [t-lag_max, t-lag_min];
// the nearest (smallest-lag) qualifying spike wins.
MatchResult match_spikes(const std::vector<int64_t>& loss_spikes,
                         const std::vector<int64_t>& rms_spikes, int64_t lag_min = 1,
                         int64_t lag_max = 8);

// |union over spikes t of [t+lag_min, t+lag_max]| / eligible_iterations.
double chance_probability(const std::vector<int64_t>& rms_spikes, int64_t eligible_iterations,
                          int64_t lag_min = 1, int64_t lag_max = 8);

struct SpikeReport {
  std::string rms_layer;
  std::vector<int64_t> rms_spike_iters;
  std::vector<int64_t> loss_spike_iters;
  std::vector<MatchedPair> matched_pairs;
  std::vector<int64_t> unmatched_loss_spikes;
  double chance_probability = 0.0;
  std::map<int64_t, double> rms_values;   // value at each reported RMS spike
  std::map<int64_t, double> loss_values;  // value at each reported loss spike
};

// Full pipeline over one trace: spike detection on the named layer's RMS
// series and on the loss series, matching, and the chance probability
// (eligible = iterations past warmup_skip). Throws on an unknown layer name.
// The negative control is this same call with a mid-depth layer.
SpikeReport analyze_trace(const TrainTrace& trace, const std::string& rms_layer,
                          const SpikeParams& params);

// One line per spike (kind, iter, value, matched_to, lag) plus a summary.
std::string render_spike_report(const SpikeReport& report);

}  // namespace lowprec
