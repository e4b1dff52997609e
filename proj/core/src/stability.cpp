#include "lowprec/stability.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lowprec {

namespace {

// Collapse sorted raw exceedances: emit the earliest, drop followers closer
// than dedup_window, repeat.
std::vector<int64_t> dedup_earliest(const std::vector<int64_t>& raw, int64_t dedup_window) {
  std::vector<int64_t> out;
  for (int64_t t : raw)
    if (out.empty() || t - out.back() >= dedup_window) out.push_back(t);
  return out;
}

}  // namespace

std::vector<int64_t> detect_rms_spikes(const std::vector<double>& series, double threshold,
                                       int64_t dedup_window, int64_t start_iter) {
  if (series.empty()) throw std::invalid_argument("detect_rms_spikes: empty series");
  std::vector<int64_t> raw;
  for (size_t i = 0; i < series.size(); ++i)
    if (series[i] >= threshold) raw.push_back(start_iter + int64_t(i));
  return dedup_earliest(raw, dedup_window);
}

std::vector<int64_t> detect_loss_spikes(const std::vector<double>& series, double z,
                                        int64_t warmup_skip, int64_t window, int64_t min_hits,
                                        int64_t dedup_window, int64_t start_iter) {
  if (window < 1) throw std::invalid_argument("detect_loss_spikes: window must be >= 1");
  if (int64_t(series.size()) < warmup_skip + window)
    throw std::invalid_argument("detect_loss_spikes: series shorter than warmup_skip + window");

  std::vector<int64_t> raw;
  for (size_t i = 0; i < series.size(); ++i) {
    const int64_t t = start_iter + int64_t(i);
    if (t <= warmup_skip || int64_t(i) < window) continue;
    double mean = 0.0;
    for (int64_t j = int64_t(i) - window; j < int64_t(i); ++j) mean += series[size_t(j)];
    mean /= double(window);
    double var = 0.0;
    for (int64_t j = int64_t(i) - window; j < int64_t(i); ++j) {
      const double d = series[size_t(j)] - mean;
      var += d * d;
    }
    const double stdev = std::sqrt(var / double(window));
    if (stdev > 0.0 && series[i] > mean + z * stdev) raw.push_back(t);
  }

  // require min_hits exceedances inside one dedup_window span; emit the
  // earliest and consume its whole window, else re-anchor on the next hit
  std::vector<int64_t> out;
  size_t i = 0;
  while (i < raw.size()) {
    size_t j = i;
    while (j < raw.size() && raw[j] - raw[i] < dedup_window) ++j;
    if (int64_t(j - i) >= min_hits) {
      out.push_back(raw[i]);
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

MatchResult match_spikes(const std::vector<int64_t>& loss_spikes,
                         const std::vector<int64_t>& rms_spikes, int64_t lag_min,
                         int64_t lag_max) {
  MatchResult r;
  for (int64_t t : loss_spikes) {
    // nearest qualifying spike = largest rms_iter in [t - lag_max, t - lag_min]
    int64_t best = INT64_MIN;
    for (int64_t s : rms_spikes)
      if (s >= t - lag_max && s <= t - lag_min && s > best) best = s;
    if (best != INT64_MIN)
      r.matched.push_back(MatchedPair{best, t, t - best});
    else
      r.unmatched_loss.push_back(t);
  }
  return r;
}

double chance_probability(const std::vector<int64_t>& rms_spikes, int64_t eligible_iterations,
                          int64_t lag_min, int64_t lag_max) {
  if (eligible_iterations <= 0)
    throw std::invalid_argument("chance_probability: eligible_iterations must be > 0");
  std::vector<int64_t> sorted = rms_spikes;
  std::sort(sorted.begin(), sorted.end());
  int64_t covered = 0;
  int64_t reach = INT64_MIN;  // highest iteration already counted
  for (int64_t t : sorted) {
    const int64_t lo = std::max(t + lag_min, reach + 1);
    const int64_t hi = t + lag_max;
    if (hi >= lo) {
      covered += hi - lo + 1;
      reach = hi;
    }
  }
  return double(covered) / double(eligible_iterations);
}

SpikeReport analyze_trace(const TrainTrace& trace, const std::string& rms_layer,
                          const SpikeParams& params) {
  if (trace.records.empty()) throw std::invalid_argument("analyze_trace: empty trace");
  std::vector<double> rms_series, loss_series;
  rms_series.reserve(trace.records.size());
  loss_series.reserve(trace.records.size());
  for (const IterationRecord& rec : trace.records) {
    auto it = rec.rms.find(rms_layer);
    if (it == rec.rms.end())
      throw std::invalid_argument("analyze_trace: trace has no rms series for layer " +
                                  rms_layer);
    rms_series.push_back(it->second);
    loss_series.push_back(rec.loss);
  }
  const int64_t start = trace.records.front().iter;

  SpikeReport rep;
  rep.rms_layer = rms_layer;
  rep.rms_spike_iters =
      detect_rms_spikes(rms_series, params.rms_threshold, params.dedup_window, start);
  // Shorter traces have no eligible positions, hence no loss spikes; the
  // low-level detector treats that length as a caller error.
  if (int64_t(loss_series.size()) >= params.warmup_skip + params.window)
    rep.loss_spike_iters =
        detect_loss_spikes(loss_series, params.loss_z, params.warmup_skip, params.window,
                           params.min_hits, params.dedup_window, start);
  MatchResult m =
      match_spikes(rep.loss_spike_iters, rep.rms_spike_iters, params.lag_min, params.lag_max);
  rep.matched_pairs = std::move(m.matched);
  rep.unmatched_loss_spikes = std::move(m.unmatched_loss);

  int64_t eligible = 0;
  for (const IterationRecord& rec : trace.records)
    if (rec.iter > params.warmup_skip) ++eligible;
  rep.chance_probability = eligible > 0 ? chance_probability(rep.rms_spike_iters, eligible,
                                                             params.lag_min, params.lag_max)
                                        : 0.0;

  for (int64_t t : rep.rms_spike_iters)
    rep.rms_values[t] = rms_series[size_t(t - start)];
  for (int64_t t : rep.loss_spike_iters)
    rep.loss_values[t] = loss_series[size_t(t - start)];
  return rep;
}

std::string render_spike_report(const SpikeReport& report) {
  std::ostringstream out;
  out << "layer " << report.rms_layer << ": " << report.rms_spike_iters.size()
      << " rms spikes, " << report.loss_spike_iters.size() << " loss spikes, "
      << report.matched_pairs.size() << " matched, chance_probability "
      << report.chance_probability << "\n";
  for (int64_t t : report.rms_spike_iters)
    out << "rms_spike iter=" << t << " value=" << report.rms_values.at(t) << "\n";
  std::map<int64_t, MatchedPair> by_loss;
  for (const MatchedPair& p : report.matched_pairs) by_loss[p.loss_iter] = p;
  for (int64_t t : report.loss_spike_iters) {
    out << "loss_spike iter=" << t << " value=" << report.loss_values.at(t);
    auto it = by_loss.find(t);
    if (it != by_loss.end())
      out << " matched_to=" << it->second.rms_iter << " lag=" << it->second.lag;
    else
      out << " matched_to=none";
    out << "\n";
  }
  return out.str();
}

}  // namespace lowprec
