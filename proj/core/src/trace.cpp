#include "lowprec/trace.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace lowprec {

namespace {

using nlohmann::json;

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double json_number(const json& v, const char* what) {
  if (v.is_null()) return std::nan("");
  if (!v.is_number()) throw std::runtime_error(std::string("trace: non-numeric ") + what);
  return v.get<double>();
}

}  // namespace

std::string trace_line(const IterationRecord& rec) {
  json obj;  // backed by std::map: keys serialize in lexicographic order
  obj["iter"] = rec.iter;
  obj["loss"] = number_or_null(rec.loss);
  obj["loss_finite"] = rec.loss_finite;
  for (const auto& [name, v] : rec.rms) obj["rms." + name] = number_or_null(v);
  for (const auto& [name, v] : rec.grad_absmax)
    obj["grad_absmax." + name] = number_or_null(v);
  for (const auto& [k, v] : rec.feat_absmean)
    obj["feat_absmean." + std::to_string(k)] = number_or_null(v);
  obj["skipped_tensors"] = rec.skipped_tensors;
  return obj.dump();
}

void write_trace(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("trace: cannot open for writing: " + path);
  for (const IterationRecord& rec : trace.records) out << trace_line(rec) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("trace: write failed: " + path);
}

TrainTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("trace: cannot open: " + path);
  TrainTrace trace;
  std::string line;
  int64_t lineno = 0;
  int64_t prev_iter = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("trace: parse error at line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("iter") || !obj.contains("loss"))
      throw std::runtime_error("trace: missing iter/loss at line " + std::to_string(lineno));
    IterationRecord rec;
    rec.iter = obj["iter"].get<int64_t>();
    rec.loss = json_number(obj["loss"], "loss");
    rec.loss_finite = obj.value("loss_finite", std::isfinite(rec.loss));
    for (const auto& [key, v] : obj.items()) {
      if (key.rfind("rms.", 0) == 0)
        rec.rms[key.substr(4)] = json_number(v, key.c_str());
      else if (key.rfind("grad_absmax.", 0) == 0)
        rec.grad_absmax[key.substr(12)] = json_number(v, key.c_str());
      else if (key.rfind("feat_absmean.", 0) == 0)
        rec.feat_absmean[std::stoll(key.substr(13))] = json_number(v, key.c_str());
      else if (key == "skipped_tensors")
        rec.skipped_tensors = v.get<std::vector<std::string>>();
    }
    if (!trace.records.empty() && rec.iter <= prev_iter)
      throw std::runtime_error("trace: iterations not strictly increasing at line " +
                               std::to_string(lineno));
    prev_iter = rec.iter;
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace lowprec
