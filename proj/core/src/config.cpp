#include "lowprec/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lowprec/linear.hpp"
#include "lowprec/optimizer.hpp"
#include "lowprec/task.hpp"

namespace lowprec {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(int line_no, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + what);
}

int64_t parse_int(const std::string& v, int line_no) {
  try {
    size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return n;
  } catch (const std::exception&) {
    fail(line_no, "expected an integer, got '" + v + "'");
  }
}

uint64_t parse_uint(const std::string& v, int line_no) {
  try {
    size_t pos = 0;
    unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size() || v.find('-') != std::string::npos)
      throw std::invalid_argument("trailing characters");
    return n;
  } catch (const std::exception&) {
    fail(line_no, "expected a non-negative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& v, int line_no) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    fail(line_no, "expected a real number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, int line_no) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line_no, "expected true or false, got '" + v + "'");
}

NumericFormat parse_numeric_format(const std::string& v, int line_no) {
  if (v == "int8") return NumericFormat::kInt8;
  if (v == "fp8") return NumericFormat::kFp8;
  fail(line_no, "numeric_format must be int8 or fp8, got '" + v + "'");
}

Fp8Format parse_fp8_format(const std::string& v, int line_no) {
  if (v == "e4m3") return Fp8Format::e4m3();
  if (v == "e5m2") return Fp8Format::e5m2();
  fail(line_no, "fp8 format must be e4m3 or e5m2, got '" + v + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (val.empty()) fail(line_no, "empty value for '" + key + "'");
    if (!seen.insert(key).second) fail(line_no, "duplicate key '" + key + "'");

    ModelConfig& m = cfg.model;
    TrainConfig& t = cfg.train;
    OptimizerConfig& o = cfg.train.optimizer;
    if (key == "depth") {
      m.depth = parse_int(val, line_no);
    } else if (key == "dim") {
      m.dim = parse_int(val, line_no);
    } else if (key == "heads") {
      m.heads = parse_int(val, line_no);
    } else if (key == "mlp_ratio") {
      m.mlp_ratio = parse_real(val, line_no);
    } else if (key == "layer_scale.enabled") {
      m.layer_scale_enabled = parse_bool(val, line_no);
    } else if (key == "layer_scale.init") {
      m.layer_scale_init = float(parse_real(val, line_no));
    } else if (key == "linear_mode") {
      try {
        m.linear_mode.variant = parse_linear_variant(val);
      } catch (const std::exception& e) {
        fail(line_no, e.what());
      }
    } else if (key == "numeric_format") {
      m.linear_mode.format = parse_numeric_format(val, line_no);
    } else if (key == "fp8_forward_format") {
      m.linear_mode.fp8_forward = parse_fp8_format(val, line_no);
    } else if (key == "fp8_gradient_format") {
      m.linear_mode.fp8_gradient = parse_fp8_format(val, line_no);
    } else if (key == "embed_norm") {
      m.embed_norm = parse_bool(val, line_no);
    } else if (key == "task") {
      try {
        t.task = parse_task(val);
      } catch (const std::exception& e) {
        fail(line_no, e.what());
      }
    } else if (key == "iterations") {
      t.iterations = parse_int(val, line_no);
    } else if (key == "warmup_iterations") {
      t.warmup_iterations = parse_int(val, line_no);
    } else if (key == "batch_size") {
      t.batch_size = parse_int(val, line_no);
    } else if (key == "seed") {
      t.seed = parse_uint(val, line_no);
    } else if (key == "loss_scale") {
      t.loss_scale = float(parse_real(val, line_no));
      t.loss_scale_set = true;
    } else if (key == "trace_path") {
      t.trace_path = val;
    } else if (key == "optimizer.lr") {
      o.lr = parse_real(val, line_no);
    } else if (key == "optimizer.beta1") {
      o.beta1 = parse_real(val, line_no);
    } else if (key == "optimizer.beta2") {
      o.beta2 = parse_real(val, line_no);
    } else if (key == "optimizer.beta2_warmup_lambda") {
      o.beta2_warmup_lambda = parse_real(val, line_no);
    } else if (key == "optimizer.eps") {
      o.eps = parse_real(val, line_no);
    } else if (key == "optimizer.weight_decay") {
      o.weight_decay = parse_real(val, line_no);
    } else if (key == "optimizer.clipping") {
      try {
        o.clipping = parse_clipping(val);
      } catch (const std::exception& e) {
        fail(line_no, e.what());
      }
    } else if (key == "optimizer.max_grad_norm") {
      o.max_grad_norm = parse_real(val, line_no);
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }

  if (cfg.model.depth < 1) throw std::invalid_argument("config: depth must be >= 1");
  if (cfg.model.dim < 1) throw std::invalid_argument("config: dim must be >= 1");
  if (cfg.model.heads < 1) throw std::invalid_argument("config: heads must be >= 1");
  if (cfg.model.dim % cfg.model.heads != 0)
    throw std::invalid_argument("config: dim must be divisible by heads");
  if (cfg.train.iterations < 1)
    throw std::invalid_argument("config: iterations must be >= 1");
  if (cfg.train.warmup_iterations < 0 ||
      cfg.train.warmup_iterations >= cfg.train.iterations)
    throw std::invalid_argument("config: warmup_iterations must be < iterations");
  if (cfg.train.batch_size < 1)
    throw std::invalid_argument("config: batch_size must be >= 1");
  if (cfg.train.loss_scale_set && !(cfg.train.loss_scale > 0.0f))
    throw std::invalid_argument("config: loss_scale must be > 0");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace lowprec
