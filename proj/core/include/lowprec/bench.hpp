#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lowprec {

struct BenchSize {
  int64_t b = 0;    // batch rows
  int64_t dim = 0;  // layer width (the layer is dim x dim)
};

struct BenchRow {
  std::string op;
  int64_t b = 0;
  int64_t dim = 0;
  int64_t repeats = 0;
  double mean_ns = 0.0;
  double p50_ns = 0.0;
};

// Wall-times each op `repeats` times per size (one warmup call excluded):
//   quantize_rowwise             on the b x dim activation
//   quantize_tensorwise          on the dim x dim weight
//   quantize_tensorwise_transpose on the dim x dim weight
//   int8_matmul_dequant          on the pre-quantized pair
//   matmul                       the working-precision reference product
//   switchback_fwd_bwd           full SwitchBack(int8) forward + backward
// The closing quantize_fraction row per size carries a dimensionless value
// in both ns columns: the time the SwitchBack forward+backward spends in its
// four quantize calls (row-wise on X and on G, tensor-wise and
// tensor-wise-transpose on W) divided by the measured fwd+bwd time.
std::vector<BenchRow> run_bench(const std::vector<BenchSize>& sizes, int64_t repeats,
                                uint64_t seed = 42);

// Header `op,b,dim,repeats,mean_ns,p50_ns` plus one line per row.
std::string bench_csv(const std::vector<BenchRow>& rows);

// "64x128,256x256" -> {{64,128},{256,256}}; throws on malformed tokens.
std::vector<BenchSize> parse_bench_sizes(const std::string& list);

}  // namespace lowprec
