#include "lowprec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "lowprec/linear.hpp"
#include "lowprec/matrix.hpp"
#include "lowprec/quantize.hpp"

namespace lowprec {
namespace {

volatile double g_sink = 0.0;  // keeps timed results observable

struct Stats {
  double mean_ns = 0.0;
  double p50_ns = 0.0;
};

template <typename F>
Stats time_op(int64_t repeats, F&& op) {
  op();  // warmup
  std::vector<double> ns(static_cast<size_t>(repeats));
  for (int64_t r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    op();
    auto t1 = std::chrono::steady_clock::now();
    ns[size_t(r)] = std::chrono::duration<double, std::nano>(t1 - t0).count();
  }
  Stats s;
  for (double v : ns) s.mean_ns += v;
  s.mean_ns /= double(repeats);
  std::sort(ns.begin(), ns.end());
  size_t n = ns.size();
  s.p50_ns = n % 2 ? ns[n / 2] : 0.5 * (ns[n / 2 - 1] + ns[n / 2]);
  return s;
}

}  // namespace

std::vector<BenchRow> run_bench(const std::vector<BenchSize>& sizes, int64_t repeats,
                                uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
  if (sizes.empty()) throw std::invalid_argument("bench: at least one size required");
  std::vector<BenchRow> rows;
  for (const BenchSize& sz : sizes) {
    if (sz.b < 1 || sz.dim < 1) throw std::invalid_argument("bench: sizes must be >= 1");
    const Matrix x = gaussian_matrix(sz.b, sz.dim, 0.0f, 1.0f, derive_seed(seed, 1));
    const Matrix w = gaussian_matrix(sz.dim, sz.dim, 0.0f, 1.0f, derive_seed(seed, 2));
    const Matrix g = gaussian_matrix(sz.b, sz.dim, 0.0f, 1.0f, derive_seed(seed, 3));
    const QuantizedMatrix qx = quantize_rowwise(x);
    const QuantizedMatrix qw = quantize_tensorwise(w);
    const LinearMode mode{LinearVariant::kSwitchBack, NumericFormat::kInt8, Fp8Format::e4m3(),
                          Fp8Format::e5m2()};

    auto push = [&](const std::string& op, const Stats& s) {
      rows.push_back({op, sz.b, sz.dim, repeats, s.mean_ns, s.p50_ns});
    };

    const Stats q_row = time_op(repeats, [&] { g_sink += quantize_rowwise(x).state[0]; });
    push("quantize_rowwise", q_row);
    const Stats q_tensor = time_op(repeats, [&] { g_sink += quantize_tensorwise(w).state[0]; });
    push("quantize_tensorwise", q_tensor);
    const Stats q_tt =
        time_op(repeats, [&] { g_sink += quantize_tensorwise_transpose(w).state[0]; });
    push("quantize_tensorwise_transpose", q_tt);
    const Stats mm_int8 =
        time_op(repeats, [&] { g_sink += double(int8_matmul_dequant(qx, qw)(0, 0)); });
    push("int8_matmul_dequant", mm_int8);
    const Stats mm_ref = time_op(repeats, [&] { g_sink += double(matmul(x, w)(0, 0)); });
    push("matmul", mm_ref);
    const Stats sb = time_op(repeats, [&] {
      LinearContext ctx;
      Matrix y = linear_forward(mode, x, w, &ctx);
      auto grads = linear_backward(mode, ctx, g);
      g_sink += double(y(0, 0)) + double(grads.first(0, 0)) + double(grads.second(0, 0));
    });
    push("switchback_fwd_bwd", sb);

    // One forward+backward quantizes X and G row-wise and W both
    // tensor-wise ways; G shares X's shape so q_row stands in for both.
    BenchRow frac{"quantize_fraction", sz.b, sz.dim, repeats, 0.0, 0.0};
    frac.mean_ns =
        (2.0 * q_row.mean_ns + q_tensor.mean_ns + q_tt.mean_ns) / sb.mean_ns;
    frac.p50_ns = (2.0 * q_row.p50_ns + q_tensor.p50_ns + q_tt.p50_ns) / sb.p50_ns;
    rows.push_back(frac);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "op,b,dim,repeats,mean_ns,p50_ns\n";
  out << std::setprecision(15);
  for (const BenchRow& r : rows)
    out << r.op << ',' << r.b << ',' << r.dim << ',' << r.repeats << ',' << r.mean_ns << ','
        << r.p50_ns << '\n';
  return out.str();
}

std::vector<BenchSize> parse_bench_sizes(const std::string& list) {
  std::vector<BenchSize> sizes;
  std::istringstream in(list);
  std::string token;
  while (std::getline(in, token, ',')) {
    size_t x = token.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= token.size())
      throw std::invalid_argument("bench: size token must be <b>x<dim>, got '" + token + "'");
    try {
      size_t p1 = 0, p2 = 0;
      int64_t b = std::stoll(token.substr(0, x), &p1);
      int64_t dim = std::stoll(token.substr(x + 1), &p2);
      if (p1 != x || p2 != token.size() - x - 1) throw std::invalid_argument("trailing");
      sizes.push_back({b, dim});
    } catch (const std::exception&) {
      throw std::invalid_argument("bench: size token must be <b>x<dim>, got '" + token + "'");
    }
  }
  if (sizes.empty()) throw std::invalid_argument("bench: no sizes given");
  return sizes;
}

}  // namespace lowprec
