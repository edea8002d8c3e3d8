#include "tdseg/bench.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "tdseg/losses.hpp"
#include "tdseg/network.hpp"

namespace tdseg {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

void bench_network(std::ostringstream& o, Branches branches, int base_width) {
  NetworkConfig cfg;
  cfg.branches = branches;
  cfg.base_width = base_width;
  cfg.in_channels = 12;
  cfg.in_size = 64;
  Model m = build_network(cfg, 42);
  Rng rng(99);
  Tensor x({1, cfg.in_channels, cfg.in_size, cfg.in_size});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = uniform_real(rng, -1.0f, 1.0f);

  ForwardTrace trace;
  Tensor probs = forward(m, x, Mode::kTrain, &trace);  // warm-up
  auto t0 = std::chrono::steady_clock::now();
  const int reps = 3;
  for (int i = 0; i < reps; ++i) probs = forward(m, x, Mode::kTrain, &trace);
  double fwd_ms = ms_since(t0) / reps;

  Tensor grad_probs(probs.shape());
  for (std::int64_t i = 0; i < grad_probs.size(); ++i) grad_probs[i] = 1.0f / grad_probs.size();
  m.params.zero_grads();
  backward(m, trace, grad_probs);  // warm-up
  t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) {
    m.params.zero_grads();
    backward(m, trace, grad_probs);
  }
  double bwd_ms = ms_since(t0) / reps;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%-16s base=%d  params=%-8lld forward %8.2f ms  backward %8.2f ms\n",
                branches == Branches::kHtOnly ? "ht_unet" : "td_fusion_unet", base_width,
                static_cast<long long>(param_count(m.params)), fwd_ms, bwd_ms);
  o << buf;
}

void bench_fwht(std::ostringstream& o) {
  const int n = 128;
  const int reps = 20000;
  Rng rng(7);
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = uniform_real(rng, -1.0f, 1.0f);

  std::vector<float> work = v;
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) {
    work = v;
    fwht_1d(work);
  }
  double fast_ms = ms_since(t0);

  MatrixRM h = hadamard_matrix(n).cast<float>();
  Eigen::VectorXf vec(n);
  for (int i = 0; i < n; ++i) vec(i) = v[static_cast<std::size_t>(i)];
  Eigen::VectorXf out(n);
  t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) out.noalias() = h * vec;
  double naive_ms = ms_since(t0);

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "fwht_1d  N=%d  %d reps: butterfly %.2f ms, dense multiply %.2f ms (%s)\n", n,
                reps, fast_ms, naive_ms, fast_ms < naive_ms ? "butterfly faster" : "check!");
  o << buf;
  // keep the optimizer from discarding the loops
  volatile float sink = work[0] + out(0);
  (void)sink;
}

void report_params(std::ostringstream& o, Branches branches, int base_width, int ref_k) {
  NetworkConfig cfg;
  cfg.branches = branches;
  cfg.base_width = base_width;
  cfg.in_channels = 40;
  cfg.in_size = 128;
  Model m = build_network(cfg, 0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s base=%d  in=40 N=128  params=%-8lld ref=%dk\n",
                branches == Branches::kHtOnly ? "ht_unet" : "td_fusion_unet", base_width,
                static_cast<long long>(param_count(m.params)), ref_k);
  o << buf;
}

}  // namespace

std::string run_bench() {
  std::ostringstream o;
  o << "tdseg-bench v1\n";
  o << "-- network wall time (batch 1, 12 channels, 64x64) --\n";
  bench_network(o, Branches::kHtOnly, 4);
  bench_network(o, Branches::kHtOnly, 8);
  bench_network(o, Branches::kHtDct, 4);
  bench_network(o, Branches::kHtDct, 8);
  o << "-- transform kernels --\n";
  bench_fwht(o);
  o << "-- parameter counts vs nominal reference sizes --\n";
  report_params(o, Branches::kHtOnly, 8, 169);
  report_params(o, Branches::kHtDct, 4, 159);
  report_params(o, Branches::kHtDct, 8, 370);
  return o.str();
}

}  // namespace tdseg
