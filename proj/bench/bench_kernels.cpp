// Serial reference vs OpenMP kernels on a cloth-sized system.

#include "pdsim/kernels.hpp"
#include "pdsim/pd_core.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <random>

using namespace pdsim;

namespace {

struct Fixture {
  SparseMat H;
  std::vector<double> diag, shift;
  Positions b, x;
  MatX V;
  std::vector<double> blocks;
  std::vector<int> idx;
  std::vector<double> w;
  int r = 30;

  explicit Fixture(int side) {
    const int n = side * side;
    std::vector<Eigen::Triplet<double>> t;
    auto add = [&](int i, int j) {
      t.emplace_back(i, j, -1.0);
      t.emplace_back(j, i, -1.0);
      t.emplace_back(i, i, 1.0);
      t.emplace_back(j, j, 1.0);
    };
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        const int v = i * side + j;
        if (j + 1 < side) add(v, v + 1);
        if (i + 1 < side) add(v, v + side);
        if (i + 1 < side && j + 1 < side) add(v, v + side + 1);
        t.emplace_back(v, v, 100.0);
      }
    H.resize(n, n);
    H.setFromTriplets(t.begin(), t.end());
    diag.resize(n);
    for (int i = 0; i < n; ++i) diag[i] = H.coeff(i, i);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    shift.assign(n, 0.0);
    for (int i = 0; i < n; i += 7) shift[i] = 50.0 * (u(rng) + 1.0);
    b = Positions::NullaryExpr(n, 3, [&] { return u(rng); });
    x = Positions::NullaryExpr(n, 3, [&] { return u(rng); });
    V = MatX::NullaryExpr(n, r, [&] { return u(rng); });
    blocks.resize(static_cast<size_t>(n) * kernels::packed_size(r));
    for (double& v : blocks) v = u(rng);
    for (int i = 0; i < n; i += 5) {
      idx.push_back(i);
      w.push_back(u(rng) + 2.0);
    }
  }
};

Fixture& fixture(int side) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(side);
  if (it == cache.end()) it = cache.emplace(side, Fixture(side)).first;
  return it->second;
}

template <bool Par>
void BM_spmv(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  Positions y;
  for (auto _ : st) {
    if constexpr (Par) kernels::parallel::spmv(f.H, f.x, y);
    else kernels::serial::spmv(f.H, f.x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Par>
void BM_rank2(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  Positions x = f.x, r, u;
  for (auto _ : st) {
    if constexpr (Par) kernels::parallel::rank2_jacobi_step(f.H, f.diag, f.shift, f.b, x, 0.5, r, u);
    else kernels::serial::rank2_jacobi_step(f.H, f.diag, f.shift, f.b, x, 0.5, r, u);
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Par>
void BM_project(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  MatX q;
  for (auto _ : st) {
    if constexpr (Par) kernels::parallel::project(f.V, f.x, q);
    else kernels::serial::project(f.V, f.x, q);
    benchmark::DoNotOptimize(q.data());
  }
}

template <bool Par>
void BM_reduced_update(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  std::vector<double> out;
  for (auto _ : st) {
    if constexpr (Par) kernels::parallel::reduced_update(f.blocks, f.r, f.idx, f.w, out);
    else kernels::serial::reduced_update(f.blocks, f.r, f.idx, f.w, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_spmv<false>)->Arg(70)->Arg(100);
BENCHMARK(BM_spmv<true>)->Arg(70)->Arg(100);
BENCHMARK(BM_rank2<false>)->Arg(70)->Arg(100);
BENCHMARK(BM_rank2<true>)->Arg(70)->Arg(100);
BENCHMARK(BM_project<false>)->Arg(70)->Arg(100);
BENCHMARK(BM_project<true>)->Arg(70)->Arg(100);
BENCHMARK(BM_reduced_update<false>)->Arg(70)->Arg(100);
BENCHMARK(BM_reduced_update<true>)->Arg(70)->Arg(100);

BENCHMARK_MAIN();
