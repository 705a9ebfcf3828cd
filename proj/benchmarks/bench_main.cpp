#include <benchmark/benchmark.h>

#include "smbcsp/algebra.hpp"
#include "smbcsp/smb.hpp"

namespace {

smbcsp::AlgebraPtr chain_over_xor3() {
  const int meet_rows[3][3] = {{0, 0, 0}, {1, 1, 1}, {0, 0, 2}};
  std::vector<int> mt(9), dt(27);
  auto m = [](int x) { return x == 2 ? 0 : x; };
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      mt[a * 3 + b] = meet_rows[a][b];
      for (int c = 0; c < 3; ++c) {
        dt[(a * 3 + b) * 3 + c] =
            (a == 2 && b == 2 && c == 2) ? 2 : (m(a) ^ m(b) ^ m(c));
      }
    }
  }
  return std::make_shared<smbcsp::FiniteAlgebra>("chain3", 3, std::move(mt),
                                                 std::move(dt));
}

void BM_DetectBlocks(benchmark::State& state) {
  auto alg = chain_over_xor3();
  for (auto _ : state) {
    benchmark::DoNotOptimize(smbcsp::detect_smb(*alg));
  }
}
BENCHMARK(BM_DetectBlocks);

}  // namespace

BENCHMARK_MAIN();
