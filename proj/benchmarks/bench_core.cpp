#include <benchmark/benchmark.h>

#include "nlb/bounds.hpp"
#include "nlb/conditions.hpp"
#include "nlb/dynamics.hpp"
#include "nlb/nn.hpp"
#include "nlb/rng.hpp"

using namespace nlb;

namespace {

void BM_CwStep(benchmark::State& st) {
  const SystemParams p;
  State s{1.0, -0.5, 0.01, 0.02};
  const ControlInput u{0.3, -0.2};
  for (auto _ : st) {
    s = cw_step(s, u, p);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_CwStep);

void BM_Forward(benchmark::State& st) {
  const Mlp net = init({4, static_cast<int>(st.range(0)), static_cast<int>(st.range(0)), 1}, 1);
  Vec x = Vec::Constant(4, 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_Forward)->Arg(20)->Arg(30)->Arg(64);

void BM_ForwardBatch(benchmark::State& st) {
  const Mlp net = init({4, 30, 30, 1}, 1);
  Rng rng(2);
  Mat xs(4, st.range(0));
  for (Eigen::Index j = 0; j < xs.cols(); ++j) xs.col(j) = uniform_in_box(rng, Vec::Constant(4, -1), Vec::Constant(4, 1));
  for (auto _ : st) benchmark::DoNotOptimize(net.forward_batch(xs));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(1024)->Arg(16384);

void BM_NetworkBounds(benchmark::State& st) {
  const Mlp net = init({4, 30, 30, 1}, 3);
  ExprGraph g(4);
  const int out = g.network(g.input(), net);
  const BoxRegion box(Vec::Constant(4, -0.1), Vec::Constant(4, 0.1));
  const auto relax = st.range(0) ? Relaxation::Linear : Relaxation::Interval;
  for (auto _ : st) benchmark::DoNotOptimize(bound(g, box, relax).lo(out, 0));
}
BENCHMARK(BM_NetworkBounds)->Arg(0)->Arg(1);

void BM_Condition1(benchmark::State& st) {
  const RwaTask task = make_surrogate_task(1.0);
  FrwaCertificate cert;
  Mlp net = init({2, 16, 16, 1}, 4);
  net.bias(2)[0] -= 5.0;
  cert.net = std::make_shared<const Mlp>(net);
  cert.goal = task.goal;
  cert.unsafe = task.unsafe;
  const BnbConfig cfg = with_plant_widths(BnbConfig{}, double_integrator_plant(SystemParams{}));
  for (auto _ : st) benchmark::DoNotOptimize(check_condition1(cert, task, cfg).kind);
}
BENCHMARK(BM_Condition1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
