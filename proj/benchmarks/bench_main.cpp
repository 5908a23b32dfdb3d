#include <benchmark/benchmark.h>

#include <random>

#include "adbcr/data.hpp"
#include "adbcr/lasso.hpp"
#include "adbcr/model.hpp"
#include "adbcr/objectives.hpp"
#include "adbcr/tensor.hpp"
#include "adbcr/trainer.hpp"

namespace adbcr {
namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

Dataset benchmark_data() {
  DgpConfig c;
  c.n = 1000;
  c.d = 10;
  c.seed = 1;
  return generate(c).data;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor(n, n, 1), b = random_tensor(n, n, 2);
  Tensor out(n, n);
  for (auto _ : state) {
    kernels::matmul(a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const Dataset data = benchmark_data();
  const PreparedData p = prepare(data, false);
  BatchIndices idx;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) idx.labeled.push_back(i);
  const BatchView batch = slice(p.train, idx);
  Architecture arch;
  arch.input_dim = data.d();
  arch.shared_layers = {20, 20};
  arch.head_layers = {20, 20};
  const Model m = Model::init(arch, 1);
  for (auto _ : state) {
    ad::Tape tape;
    const BoundModel bound = bind(m, tape, Trainable::all);
    const HeadOutputs out = forward_heads(bound, batch, ForwardOptions{}, true);
    tape.backward(ad::add(factual_loss(out, batch),
                          discriminative_distance(out, batch, DistanceMetric::l1)));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(100)->Arg(630);

void BM_TrainEpoch(benchmark::State& state) {
  const Dataset data = benchmark_data();
  TrainConfig cfg;
  cfg.shared_layers = {20, 20};
  cfg.head_layers = {20, 20};
  cfg.max_epochs = 1;
  cfg.mode = state.range(0) == 0 ? TrainMode::a_tarnet : TrainMode::adbcr;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, cfg).best_value);
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_LassoFit(benchmark::State& state) {
  const Dataset data = benchmark_data();
  const auto rows = data.rows(Split::train);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_lasso_model(data, rows, LassoVariant::per_treatment, 0.01));
  }
}
BENCHMARK(BM_LassoFit)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace adbcr

BENCHMARK_MAIN();
