#include <benchmark/benchmark.h>

#include "clmx/network.hpp"
#include "clmx/rng.hpp"
#include "clmx/training.hpp"

namespace {

clmx::Batch random_batch(int batch_size, int seq_len, int vocab, std::uint64_t seed) {
    clmx::Batch b;
    b.batch_size = batch_size;
    b.seq_len = seq_len;
    std::size_t n = static_cast<std::size_t>(batch_size) * seq_len;
    b.inputs.resize(n);
    b.targets.resize(n);
    b.mask.assign(n, 1);
    clmx::Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        b.inputs[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab)));
        b.targets[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab)));
    }
    return b;
}

void BM_Forward(benchmark::State& state) {
    clmx::Arch arch{64, 16, static_cast<int>(state.range(0))};
    clmx::ModelParams params = clmx::init_model(arch, "", 1).params;
    clmx::Batch batch = random_batch(16, 32, arch.vocab, 7);
    for (auto _ : state) {
        auto result = clmx::forward(params, batch, clmx::Mode::eval());
        benchmark::DoNotOptimize(result.nll.v.data());
    }
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(128);

void BM_ForwardBackward(benchmark::State& state) {
    clmx::Arch arch{64, 16, static_cast<int>(state.range(0))};
    clmx::ModelParams params = clmx::init_model(arch, "", 1).params;
    clmx::Batch batch = random_batch(16, 32, arch.vocab, 7);
    for (auto _ : state) {
        auto result = clmx::forward(params, batch, clmx::Mode::eval());
        auto grads = clmx::backward(params, result.cache);
        benchmark::DoNotOptimize(grads.w_out.v.data());
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(128);

void BM_AdagradStep(benchmark::State& state) {
    clmx::Arch arch{64, 16, static_cast<int>(state.range(0))};
    clmx::ModelParams params = clmx::init_model(arch, "", 1).params;
    clmx::ModelParams grads = clmx::init_model(arch, "", 2).params;
    clmx::OptimizerState opt(arch);
    for (auto _ : state) {
        clmx::adagrad_step(params, grads, opt, 0.1);
        benchmark::DoNotOptimize(params.w_out.v.data());
    }
}
BENCHMARK(BM_AdagradStep)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
