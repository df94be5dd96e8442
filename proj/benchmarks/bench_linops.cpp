#include <benchmark/benchmark.h>

#include <random>

#include "sdcf/linops.hpp"

using namespace sdcf;

namespace {

Mat random_mat(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Mat m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

} // namespace

static void BM_ConvBank(benchmark::State& state) {
    const std::size_t samples = static_cast<std::size_t>(state.range(0));
    // Layer-1 geometry of the 3-layer instance: 4 filters, 11 taps, W = 10.
    Mat t = random_mat(11, 4, 1);
    Mat s = random_mat(samples, 10, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv_bank(t, s));
}
BENCHMARK(BM_ConvBank)->Arg(64)->Arg(256)->Arg(1024);

static void BM_ConvForwardMultiChannel(benchmark::State& state) {
    const std::size_t samples = static_cast<std::size_t>(state.range(0));
    // Layer-2 geometry: 8 in-channels, 16 filters, 3 taps, length 5.
    Mat t = random_mat(3 * 8, 16, 3);
    Mat s = random_mat(samples, 8 * 5, 4);
    for (auto _ : state)
        benchmark::DoNotOptimize(conv_forward(t, s, 8, 5));
}
BENCHMARK(BM_ConvForwardMultiChannel)->Arg(64)->Arg(256)->Arg(1024);

static void BM_LogdetGrad(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Mat t = random_mat(n, n / 2, 5);
    for (auto _ : state) benchmark::DoNotOptimize(logdet_grad_smoothed(t));
}
BENCHMARK(BM_LogdetGrad)->Arg(16)->Arg(40)->Arg(80);

static void BM_Maxpool(benchmark::State& state) {
    Mat in = random_mat(static_cast<std::size_t>(state.range(0)), 16 * 10, 7);
    std::vector<std::size_t> argmax;
    for (auto _ : state) benchmark::DoNotOptimize(pool_forward(in, 16, 10, &argmax));
}
BENCHMARK(BM_Maxpool)->Arg(256)->Arg(1024);
