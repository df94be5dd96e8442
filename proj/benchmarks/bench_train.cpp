#include <benchmark/benchmark.h>

#include <random>

#include "sdcf/model.hpp"
#include "sdcf/trainer.hpp"

using namespace sdcf;

namespace {

struct Fixture {
    ArchConfig arch;
    SdcfModel model;
    FeatureVars vars;
    std::vector<Mat> signals;
    LabelVec labels;

    explicit Fixture(std::size_t samples) {
        arch.num_channels = 5;
        arch.window_size = 10;
        arch.num_classes = 3;
        arch.layers = {LayerSpec{ConvSpec{1, 8, 3}, ActivationKind::Selu, true},
                       LayerSpec{ConvSpec{8, 16, 3}, ActivationKind::Identity, true}};
        arch.fusion_out = arch.feature_dim() * 5 / 2;
        model = init_model(arch, 12345);

        std::mt19937_64 rng(777);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::uniform_int_distribution<int> label(0, 2);
        for (std::size_t c = 0; c < arch.num_channels; ++c) {
            Mat s(samples, arch.window_size);
            for (double& v : s.values()) v = dist(rng);
            signals.push_back(std::move(s));
            vars.x.push_back(
                nonneg_prox(channel_forward(model.banks[c], signals.back(), arch)));
        }
        Mat z(samples, arch.fusion_out);
        for (std::size_t c = 0; c < arch.num_channels; ++c)
            axpy(z, 1.0, matmul(vars.x[c], model.fusion[c]));
        vars.z = nonneg_prox(std::move(z));
        labels.resize(samples);
        for (int& y : labels) y = label(rng);
    }
};

} // namespace

static void BM_JointObjective(benchmark::State& state) {
    Fixture fx(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            joint_objective(fx.model, fx.vars, fx.signals, fx.labels, true));
}
BENCHMARK(BM_JointObjective)->Arg(64)->Arg(256);

static void BM_GradJoint(benchmark::State& state) {
    Fixture fx(static_cast<std::size_t>(state.range(0)));
    GradOptions opts;
    opts.smoothed = true;
    opts.data_scale = 1.0 / static_cast<double>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(grad_joint(fx.model, fx.vars, fx.signals, fx.labels, opts));
}
BENCHMARK(BM_GradJoint)->Arg(64)->Arg(256);

static void BM_Infer(benchmark::State& state) {
    Fixture fx(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(infer(fx.model, fx.signals));
}
BENCHMARK(BM_Infer)->Arg(64)->Arg(256);

static void BM_AdamStep(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Mat param(n, n);
    Mat grad(n, n);
    for (double& v : param.values()) v = dist(rng);
    for (double& v : grad.values()) v = dist(rng);
    AdamState st;
    OptimConfig cfg;
    for (auto _ : state) adam_step(st, param, grad, cfg);
}
BENCHMARK(BM_AdamStep)->Arg(32)->Arg(128);
