#include <benchmark/benchmark.h>

#include "mnistcnn/model.hpp"
#include "mnistcnn/nn_ops.hpp"
#include "mnistcnn/optim.hpp"
#include "mnistcnn/rng.hpp"

using namespace mcnn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

// the heaviest m5 layer: 5x5 conv, 32 -> 64 channels on a 24x24 map
void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({8, 32, 64, 24, 5})->Args({32, 32, 64, 24, 5})->Args({8, 1, 32, 28, 5});
}

void BM_conv_forward_gemm(benchmark::State& state) {
    Rng rng = make_rng(1);
    const int n = int(state.range(0)), c = int(state.range(1)), o = int(state.range(2));
    const int hw = int(state.range(3)), k = int(state.range(4));
    const Tensor input = random_tensor({n, c, hw, hw}, rng);
    const Tensor weight = random_tensor({o, c, k, k}, rng);
    const Tensor bias = random_tensor({o}, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(ops::conv2d_forward(input, weight, bias));
    const double flops = 2.0 * n * o * c * k * k * (hw - k + 1) * (hw - k + 1);
    state.counters["GFLOP/s"] =
        benchmark::Counter(flops * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_conv_forward_gemm)->Apply(conv_args)->Unit(benchmark::kMillisecond);

void BM_conv_forward_reference(benchmark::State& state) {
    Rng rng = make_rng(1);
    const int n = int(state.range(0)), c = int(state.range(1)), o = int(state.range(2));
    const int hw = int(state.range(3)), k = int(state.range(4));
    const Tensor input = random_tensor({n, c, hw, hw}, rng);
    const Tensor weight = random_tensor({o, c, k, k}, rng);
    const Tensor bias = random_tensor({o}, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(ops::conv2d_forward_ref(input, weight, bias));
}
BENCHMARK(BM_conv_forward_reference)->Args({8, 32, 64, 24, 5})->Unit(benchmark::kMillisecond);

void BM_conv_backward_gemm(benchmark::State& state) {
    Rng rng = make_rng(2);
    const Tensor input = random_tensor({8, 32, 24, 24}, rng);
    const Tensor weight = random_tensor({64, 32, 5, 5}, rng);
    const Tensor grad_out = random_tensor({8, 64, 20, 20}, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(ops::conv2d_backward(input, weight, grad_out));
}
BENCHMARK(BM_conv_backward_gemm)->Unit(benchmark::kMillisecond);

void BM_batchnorm_forward(benchmark::State& state) {
    Rng rng = make_rng(3);
    const Tensor input = random_tensor({32, 64, 20, 20}, rng);
    ops::BatchNormState bn = ops::BatchNormState::make(64);
    for (auto _ : state) benchmark::DoNotOptimize(ops::batchnorm_forward(input, bn, true));
}
BENCHMARK(BM_batchnorm_forward)->Unit(benchmark::kMillisecond);

void BM_training_step(benchmark::State& state) {
    const std::string name = state.range(0) == 0 ? "m5" : "c1";
    Rng rng = make_rng(4);
    Model model(build_model(name));
    model.init_params(1);
    const Tensor images = random_tensor({32, 1, 28, 28}, rng);
    std::vector<uint8_t> labels(32);
    std::uniform_int_distribution<int> digit(0, 9);
    for (auto& l : labels) l = uint8_t(digit(rng));
    AdamState adam = AdamState::make(model.parameters());

    for (auto _ : state) {
        std::vector<LayerCache> caches;
        const Tensor logits = model.forward(images, true, &caches);
        const ops::LossResult loss = ops::softmax_cross_entropy(logits, labels);
        const auto grads = model.backward(caches, loss.grad_logits);
        std::vector<const Tensor*> grad_ptrs;
        for (const auto& g : grads) grad_ptrs.push_back(&g);
        adam_step(model.parameters(), grad_ptrs, adam, 0.001f);
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * 32);
}
BENCHMARK(BM_training_step)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
