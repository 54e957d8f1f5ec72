#pragma once

#include <cstdint>
#include <vector>

#include "mnistcnn/tensor.hpp"

namespace mcnn {

/// Adam with bias correction over a fixed list of parameter tensors.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t t = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    static AdamState make(const std::vector<Tensor*>& params);
};

/// One Adam update: params[i] <- params[i] - lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, float lr);

/// Per-epoch exponential decay: lr(epoch) = base_lr * gamma^epoch.
struct LrSchedule {
    double base_lr = 0.001;
    double gamma = 0.98;
};

double lr_at(const LrSchedule& schedule, int epoch);

/// Exponential moving average of tracked tensors (weights and, optionally,
/// batch-norm running statistics). shadow <- decay*shadow + (1-decay)*current.
struct EmaState {
    std::vector<Tensor> shadow;
    double decay = 0.999;

    static EmaState make(const std::vector<const Tensor*>& tracked, double decay = 0.999);
};

void ema_update(EmaState& ema, const std::vector<const Tensor*>& current);

/// Copies of the tracked tensors replaced by their shadows; the training
/// values are untouched.
std::vector<Tensor> ema_swap_for_eval(const EmaState& ema);

}  // namespace mcnn
