#include "mnistcnn/optim.hpp"

#include <cmath>

namespace mcnn {

AdamState AdamState::make(const std::vector<Tensor*>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
        s.m.emplace_back(Tensor::zeros(p->shape()));
        s.v.emplace_back(Tensor::zeros(p->shape()));
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, float lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeMismatch("adam_step parameter/gradient/state count mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(double(state.beta1), double(state.t));
    const double bc2 = 1.0 - std::pow(double(state.beta2), double(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(g)) throw ShapeMismatch("adam_step gradient shape mismatch");
        if (!g.all_finite()) throw NonFiniteGradient("non-finite gradient in adam_step");
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (size_t j = 0; j < p.numel(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] = static_cast<float>(p[j] - lr * m_hat / (std::sqrt(v_hat) + state.eps));
        }
    }
}

double lr_at(const LrSchedule& schedule, int epoch) {
    return schedule.base_lr * std::pow(schedule.gamma, epoch);
}

EmaState EmaState::make(const std::vector<const Tensor*>& tracked, double decay) {
    EmaState s;
    s.decay = decay;
    s.shadow.reserve(tracked.size());
    for (const Tensor* t : tracked) s.shadow.push_back(*t);  // init to current values
    return s;
}

void ema_update(EmaState& ema, const std::vector<const Tensor*>& current) {
    if (current.size() != ema.shadow.size())
        throw ShapeMismatch("ema_update tracked tensor count mismatch");
    const float d = static_cast<float>(ema.decay);
    const float one_minus = 1.0f - d;
    for (size_t i = 0; i < current.size(); ++i) {
        Tensor& s = ema.shadow[i];
        const Tensor& c = *current[i];
        if (!s.same_shape(c)) throw ShapeMismatch("ema_update shadow shape mismatch");
        for (size_t j = 0; j < s.numel(); ++j) s[j] = d * s[j] + one_minus * c[j];
    }
}

std::vector<Tensor> ema_swap_for_eval(const EmaState& ema) {
    return ema.shadow;
}

}  // namespace mcnn
