#include "mnistcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mnistcnn/nn_ops.hpp"

namespace mcnn::ops {

namespace {

using Vec = std::vector<double>;

Tensor random_tensor(Rng& rng, std::vector<int> shape, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<float> dist(lo, hi);
    for (size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

Vec to_vec(const Tensor& t) {
    return Vec(t.data(), t.data() + t.numel());
}

template <typename F>
Vec numeric_grad(F&& loss, Vec& x, double h = kGradCheckStep) {
    Vec g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = loss();
        x[i] = orig - h;
        const double fm = loss();
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double weighted_sum(const Vec& values, const Tensor& weights) {
    double s = 0.0;
    for (size_t i = 0; i < values.size(); ++i) s += values[i] * weights[i];
    return s;
}

}  // namespace

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
}

double max_rel_error(const Tensor& analytic, const Vec& numeric, double skip_below) {
    double worst = 0.0;
    for (size_t i = 0; i < numeric.size(); ++i) {
        const double a = analytic[i];
        const double n = numeric[i];
        const double mag = std::max(std::abs(a), std::abs(n));
        if (mag < skip_below) continue;
        worst = std::max(worst, std::abs(a - n) / mag);
    }
    return worst;
}

GradCheckReport check_conv2d(Rng& rng) {
    const int n = 2, c = 3, h = 6, w = 6, o = 4, k = 3;
    const int oh = h - k + 1, ow = w - k + 1;
    Tensor input = random_tensor(rng, {n, c, h, w});
    Tensor weight = random_tensor(rng, {o, c, k, k});
    Tensor bias = random_tensor(rng, {o});
    Tensor out_w = random_tensor(rng, {n, o, oh, ow});

    ConvGrads analytic = conv2d_backward(input, weight, out_w);

    Vec xi = to_vec(input), xw = to_vec(weight), xb = to_vec(bias);
    auto loss = [&]() {
        double s = 0.0;
        size_t idx = 0;
        for (int ni = 0; ni < n; ++ni)
            for (int oi = 0; oi < o; ++oi)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x) {
                        double acc = xb[size_t(oi)];
                        for (int ci = 0; ci < c; ++ci)
                            for (int i = 0; i < k; ++i)
                                for (int j = 0; j < k; ++j)
                                    acc += xi[((size_t(ni) * c + ci) * h + y + i) * w + x + j] *
                                           xw[((size_t(oi) * c + ci) * k + i) * k + j];
                        s += acc * out_w[idx++];
                    }
        return s;
    };
    return {"conv2d",
            {{"input", max_rel_error(analytic.grad_input, numeric_grad(loss, xi))},
             {"weight", max_rel_error(analytic.grad_weight, numeric_grad(loss, xw))},
             {"bias", max_rel_error(analytic.grad_bias, numeric_grad(loss, xb))}}};
}

namespace {

GradCheckReport check_batchnorm_impl(Rng& rng, bool spatial) {
    const int n = 6, c = 4;
    const int h = spatial ? 5 : 1, w = spatial ? 5 : 1;
    const int p = h * w;
    const float eps = 1e-5f;
    Tensor input = spatial ? random_tensor(rng, {n, c, h, w}) : random_tensor(rng, {n, c});
    Tensor out_w(input.shape());
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (size_t i = 0; i < out_w.numel(); ++i) out_w[i] = dist(rng);

    BatchNormState state = BatchNormState::make(c);
    for (int i = 0; i < c; ++i) {
        state.gamma[size_t(i)] = dist(rng) + 1.5f;  // keep scale away from 0
        state.beta[size_t(i)] = dist(rng);
    }
    state.epsilon = eps;
    Tensor gamma = state.gamma, beta = state.beta;

    BnCache cache;
    batchnorm_forward(input, state, /*train=*/true, &cache);
    BnGrads analytic = batchnorm_backward(cache, gamma, out_w);

    Vec xi = to_vec(input), xg = to_vec(gamma), xb = to_vec(beta);
    auto loss = [&]() {
        double s = 0.0;
        const double m = double(n) * p;
        for (int ci = 0; ci < c; ++ci) {
            double sum = 0.0, sq = 0.0;
            for (int ni = 0; ni < n; ++ni)
                for (int i = 0; i < p; ++i) {
                    const double v = xi[(size_t(ni) * c + ci) * p + i];
                    sum += v;
                    sq += v * v;
                }
            const double mu = sum / m;
            const double var = sq / m - mu * mu;
            const double inv = 1.0 / std::sqrt(var + eps);
            for (int ni = 0; ni < n; ++ni)
                for (int i = 0; i < p; ++i) {
                    const size_t idx = (size_t(ni) * c + ci) * p + i;
                    s += (xg[size_t(ci)] * (xi[idx] - mu) * inv + xb[size_t(ci)]) * out_w[idx];
                }
        }
        return s;
    };
    return {spatial ? "batchnorm2d" : "batchnorm1d",
            {{"input", max_rel_error(analytic.grad_input, numeric_grad(loss, xi))},
             {"gamma", max_rel_error(analytic.grad_gamma, numeric_grad(loss, xg))},
             {"beta", max_rel_error(analytic.grad_beta, numeric_grad(loss, xb))}}};
}

}  // namespace

GradCheckReport check_batchnorm2d(Rng& rng) { return check_batchnorm_impl(rng, true); }
GradCheckReport check_batchnorm1d(Rng& rng) { return check_batchnorm_impl(rng, false); }

GradCheckReport check_relu(Rng& rng) {
    // inputs kept away from the kink at 0
    Tensor input({4, 25});
    std::uniform_real_distribution<float> mag(0.1f, 1.0f);
    std::bernoulli_distribution sign(0.5);
    for (size_t i = 0; i < input.numel(); ++i)
        input[i] = sign(rng) ? mag(rng) : -mag(rng);
    Tensor out_w = random_tensor(rng, {4, 25});

    Tensor analytic = relu_backward(input, out_w);
    Vec xi = to_vec(input);
    auto loss = [&]() {
        double s = 0.0;
        for (size_t i = 0; i < xi.size(); ++i) s += std::max(xi[i], 0.0) * out_w[i];
        return s;
    };
    return {"relu", {{"input", max_rel_error(analytic, numeric_grad(loss, xi))}}};
}

GradCheckReport check_linear(Rng& rng) {
    const int n = 3, f = 10, k = 7;
    Tensor input = random_tensor(rng, {n, f});
    Tensor weight = random_tensor(rng, {f, k});
    Tensor bias = random_tensor(rng, {k});
    Tensor out_w = random_tensor(rng, {n, k});

    LinearGrads analytic = linear_backward(input, weight, out_w);
    Vec xi = to_vec(input), xw = to_vec(weight), xb = to_vec(bias);
    auto loss = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) {
                double acc = xb[size_t(j)];
                for (int t = 0; t < f; ++t)
                    acc += xi[size_t(i) * f + t] * xw[size_t(t) * k + j];
                s += acc * out_w[size_t(i) * k + j];
            }
        return s;
    };
    return {"linear",
            {{"input", max_rel_error(analytic.grad_input, numeric_grad(loss, xi))},
             {"weight", max_rel_error(analytic.grad_weight, numeric_grad(loss, xw))},
             {"bias", max_rel_error(analytic.grad_bias, numeric_grad(loss, xb))}}};
}

GradCheckReport check_softmax_cross_entropy(Rng& rng) {
    const int n = 4, k = 10;
    Tensor logits = random_tensor(rng, {n, k}, -2.0f, 2.0f);
    std::vector<uint8_t> labels(static_cast<size_t>(n));
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (auto& l : labels) l = uint8_t(pick(rng));

    LossResult analytic = softmax_cross_entropy(logits, labels);
    Vec x = to_vec(logits);
    auto loss = [&]() {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double mx = x[size_t(i) * k];
            for (int j = 1; j < k; ++j) mx = std::max(mx, x[size_t(i) * k + j]);
            double denom = 0.0;
            for (int j = 0; j < k; ++j) denom += std::exp(x[size_t(i) * k + j] - mx);
            total += std::log(denom) - (x[size_t(i) * k + labels[size_t(i)]] - mx);
        }
        return total / n;
    };
    // CE gradients are O(1/(n*k)); lower the skip threshold accordingly
    return {"softmax_cross_entropy",
            {{"logits", max_rel_error(analytic.grad_logits, numeric_grad(loss, x), 1e-4)}}};
}

GradCheckReport check_maxpool(Rng& rng) {
    const int n = 1, c = 2, h = 8, w = 8;
    Tensor input = random_tensor(rng, {n, c, h, w});
    // widen the margin in every window so the step cannot flip an argmax
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; y += 2)
                for (int x = 0; x < w; x += 2) {
                    float* a = &input.at(ni, ci, y, x);
                    float* b = &input.at(ni, ci, y + 1, x);
                    float* cand[4] = {a, a + 1, b, b + 1};
                    int best = 0;
                    for (int t = 1; t < 4; ++t)
                        if (*cand[t] > *cand[best]) best = t;
                    *cand[best] += 0.2f;
                }
    Tensor out_w = random_tensor(rng, {n, c, h / 2, w / 2});

    PoolResult fwd = maxpool2x2_forward(input);
    Tensor analytic = maxpool2x2_backward(fwd.argmax, input.shape(), out_w);

    Vec xi = to_vec(input);
    auto loss = [&]() {
        double s = 0.0;
        size_t idx = 0;
        for (int ni = 0; ni < n; ++ni)
            for (int ci = 0; ci < c; ++ci)
                for (int y = 0; y < h; y += 2)
                    for (int x = 0; x < w; x += 2) {
                        const size_t base = ((size_t(ni) * c + ci) * h + y) * w + x;
                        const double m = std::max(std::max(xi[base], xi[base + 1]),
                                                  std::max(xi[base + w], xi[base + w + 1]));
                        s += m * out_w[idx++];
                    }
        return s;
    };
    return {"maxpool2x2", {{"input", max_rel_error(analytic, numeric_grad(loss, xi))}}};
}

std::vector<GradCheckReport> run_gradcheck_suite(uint64_t seed, int rounds) {
    using CheckFn = GradCheckReport (*)(Rng&);
    const CheckFn checks[] = {check_conv2d,  check_batchnorm2d, check_batchnorm1d, check_relu,
                              check_linear,  check_softmax_cross_entropy, check_maxpool};
    std::vector<GradCheckReport> out;
    for (CheckFn fn : checks) {
        GradCheckReport worst;
        for (int r = 0; r < rounds; ++r) {
            Rng rng = make_rng(seed, uint64_t(r));
            GradCheckReport rep = fn(rng);
            if (worst.op.empty() || rep.worst() > worst.worst()) worst = rep;
        }
        out.push_back(std::move(worst));
    }
    return out;
}

}  // namespace mcnn::ops
