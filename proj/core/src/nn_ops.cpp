#include "mnistcnn/nn_ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mcnn::ops {

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& weight, int bias_len) {
    if (input.ndim() != 4 || weight.ndim() != 4)
        throw ShapeMismatch("conv2d expects 4-d input and weight");
    if (input.dim(1) != weight.dim(1))
        throw ShapeMismatch("conv2d channel mismatch: input C=" + std::to_string(input.dim(1)) +
                            ", weight C=" + std::to_string(weight.dim(1)));
    if (weight.dim(2) != weight.dim(3)) throw ShapeMismatch("conv2d kernel must be square");
    if (weight.dim(2) > input.dim(2) || weight.dim(3) > input.dim(3))
        throw ShapeMismatch("conv2d kernel larger than input");
    if (bias_len >= 0 && bias_len != weight.dim(0))
        throw ShapeMismatch("conv2d bias length != output channels");
}

// col is (C*k*k) x (N*P), columns grouped by sample then output position
void im2col(const Tensor& input, int k, float* col) {
    const int n_count = input.dim(0), c_count = input.dim(1);
    const int h = input.dim(2), w = input.dim(3);
    const int oh = h - k + 1, ow = w - k + 1;
    const size_t cols = size_t(n_count) * oh * ow;
    for (int c = 0; c < c_count; ++c) {
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                float* row = col + (size_t(c) * k * k + size_t(i) * k + j) * cols;
                for (int n = 0; n < n_count; ++n) {
                    const float* src = input.data() +
                        ((size_t(n) * c_count + c) * h + i) * w + j;
                    float* dst = row + size_t(n) * oh * ow;
                    for (int y = 0; y < oh; ++y)
                        std::memcpy(dst + size_t(y) * ow, src + size_t(y) * w,
                                    sizeof(float) * ow);
                }
            }
        }
    }
}

void col2im_accumulate(const float* col, int n_count, int c_count, int h, int w, int k,
                       Tensor& out) {
    const int oh = h - k + 1, ow = w - k + 1;
    const size_t cols = size_t(n_count) * oh * ow;
    for (int c = 0; c < c_count; ++c) {
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const float* row = col + (size_t(c) * k * k + size_t(i) * k + j) * cols;
                for (int n = 0; n < n_count; ++n) {
                    const float* src = row + size_t(n) * oh * ow;
                    float* dst = out.data() + ((size_t(n) * c_count + c) * h + i) * w + j;
                    for (int y = 0; y < oh; ++y) {
                        float* d = dst + size_t(y) * w;
                        const float* s = src + size_t(y) * ow;
                        for (int x = 0; x < ow; ++x) d[x] += s[x];
                    }
                }
            }
        }
    }
}

// Scratch buffers reused across conv calls; the im2col matrices are large
// (up to ~150 MB at batch 120) and reallocating them per step is costly.
float* scratch_a(size_t n) {
    static thread_local std::vector<float> buf;
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

float* scratch_b(size_t n) {
    static thread_local std::vector<float> buf;
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

}  // namespace

Tensor conv2d_forward_ref(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    check_conv_shapes(input, weight, bias.ndim() == 1 ? bias.dim(0) : -1);
    const int n_count = input.dim(0), c_count = input.dim(1);
    const int h = input.dim(2), w = input.dim(3);
    const int o_count = weight.dim(0), k = weight.dim(2);
    const int oh = h - k + 1, ow = w - k + 1;
    Tensor out({n_count, o_count, oh, ow});
    for (int n = 0; n < n_count; ++n)
        for (int o = 0; o < o_count; ++o)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double acc = bias[size_t(o)];
                    for (int c = 0; c < c_count; ++c)
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j)
                                acc += double(input.at(n, c, y + i, x + j)) *
                                       double(weight.at(o, c, i, j));
                    out.at(n, o, y, x) = static_cast<float>(acc);
                }
    return out;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    check_conv_shapes(input, weight, bias.ndim() == 1 ? bias.dim(0) : -1);
    const int n_count = input.dim(0);
    const int h = input.dim(2), w = input.dim(3);
    const int o_count = weight.dim(0), c_count = weight.dim(1), k = weight.dim(2);
    const int oh = h - k + 1, ow = w - k + 1;
    const int ck = c_count * k * k;
    const size_t cols = size_t(n_count) * oh * ow;

    float* col = scratch_a(size_t(ck) * cols);
    im2col(input, k, col);

    float* out2 = scratch_b(size_t(o_count) * cols);  // O x (N*P)
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, o_count, int(cols), ck, 1.0f,
                weight.data(), ck, col, int(cols), 0.0f, out2, int(cols));

    Tensor out({n_count, o_count, oh, ow});
    const int p = oh * ow;
    for (int n = 0; n < n_count; ++n)
        for (int o = 0; o < o_count; ++o) {
            const float* src = out2 + size_t(o) * cols + size_t(n) * p;
            float* dst = out.data() + (size_t(n) * o_count + o) * p;
            const float b = bias[size_t(o)];
            for (int i = 0; i < p; ++i) dst[i] = src[i] + b;
        }
    return out;
}

ConvGrads conv2d_backward_ref(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    check_conv_shapes(input, weight, -1);
    const int n_count = input.dim(0), c_count = input.dim(1);
    const int h = input.dim(2), w = input.dim(3);
    const int o_count = weight.dim(0), k = weight.dim(2);
    const int oh = h - k + 1, ow = w - k + 1;
    if (grad_out.shape() != std::vector<int>{n_count, o_count, oh, ow})
        throw ShapeMismatch("conv2d_backward grad_out shape mismatch");

    ConvGrads g{Tensor(input.shape()), Tensor(weight.shape()), Tensor({o_count})};
    for (int n = 0; n < n_count; ++n)
        for (int o = 0; o < o_count; ++o)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    const float go = grad_out.at(n, o, y, x);
                    g.grad_bias[size_t(o)] += go;
                    for (int c = 0; c < c_count; ++c)
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j) {
                                g.grad_weight.at(o, c, i, j) += go * input.at(n, c, y + i, x + j);
                                g.grad_input.at(n, c, y + i, x + j) += go * weight.at(o, c, i, j);
                            }
                }
    return g;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    check_conv_shapes(input, weight, -1);
    const int n_count = input.dim(0);
    const int h = input.dim(2), w = input.dim(3);
    const int o_count = weight.dim(0), c_count = weight.dim(1), k = weight.dim(2);
    const int oh = h - k + 1, ow = w - k + 1;
    if (grad_out.shape() != std::vector<int>{n_count, o_count, oh, ow})
        throw ShapeMismatch("conv2d_backward grad_out shape mismatch");
    const int ck = c_count * k * k;
    const int p = oh * ow;
    const size_t cols = size_t(n_count) * p;

    // gather grad_out into O x (N*P)
    float* g2 = scratch_b(size_t(o_count) * cols);
    for (int n = 0; n < n_count; ++n)
        for (int o = 0; o < o_count; ++o)
            std::memcpy(g2 + size_t(o) * cols + size_t(n) * p,
                        grad_out.data() + (size_t(n) * o_count + o) * p, sizeof(float) * p);

    ConvGrads g{Tensor(input.shape()), Tensor(weight.shape()), Tensor({o_count})};

    for (int o = 0; o < o_count; ++o) {
        double acc = 0.0;
        const float* row = g2 + size_t(o) * cols;
        for (size_t i = 0; i < cols; ++i) acc += row[i];
        g.grad_bias[size_t(o)] = static_cast<float>(acc);
    }

    float* col = scratch_a(size_t(ck) * cols);
    im2col(input, k, col);

    // dW (O x CK) = g2 (O x NP) * col^T (NP x CK)
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, o_count, ck, int(cols), 1.0f, g2,
                int(cols), col, int(cols), 0.0f, g.grad_weight.data(), ck);

    // dcol (CK x NP) = W^T (CK x O) * g2 (O x NP), reuse the col buffer
    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, ck, int(cols), o_count, 1.0f,
                weight.data(), ck, g2, int(cols), 0.0f, col, int(cols));
    col2im_accumulate(col, n_count, c_count, h, w, k, g.grad_input);
    return g;
}

Tensor pad2d(const Tensor& input, int pad) {
    if (input.ndim() != 4) throw ShapeMismatch("pad2d expects a 4-d tensor");
    const int n_count = input.dim(0), c_count = input.dim(1);
    const int h = input.dim(2), w = input.dim(3);
    Tensor out({n_count, c_count, h + 2 * pad, w + 2 * pad});
    for (int n = 0; n < n_count; ++n)
        for (int c = 0; c < c_count; ++c)
            for (int y = 0; y < h; ++y)
                std::memcpy(out.data() + ((size_t(n) * c_count + c) * (h + 2 * pad) + y + pad) *
                                             (w + 2 * pad) + pad,
                            input.data() + ((size_t(n) * c_count + c) * h + y) * w,
                            sizeof(float) * w);
    return out;
}

Tensor unpad2d(const Tensor& grad_padded, int pad) {
    if (grad_padded.ndim() != 4) throw ShapeMismatch("unpad2d expects a 4-d tensor");
    const int n_count = grad_padded.dim(0), c_count = grad_padded.dim(1);
    const int h = grad_padded.dim(2) - 2 * pad, w = grad_padded.dim(3) - 2 * pad;
    Tensor out({n_count, c_count, h, w});
    for (int n = 0; n < n_count; ++n)
        for (int c = 0; c < c_count; ++c)
            for (int y = 0; y < h; ++y)
                std::memcpy(out.data() + ((size_t(n) * c_count + c) * h + y) * w,
                            grad_padded.data() +
                                ((size_t(n) * c_count + c) * (h + 2 * pad) + y + pad) *
                                    (w + 2 * pad) + pad,
                            sizeof(float) * w);
    return out;
}

BatchNormState BatchNormState::make(int channels) {
    BatchNormState s;
    s.gamma = Tensor::full({channels}, 1.0f);
    s.beta = Tensor::zeros({channels});
    s.running_mean = Tensor::zeros({channels});
    s.running_var = Tensor::full({channels}, 1.0f);
    return s;
}

namespace {

struct BnLayout {
    int n, c, p;  // batch, channels, spatial positions per sample
};

BnLayout bn_layout(const Tensor& input) {
    if (input.ndim() == 4) return {input.dim(0), input.dim(1), input.dim(2) * input.dim(3)};
    if (input.ndim() == 2) return {input.dim(0), input.dim(1), 1};
    throw ShapeMismatch("batchnorm expects a 2-d or 4-d tensor");
}

inline const float* bn_channel_ptr(const float* base, const BnLayout& l, int n, int c) {
    return base + (size_t(n) * l.c + c) * l.p;
}

}  // namespace

Tensor batchnorm_forward(const Tensor& input, BatchNormState& state, bool train, BnCache* cache) {
    const BnLayout l = bn_layout(input);
    if (l.c != state.channels()) throw ShapeMismatch("batchnorm channel count mismatch");
    const long m = long(l.n) * l.p;  // elements per channel
    Tensor out(input.shape());

    std::vector<float> mean(size_t(l.c)), inv_std(size_t(l.c));
    if (train) {
        if (l.n < 2 || m < 2)
            throw BatchTooSmall("batchnorm train mode needs a batch of at least 2");
        for (int c = 0; c < l.c; ++c) {
            double sum = 0.0, sq = 0.0;
            for (int n = 0; n < l.n; ++n) {
                const float* x = bn_channel_ptr(input.data(), l, n, c);
                for (int i = 0; i < l.p; ++i) {
                    sum += x[i];
                    sq += double(x[i]) * x[i];
                }
            }
            const double mu = sum / double(m);
            const double var = std::max(0.0, sq / double(m) - mu * mu);  // biased
            mean[size_t(c)] = static_cast<float>(mu);
            inv_std[size_t(c)] = static_cast<float>(1.0 / std::sqrt(var + state.epsilon));
            const double unbiased = var * double(m) / double(m - 1);
            state.running_mean[size_t(c)] = static_cast<float>(
                (1.0 - state.momentum) * state.running_mean[size_t(c)] + state.momentum * mu);
            state.running_var[size_t(c)] = static_cast<float>(
                (1.0 - state.momentum) * state.running_var[size_t(c)] +
                state.momentum * unbiased);
        }
    } else {
        for (int c = 0; c < l.c; ++c) {
            mean[size_t(c)] = state.running_mean[size_t(c)];
            inv_std[size_t(c)] = static_cast<float>(
                1.0 / std::sqrt(double(state.running_var[size_t(c)]) + state.epsilon));
        }
    }

    for (int n = 0; n < l.n; ++n)
        for (int c = 0; c < l.c; ++c) {
            const float* x = bn_channel_ptr(input.data(), l, n, c);
            float* y = const_cast<float*>(bn_channel_ptr(out.data(), l, n, c));
            const float mu = mean[size_t(c)], is = inv_std[size_t(c)];
            const float gamma = state.gamma[size_t(c)], beta = state.beta[size_t(c)];
            for (int i = 0; i < l.p; ++i) y[i] = gamma * (x[i] - mu) * is + beta;
        }

    if (cache) {
        cache->input = input;
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
        cache->train = train;
    }
    return out;
}

BnGrads batchnorm_backward(const BnCache& cache, const Tensor& gamma, const Tensor& grad_out) {
    if (!cache.train)
        throw ModeMismatch("batchnorm_backward requires a train-mode forward cache");
    const BnLayout l = bn_layout(cache.input);
    if (!cache.input.same_shape(grad_out))
        throw ShapeMismatch("batchnorm_backward grad_out shape mismatch");
    const double m = double(l.n) * l.p;

    BnGrads g{Tensor(cache.input.shape()), Tensor({l.c}), Tensor({l.c})};
    for (int c = 0; c < l.c; ++c) {
        const float mu = cache.mean[size_t(c)], is = cache.inv_std[size_t(c)];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < l.n; ++n) {
            const float* x = bn_channel_ptr(cache.input.data(), l, n, c);
            const float* dy = bn_channel_ptr(grad_out.data(), l, n, c);
            for (int i = 0; i < l.p; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += double(dy[i]) * (x[i] - mu) * is;
            }
        }
        g.grad_beta[size_t(c)] = static_cast<float>(sum_dy);
        g.grad_gamma[size_t(c)] = static_cast<float>(sum_dy_xhat);
        const double scale = double(gamma[size_t(c)]) * is / m;
        for (int n = 0; n < l.n; ++n) {
            const float* x = bn_channel_ptr(cache.input.data(), l, n, c);
            const float* dy = bn_channel_ptr(grad_out.data(), l, n, c);
            float* dx = const_cast<float*>(bn_channel_ptr(g.grad_input.data(), l, n, c));
            for (int i = 0; i < l.p; ++i) {
                const double xhat = (x[i] - mu) * is;
                dx[i] = static_cast<float>(scale * (m * dy[i] - sum_dy - xhat * sum_dy_xhat));
            }
        }
    }
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (size_t i = 0; i < input.numel(); ++i) out[i] = std::max(input[i], 0.0f);
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    if (!input.same_shape(grad_out)) throw ShapeMismatch("relu_backward shape mismatch");
    Tensor out(input.shape());
    for (size_t i = 0; i < input.numel(); ++i) out[i] = input[i] > 0.0f ? grad_out[i] : 0.0f;
    return out;
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.ndim() != 2 || weight.ndim() != 2)
        throw ShapeMismatch("linear expects 2-d input and weight");
    const int n = input.dim(0), f = input.dim(1), k = weight.dim(1);
    if (weight.dim(0) != f) throw ShapeMismatch("linear feature length mismatch");
    if (bias.dim(0) != k) throw ShapeMismatch("linear bias length mismatch");
    Tensor out({n, k});
    for (int i = 0; i < n; ++i)
        std::memcpy(&out.at(i, 0), bias.data(), sizeof(float) * k);
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, k, f, 1.0f, input.data(), f,
                weight.data(), k, 1.0f, out.data(), k);
    return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    const int n = input.dim(0), f = input.dim(1), k = weight.dim(1);
    if (grad_out.shape() != std::vector<int>{n, k})
        throw ShapeMismatch("linear_backward grad_out shape mismatch");
    LinearGrads g{Tensor({n, f}), Tensor({f, k}), Tensor({k})};
    // dX = dY W^T
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, n, f, k, 1.0f, grad_out.data(), k,
                weight.data(), k, 0.0f, g.grad_input.data(), f);
    // dW = X^T dY
    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, f, k, n, 1.0f, input.data(), f,
                grad_out.data(), k, 0.0f, g.grad_weight.data(), k);
    for (int j = 0; j < k; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += grad_out.at(i, j);
        g.grad_bias[size_t(j)] = static_cast<float>(acc);
    }
    return g;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const uint8_t> labels) {
    if (logits.ndim() != 2) throw ShapeMismatch("softmax_cross_entropy expects 2-d logits");
    const int n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != size_t(n))
        throw ShapeMismatch("softmax_cross_entropy label count mismatch");
    for (uint8_t l : labels)
        if (l >= k) throw BadLabel("label " + std::to_string(l) + " out of range");

    LossResult result{0.0, Tensor({n, k})};
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data() + size_t(i) * k;
        float max_logit = row[0];
        for (int j = 1; j < k; ++j) max_logit = std::max(max_logit, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(double(row[j]) - max_logit);
        const double log_denom = std::log(denom);
        total += log_denom - (double(row[labels[size_t(i)]]) - max_logit);
        float* grad = result.grad_logits.data() + size_t(i) * k;
        for (int j = 0; j < k; ++j) {
            const double p = std::exp(double(row[j]) - max_logit) / denom;
            grad[j] = static_cast<float>(p / n);
        }
        grad[labels[size_t(i)]] -= 1.0f / float(n);
    }
    result.loss = total / n;
    return result;
}

PoolResult maxpool2x2_forward(const Tensor& input) {
    if (input.ndim() != 4) throw ShapeMismatch("maxpool expects a 4-d tensor");
    const int n_count = input.dim(0), c_count = input.dim(1);
    const int h = input.dim(2), w = input.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw OddSpatialDim("maxpool2x2 requires even H and W, got " + std::to_string(h) + "x" +
                            std::to_string(w));
    const int oh = h / 2, ow = w / 2;
    PoolResult result{Tensor({n_count, c_count, oh, ow}), {}};
    result.argmax.resize(result.output.numel());
    size_t out_idx = 0;
    for (int n = 0; n < n_count; ++n)
        for (int c = 0; c < c_count; ++c)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    const size_t base =
                        ((size_t(n) * c_count + c) * h + 2 * y) * w + 2 * x;
                    const size_t candidates[4] = {base, base + 1, base + w, base + w + 1};
                    size_t best = candidates[0];
                    for (int t = 1; t < 4; ++t)
                        if (input[candidates[t]] > input[best]) best = candidates[t];
                    result.output[out_idx] = input[best];
                    result.argmax[out_idx] = static_cast<int32_t>(best);
                    ++out_idx;
                }
    return result;
}

Tensor maxpool2x2_backward(const std::vector<int32_t>& argmax,
                           const std::vector<int>& input_shape, const Tensor& grad_out) {
    if (argmax.size() != grad_out.numel())
        throw ShapeMismatch("maxpool_backward argmax/grad_out size mismatch");
    Tensor grad_in(input_shape);
    for (size_t i = 0; i < argmax.size(); ++i)
        grad_in[size_t(argmax[i])] += grad_out[i];
    return grad_in;
}

}  // namespace mcnn::ops
