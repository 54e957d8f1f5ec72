#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mnistcnn/tensor.hpp"

namespace mcnn::ops {

// ---------------------------------------------------------------------------
// 2D convolution, stride 1, no padding. Output spatial extent shrinks by k-1.
// conv2d_forward uses a patch-matrix (im2col + GEMM) path; the _ref variants
// are the direct-summation reference the fast path is checked against.
// ---------------------------------------------------------------------------

struct ConvGrads {
    Tensor grad_input;
    Tensor grad_weight;
    Tensor grad_bias;
};

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor conv2d_forward_ref(const Tensor& input, const Tensor& weight, const Tensor& bias);

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out);
ConvGrads conv2d_backward_ref(const Tensor& input, const Tensor& weight, const Tensor& grad_out);

/// Zero-pad H and W by `pad` on every side (baseline models only).
Tensor pad2d(const Tensor& input, int pad);
/// Gradient of pad2d: crop the border back off.
Tensor unpad2d(const Tensor& grad_padded, int pad);

// ---------------------------------------------------------------------------
// Batch normalization. 4-d input normalizes per channel over (N,H,W); 2-d
// input normalizes per feature over N. Train mode uses (biased) batch
// statistics and updates running stats with the unbiased variance; eval mode
// uses the running statistics.
// ---------------------------------------------------------------------------

struct BatchNormState {
    Tensor gamma;         // per-channel scale, init 1
    Tensor beta;          // per-channel shift, init 0
    Tensor running_mean;  // init 0
    Tensor running_var;   // init 1
    float momentum = 0.1f;
    float epsilon = 1e-5f;

    static BatchNormState make(int channels);
    int channels() const { return gamma.dim(0); }
};

struct BnCache {
    Tensor input;
    std::vector<float> mean;     // per channel, batch mean
    std::vector<float> inv_std;  // per channel, 1/sqrt(var + eps)
    bool train = false;
};

Tensor batchnorm_forward(const Tensor& input, BatchNormState& state, bool train,
                         BnCache* cache = nullptr);

struct BnGrads {
    Tensor grad_input;
    Tensor grad_gamma;
    Tensor grad_beta;
};

BnGrads batchnorm_backward(const BnCache& cache, const Tensor& gamma, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Fully connected: y = x W + b with x: N x F, W: F x K, b: K.
// ---------------------------------------------------------------------------

struct LinearGrads {
    Tensor grad_input;
    Tensor grad_weight;
    Tensor grad_bias;
};

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Softmax + cross-entropy, fused. Mean loss over the batch; gradient w.r.t.
// logits is (softmax - onehot)/N. Max-subtraction for stability.
// ---------------------------------------------------------------------------

struct LossResult {
    double loss = 0.0;
    Tensor grad_logits;
};

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const uint8_t> labels);

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2, non-overlapping. Ties break to the first element
// in row-major window order.
// ---------------------------------------------------------------------------

struct PoolResult {
    Tensor output;
    std::vector<int32_t> argmax;  // flat input index per output element
};

PoolResult maxpool2x2_forward(const Tensor& input);
Tensor maxpool2x2_backward(const std::vector<int32_t>& argmax,
                           const std::vector<int>& input_shape, const Tensor& grad_out);

}  // namespace mcnn::ops
