#pragma once

#include <array>
#include <string>
#include <vector>

#include "mnistcnn/nn_ops.hpp"
#include "mnistcnn/rng.hpp"
#include "mnistcnn/tensor.hpp"

namespace mcnn {

enum class LayerKind { Conv, MaxPool, FullyConnected };
enum class BnMode { All, FinalOnly, None };

struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    int kernel = 0;        // conv only
    int out_channels = 0;  // conv: channels, fc: features
    int padding = 0;
    bool batch_norm = false;
    bool relu = false;
};

struct ModelSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    BnMode bn_mode = BnMode::All;
};

// M-models: padding-free convolutions, BN+ReLU everywhere, one FC with 1D BN.
ModelSpec build_m3();
ModelSpec build_m5();
ModelSpec build_m7();

// Pooling baselines in canonical layouts.
ModelSpec build_baseline(const std::string& name);  // c1 | c2 | c3

/// Dispatch by name (m3, m5, m7, c1, c2, c3) and apply a BN placement mode.
ModelSpec build_model(const std::string& name, BnMode bn_mode = BnMode::All);

void apply_bn_mode(ModelSpec& spec, BnMode mode);

BnMode bn_mode_from_string(const std::string& s);
std::string to_string(BnMode mode);

/// (C, H, W) after each layer, starting from 1x28x28 input.
std::vector<std::array<int, 3>> feature_shapes(const ModelSpec& spec);

/// Structural hash covering name, layers, and BN placement.
uint64_t spec_fingerprint(const ModelSpec& spec);

struct LayerParams {
    Tensor weight;
    Tensor bias;
    ops::BatchNormState bn;
    bool has_params = false;
    bool has_bn = false;
};

struct LayerCache {
    Tensor input;     // conv: padded input; fc: flattened input
    ops::BnCache bn;
    Tensor pre_relu;  // post-BN activation input
    std::vector<int32_t> pool_argmax;
    std::vector<int> in_shape;  // shape entering the layer (pre padding/flatten)
};

/// A built network: spec plus parameters, with explicit forward/backward.
class Model {
public:
    explicit Model(ModelSpec spec);

    /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases;
    /// BN gamma=1, beta=0, running stats (0, 1).
    void init_params(uint64_t seed);

    Tensor forward(const Tensor& input, bool train, std::vector<LayerCache>* caches = nullptr);

    /// Gradients aligned with parameters(), consuming the caches from a
    /// train-mode forward.
    std::vector<Tensor> backward(const std::vector<LayerCache>& caches,
                                 const Tensor& grad_logits);

    /// Learnable tensors in a fixed, documented order.
    std::vector<Tensor*> parameters();

    /// Learnable tensors plus (optionally) BN running statistics; the set the
    /// evaluation-time moving average tracks.
    std::vector<Tensor*> tracked_tensors(bool include_bn_stats = true);

    /// Every persistent tensor with its checkpoint name.
    std::vector<std::pair<std::string, Tensor*>> named_tensors();

    const ModelSpec& spec() const { return spec_; }
    uint64_t fingerprint() const { return spec_fingerprint(spec_); }

    std::vector<LayerParams>& layers() { return layers_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

private:
    ModelSpec spec_;
    std::vector<LayerParams> layers_;
};

}  // namespace mcnn
