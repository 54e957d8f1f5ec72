#include "mnistcnn/model.hpp"

#include <cmath>

namespace mcnn {

namespace {

LayerSpec conv(int kernel, int channels, int padding = 0) {
    return {LayerKind::Conv, kernel, channels, padding, true, true};
}

LayerSpec pool() { return {LayerKind::MaxPool, 0, 0, 0, false, false}; }

LayerSpec fc(int features, bool bn, bool relu) {
    return {LayerKind::FullyConnected, 0, features, 0, bn, relu};
}

}  // namespace

ModelSpec build_m3() {
    ModelSpec spec{"m3", {}, BnMode::All};
    for (int i = 1; i <= 10; ++i) spec.layers.push_back(conv(3, 16 * (i + 1)));
    spec.layers.push_back(fc(10, true, false));  // 8*8*176 = 11264 -> 10
    return spec;
}

ModelSpec build_m5() {
    ModelSpec spec{"m5", {}, BnMode::All};
    for (int i = 1; i <= 5; ++i) spec.layers.push_back(conv(5, 32 * i));
    spec.layers.push_back(fc(10, true, false));  // 8*8*160 = 10240 -> 10
    return spec;
}

ModelSpec build_m7() {
    ModelSpec spec{"m7", {}, BnMode::All};
    for (int i = 1; i <= 4; ++i) spec.layers.push_back(conv(7, 48 * i));
    spec.layers.push_back(fc(10, true, false));  // 4*4*192 = 3072 -> 10
    return spec;
}

ModelSpec build_baseline(const std::string& name) {
    // canonical conv/pool layouts; padding 2 keeps the 28->14->7 pipeline even
    if (name == "c1") {
        return {"c1",
                {conv(5, 32, 2), pool(), conv(5, 64, 2), pool(), fc(10, false, false)},
                BnMode::All};
    }
    if (name == "c2") {
        return {"c2",
                {conv(5, 32, 2), pool(), conv(5, 64, 2), pool(), fc(128, true, true),
                 fc(10, false, false)},
                BnMode::All};
    }
    if (name == "c3") {
        return {"c3",
                {conv(5, 32, 2), conv(5, 32, 2), pool(), conv(5, 64, 2), conv(5, 64, 2), pool(),
                 fc(10, false, false)},
                BnMode::All};
    }
    throw UnknownModel("unknown baseline model: " + name);
}

ModelSpec build_model(const std::string& name, BnMode bn_mode) {
    ModelSpec spec;
    if (name == "m3")
        spec = build_m3();
    else if (name == "m5")
        spec = build_m5();
    else if (name == "m7")
        spec = build_m7();
    else if (name == "c1" || name == "c2" || name == "c3")
        spec = build_baseline(name);
    else
        throw UnknownModel("unknown model: " + name);
    apply_bn_mode(spec, bn_mode);
    return spec;
}

void apply_bn_mode(ModelSpec& spec, BnMode mode) {
    spec.bn_mode = mode;
    if (mode == BnMode::All) return;
    const size_t last = spec.layers.size() - 1;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        if (mode == BnMode::None)
            spec.layers[i].batch_norm = false;
        else if (mode == BnMode::FinalOnly)
            spec.layers[i].batch_norm = (i == last);
    }
}

BnMode bn_mode_from_string(const std::string& s) {
    if (s == "all") return BnMode::All;
    if (s == "final_only" || s == "final-only") return BnMode::FinalOnly;
    if (s == "none") return BnMode::None;
    throw Error("unknown bn mode: " + s);
}

std::string to_string(BnMode mode) {
    switch (mode) {
        case BnMode::All: return "all";
        case BnMode::FinalOnly: return "final_only";
        case BnMode::None: return "none";
    }
    return "?";
}

std::vector<std::array<int, 3>> feature_shapes(const ModelSpec& spec) {
    std::vector<std::array<int, 3>> shapes;
    int c = 1, h = 28, w = 28;
    for (const LayerSpec& layer : spec.layers) {
        switch (layer.kind) {
            case LayerKind::Conv:
                h = h + 2 * layer.padding - layer.kernel + 1;
                w = w + 2 * layer.padding - layer.kernel + 1;
                c = layer.out_channels;
                break;
            case LayerKind::MaxPool:
                h /= 2;
                w /= 2;
                break;
            case LayerKind::FullyConnected:
                c = layer.out_channels;
                h = 1;
                w = 1;
                break;
        }
        if (h <= 0 || w <= 0) throw ShapeMismatch("model shrinks feature map to nothing");
        shapes.push_back({c, h, w});
    }
    return shapes;
}

uint64_t spec_fingerprint(const ModelSpec& spec) {
    // FNV-1a over a canonical structural description
    std::string desc = spec.name + "|" + to_string(spec.bn_mode);
    for (const LayerSpec& l : spec.layers) {
        desc += ";k=" + std::to_string(int(l.kind)) + ",ker=" + std::to_string(l.kernel) +
                ",out=" + std::to_string(l.out_channels) + ",pad=" + std::to_string(l.padding) +
                ",bn=" + std::to_string(l.batch_norm) + ",relu=" + std::to_string(l.relu);
    }
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (char ch : desc) {
        hash ^= uint8_t(ch);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
    const auto shapes = feature_shapes(spec_);
    int c = 1, h = 28, w = 28;
    for (size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& layer = spec_.layers[i];
        LayerParams params;
        switch (layer.kind) {
            case LayerKind::Conv:
                params.weight = Tensor::zeros({layer.out_channels, c, layer.kernel, layer.kernel});
                params.bias = Tensor::zeros({layer.out_channels});
                params.has_params = true;
                break;
            case LayerKind::MaxPool:
                break;
            case LayerKind::FullyConnected:
                params.weight = Tensor::zeros({c * h * w, layer.out_channels});
                params.bias = Tensor::zeros({layer.out_channels});
                params.has_params = true;
                break;
        }
        if (layer.batch_norm) {
            params.bn = ops::BatchNormState::make(layer.out_channels);
            params.has_bn = true;
        }
        layers_.push_back(std::move(params));
        c = shapes[i][0];
        h = shapes[i][1];
        w = shapes[i][2];
    }
}

void Model::init_params(uint64_t seed) {
    Rng rng = make_rng(seed, 0x1247);
    for (size_t i = 0; i < layers_.size(); ++i) {
        LayerParams& params = layers_[i];
        if (params.has_params) {
            const LayerSpec& layer = spec_.layers[i];
            int fan_in;
            if (layer.kind == LayerKind::Conv)
                fan_in = params.weight.dim(1) * layer.kernel * layer.kernel;
            else
                fan_in = params.weight.dim(0);
            const float bound = 1.0f / std::sqrt(float(fan_in));
            std::uniform_real_distribution<float> dist(-bound, bound);
            for (size_t j = 0; j < params.weight.numel(); ++j) params.weight[j] = dist(rng);
            for (size_t j = 0; j < params.bias.numel(); ++j) params.bias[j] = dist(rng);
        }
        if (params.has_bn) params.bn = ops::BatchNormState::make(params.bn.channels());
    }
}

Tensor Model::forward(const Tensor& input, bool train, std::vector<LayerCache>* caches) {
    if (caches) caches->assign(layers_.size(), {});
    Tensor x = input;
    for (size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& layer = spec_.layers[i];
        LayerParams& params = layers_[i];
        LayerCache* cache = caches ? &(*caches)[i] : nullptr;
        if (cache) cache->in_shape = x.shape();
        switch (layer.kind) {
            case LayerKind::Conv: {
                Tensor padded = layer.padding > 0 ? ops::pad2d(x, layer.padding) : std::move(x);
                Tensor y = ops::conv2d_forward(padded, params.weight, params.bias);
                if (cache) cache->input = std::move(padded);
                x = std::move(y);
                break;
            }
            case LayerKind::MaxPool: {
                ops::PoolResult result = ops::maxpool2x2_forward(x);
                if (cache) cache->pool_argmax = std::move(result.argmax);
                x = std::move(result.output);
                break;
            }
            case LayerKind::FullyConnected: {
                Tensor flat = x.reshaped({x.dim(0), int(x.numel()) / x.dim(0)});
                Tensor y = ops::linear_forward(flat, params.weight, params.bias);
                if (cache) cache->input = std::move(flat);
                x = std::move(y);
                break;
            }
        }
        if (params.has_bn)
            x = ops::batchnorm_forward(x, params.bn, train, cache ? &cache->bn : nullptr);
        if (layer.relu) {
            if (cache) cache->pre_relu = x;
            x = ops::relu_forward(x);
        }
    }
    return x;
}

std::vector<Tensor> Model::backward(const std::vector<LayerCache>& caches,
                                    const Tensor& grad_logits) {
    if (caches.size() != layers_.size())
        throw Error("backward called without train-mode caches");
    std::vector<std::vector<Tensor>> per_layer(layers_.size());
    Tensor grad = grad_logits;
    for (size_t ri = layers_.size(); ri-- > 0;) {
        const LayerSpec& layer = spec_.layers[ri];
        LayerParams& params = layers_[ri];
        const LayerCache& cache = caches[ri];
        if (layer.relu) grad = ops::relu_backward(cache.pre_relu, grad);
        Tensor grad_gamma, grad_beta;
        if (params.has_bn) {
            ops::BnGrads bn = ops::batchnorm_backward(cache.bn, params.bn.gamma, grad);
            grad = std::move(bn.grad_input);
            grad_gamma = std::move(bn.grad_gamma);
            grad_beta = std::move(bn.grad_beta);
        }
        switch (layer.kind) {
            case LayerKind::Conv: {
                ops::ConvGrads g = ops::conv2d_backward(cache.input, params.weight, grad);
                grad = layer.padding > 0 ? ops::unpad2d(g.grad_input, layer.padding)
                                         : std::move(g.grad_input);
                per_layer[ri].push_back(std::move(g.grad_weight));
                per_layer[ri].push_back(std::move(g.grad_bias));
                break;
            }
            case LayerKind::MaxPool: {
                grad = ops::maxpool2x2_backward(cache.pool_argmax, cache.in_shape, grad);
                break;
            }
            case LayerKind::FullyConnected: {
                ops::LinearGrads g = ops::linear_backward(cache.input, params.weight, grad);
                grad = g.grad_input.reshaped(cache.in_shape);
                per_layer[ri].push_back(std::move(g.grad_weight));
                per_layer[ri].push_back(std::move(g.grad_bias));
                break;
            }
        }
        if (params.has_bn) {
            per_layer[ri].push_back(std::move(grad_gamma));
            per_layer[ri].push_back(std::move(grad_beta));
        }
    }
    std::vector<Tensor> grads;
    for (auto& layer_grads : per_layer)
        for (auto& g : layer_grads) grads.push_back(std::move(g));
    return grads;
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    for (LayerParams& params : layers_) {
        if (params.has_params) {
            out.push_back(&params.weight);
            out.push_back(&params.bias);
        }
        if (params.has_bn) {
            out.push_back(&params.bn.gamma);
            out.push_back(&params.bn.beta);
        }
    }
    return out;
}

std::vector<Tensor*> Model::tracked_tensors(bool include_bn_stats) {
    std::vector<Tensor*> out = parameters();
    if (include_bn_stats)
        for (LayerParams& params : layers_)
            if (params.has_bn) {
                out.push_back(&params.bn.running_mean);
                out.push_back(&params.bn.running_var);
            }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (size_t i = 0; i < layers_.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        LayerParams& params = layers_[i];
        if (params.has_params) {
            out.emplace_back(prefix + ".weight", &params.weight);
            out.emplace_back(prefix + ".bias", &params.bias);
        }
        if (params.has_bn) {
            out.emplace_back(prefix + ".bn.gamma", &params.bn.gamma);
            out.emplace_back(prefix + ".bn.beta", &params.bn.beta);
            out.emplace_back(prefix + ".bn.running_mean", &params.bn.running_mean);
            out.emplace_back(prefix + ".bn.running_var", &params.bn.running_var);
        }
    }
    return out;
}

}  // namespace mcnn
