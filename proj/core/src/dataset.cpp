#include "mnistcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mcnn {

namespace {
// distinct sub-stream tags so shuffling and augmentation never share draws
constexpr uint64_t kShuffleStream = 0x53484600;
constexpr uint64_t kAugmentStream = 0x41554700;
}  // namespace

AffineParams sample_affine(Rng& rng, const AugmentConfig& config) {
    AffineParams p;
    if (config.translate_enabled) {
        const double limit = config.max_translate_fraction * 28.0;
        std::uniform_real_distribution<double> shift(-limit, limit);
        p.dx = static_cast<int>(std::lround(shift(rng)));
        p.dy = static_cast<int>(std::lround(shift(rng)));
    }
    if (config.rotate_enabled) {
        std::uniform_real_distribution<double> angle(-config.max_rotate_degrees,
                                                     config.max_rotate_degrees);
        p.theta_degrees = angle(rng);
    }
    return p;
}

void apply_affine(const float* src, float* dst, int size, const AffineParams& params) {
    if (params.dx == 0 && params.dy == 0 && params.theta_degrees == 0.0) {
        std::copy(src, src + size_t(size) * size, dst);
        return;
    }
    const double center = (size - 1) / 2.0;
    const double theta = params.theta_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    // forward map: out = R(theta) * (in - center) + center + t
    // inverse map: in = R(-theta) * (out - center - t) + center
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double ox = x - center - params.dx;
            const double oy = y - center - params.dy;
            const double sx = c * ox + s * oy + center;
            const double sy = -s * ox + c * oy + center;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0;
            const double fy = sy - y0;
            auto sample = [&](int yy, int xx) -> double {
                if (xx < 0 || xx >= size || yy < 0 || yy >= size) return 0.0;
                return src[size_t(yy) * size + xx];
            };
            const double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                             fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
            dst[size_t(y) * size + x] = static_cast<float>(v);
        }
    }
}

Batcher::Batcher(const RawDataset& dataset, int batch_size, uint64_t seed, AugmentConfig augment)
    : dataset_(dataset), batch_size_(batch_size), seed_(seed), augment_(augment) {
    if (dataset.count == 0) throw EmptyDataset("cannot batch an empty dataset");
    if (batch_size <= 0) throw Error("batch size must be positive");
}

int Batcher::batches_per_epoch() const {
    return (dataset_.count + batch_size_ - 1) / batch_size_;
}

std::vector<int> Batcher::permutation(int epoch) const {
    std::vector<int> order(dataset_.count);
    for (int i = 0; i < dataset_.count; ++i) order[i] = i;
    Rng rng = make_rng(seed_, kShuffleStream, uint64_t(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

Batch Batcher::make_batch(int epoch, int batch_index) const {
    const auto order = permutation(epoch);
    const int begin = batch_index * batch_size_;
    if (begin >= dataset_.count) throw Error("batch index out of range");
    const int n = std::min(batch_size_, dataset_.count - begin);
    const int hw = dataset_.rows * dataset_.cols;

    Batch batch{Tensor({n, 1, dataset_.rows, dataset_.cols}), {}};
    batch.labels.resize(size_t(n));
    std::vector<float> raw(static_cast<size_t>(hw));
    std::vector<float> augmented(static_cast<size_t>(hw));
    for (int i = 0; i < n; ++i) {
        const int idx = order[size_t(begin + i)];
        const uint8_t* pixels = dataset_.images.data() + size_t(idx) * hw;
        for (int j = 0; j < hw; ++j) raw[size_t(j)] = pixels[j];

        Rng sample_rng = make_rng(seed_, kAugmentStream, uint64_t(epoch), uint64_t(idx));
        const AffineParams params = sample_affine(sample_rng, augment_);
        apply_affine(raw.data(), augmented.data(), dataset_.rows, params);

        float* out = batch.images.data() + size_t(i) * hw;
        for (int j = 0; j < hw; ++j)
            out[j] = augmented[size_t(j)] * (2.0f / 255.0f) - 1.0f;
        batch.labels[size_t(i)] = dataset_.labels[size_t(idx)];
    }
    return batch;
}

Tensor to_eval_tensor(const RawDataset& dataset, int from, int count) {
    if (count < 0) count = dataset.count - from;
    const int hw = dataset.rows * dataset.cols;
    Tensor out({count, 1, dataset.rows, dataset.cols});
    const uint8_t* pixels = dataset.images.data() + size_t(from) * hw;
    for (size_t i = 0; i < size_t(count) * hw; ++i)
        out[i] = normalize_pixel(pixels[i]);
    return out;
}

}  // namespace mcnn
