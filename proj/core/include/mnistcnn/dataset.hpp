#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mnistcnn/idx.hpp"
#include "mnistcnn/rng.hpp"
#include "mnistcnn/tensor.hpp"

namespace mcnn {

/// Per-sample random affine augmentation: translation and rotation.
struct AugmentConfig {
    bool translate_enabled = true;
    bool rotate_enabled = true;
    double max_translate_fraction = 0.20;  // of image size, each direction
    double max_rotate_degrees = 20.0;
};

struct AffineParams {
    int dx = 0;
    int dy = 0;
    double theta_degrees = 0.0;
};

/// Map a raw pixel to [-1, 1]: 0 -> -1 exactly, 255 -> +1 exactly.
inline float normalize_pixel(int pixel) {
    return static_cast<float>(pixel) * (2.0f / 255.0f) - 1.0f;
}

/// Draw augmentation parameters. Translation is sampled continuously in
/// +-(fraction * 28) pixels then rounded to whole pixels; rotation stays
/// continuous.
AffineParams sample_affine(Rng& rng, const AugmentConfig& config);

/// Rotate by theta about the image center, then translate by (dx, dy).
/// Inverse-mapped bilinear interpolation; out-of-bounds samples fill with 0.
/// Operates in the raw [0,255] float domain, before normalization.
void apply_affine(const float* src, float* dst, int size, const AffineParams& params);

struct Batch {
    Tensor images;                // N x 1 x 28 x 28, normalized
    std::vector<uint8_t> labels;  // N
};

/// Deterministic epoch batcher: a seeded permutation of the dataset, cut into
/// batches; each sample is augmented with an rng derived from
/// (seed, epoch, original index) so results are schedule-independent.
class Batcher {
public:
    Batcher(const RawDataset& dataset, int batch_size, uint64_t seed, AugmentConfig augment);

    /// Number of batches per epoch (last batch may be short).
    int batches_per_epoch() const;

    Batch make_batch(int epoch, int batch_index) const;

    /// The shuffled index order for one epoch.
    std::vector<int> permutation(int epoch) const;

private:
    const RawDataset& dataset_;
    int batch_size_;
    uint64_t seed_;
    AugmentConfig augment_;
};

/// Whole dataset as a normalized tensor, no augmentation, original order.
Tensor to_eval_tensor(const RawDataset& dataset, int from = 0, int count = -1);

}  // namespace mcnn
