#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mnistcnn/errors.hpp"

namespace mcnn {

constexpr uint32_t kIdxImageMagic = 0x00000803;
constexpr uint32_t kIdxLabelMagic = 0x00000801;

/// Raw MNIST-style dataset: u8 pixels and u8 labels.
struct RawDataset {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> images;  // count*rows*cols, row-major
    std::vector<uint8_t> labels;  // count, each in 0..9
};

struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> pixels;
};

/// Parse an IDX image file (big-endian magic 0x00000803, three u32 dims).
/// strict_28x28 rejects any file whose rows or cols differ from 28.
IdxImages parse_idx_images(std::span<const uint8_t> bytes, bool strict_28x28 = false);

/// Parse an IDX label file (magic 0x00000801, one u32 count, labels 0..9).
std::vector<uint8_t> parse_idx_labels(std::span<const uint8_t> bytes);

std::vector<uint8_t> serialize_idx_images(const IdxImages& images);
std::vector<uint8_t> serialize_idx_labels(std::span<const uint8_t> labels);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

/// Load an images+labels file pair into one consistency-checked dataset.
RawDataset load_dataset(const std::string& images_path, const std::string& labels_path,
                        bool strict_28x28 = true);

}  // namespace mcnn
