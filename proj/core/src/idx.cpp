#include "mnistcnn/idx.hpp"

#include <cstdio>
#include <fstream>

namespace mcnn {

namespace {

uint32_t read_u32_be(std::span<const uint8_t> bytes, size_t offset) {
    if (offset + 4 > bytes.size()) throw Truncated("IDX header truncated");
    return (uint32_t(bytes[offset]) << 24) | (uint32_t(bytes[offset + 1]) << 16) |
           (uint32_t(bytes[offset + 2]) << 8) | uint32_t(bytes[offset + 3]);
}

void append_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

}  // namespace

IdxImages parse_idx_images(std::span<const uint8_t> bytes, bool strict_28x28) {
    uint32_t magic = read_u32_be(bytes, 0);
    if (magic != kIdxImageMagic)
        throw WrongMagic("not an IDX image file (magic " + std::to_string(magic) + ")");
    IdxImages result;
    result.count = static_cast<int>(read_u32_be(bytes, 4));
    result.rows = static_cast<int>(read_u32_be(bytes, 8));
    result.cols = static_cast<int>(read_u32_be(bytes, 12));
    if (strict_28x28 && (result.rows != 28 || result.cols != 28))
        throw BadDims("expected 28x28 images, got " + std::to_string(result.rows) + "x" +
                      std::to_string(result.cols));
    const size_t payload = size_t(result.count) * result.rows * result.cols;
    if (bytes.size() < 16 + payload)
        throw Truncated("IDX image payload shorter than declared size");
    result.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + payload);
    return result;
}

std::vector<uint8_t> parse_idx_labels(std::span<const uint8_t> bytes) {
    uint32_t magic = read_u32_be(bytes, 0);
    if (magic != kIdxLabelMagic)
        throw WrongMagic("not an IDX label file (magic " + std::to_string(magic) + ")");
    const size_t count = read_u32_be(bytes, 4);
    if (bytes.size() < 8 + count)
        throw Truncated("IDX label payload shorter than declared size");
    std::vector<uint8_t> labels(bytes.begin() + 8, bytes.begin() + 8 + count);
    for (uint8_t l : labels)
        if (l > 9) throw BadLabel("label value " + std::to_string(l) + " out of range 0..9");
    return labels;
}

std::vector<uint8_t> serialize_idx_images(const IdxImages& images) {
    std::vector<uint8_t> out;
    out.reserve(16 + images.pixels.size());
    append_u32_be(out, kIdxImageMagic);
    append_u32_be(out, uint32_t(images.count));
    append_u32_be(out, uint32_t(images.rows));
    append_u32_be(out, uint32_t(images.cols));
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<uint8_t> serialize_idx_labels(std::span<const uint8_t> labels) {
    std::vector<uint8_t> out;
    out.reserve(8 + labels.size());
    append_u32_be(out, kIdxLabelMagic);
    append_u32_be(out, uint32_t(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

RawDataset load_dataset(const std::string& images_path, const std::string& labels_path,
                        bool strict_28x28) {
    auto image_bytes = read_file(images_path);
    auto label_bytes = read_file(labels_path);
    IdxImages images = parse_idx_images(image_bytes, strict_28x28);
    auto labels = parse_idx_labels(label_bytes);
    if (size_t(images.count) != labels.size())
        throw ShapeMismatch("image count " + std::to_string(images.count) +
                            " != label count " + std::to_string(labels.size()));
    RawDataset ds;
    ds.count = images.count;
    ds.rows = images.rows;
    ds.cols = images.cols;
    ds.images = std::move(images.pixels);
    ds.labels = std::move(labels);
    return ds;
}

}  // namespace mcnn
