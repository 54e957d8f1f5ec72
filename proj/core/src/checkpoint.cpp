#include "mnistcnn/checkpoint.hpp"

#include <cstring>

#include "mnistcnn/digest.hpp"
#include "mnistcnn/idx.hpp"

namespace mcnn {

namespace {

constexpr char kMagic[8] = {'M', 'N', 'C', 'N', 'C', 'K', 'P', 'T'};

struct Writer {
    std::vector<uint8_t> bytes;

    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    template <typename T>
    void pod(T v) { raw(&v, sizeof(T)); }
    void str(const std::string& s) {
        pod<uint32_t>(uint32_t(s.size()));
        raw(s.data(), s.size());
    }
    void tensor(const Tensor& t) {
        pod<uint32_t>(uint32_t(t.ndim()));
        for (int d : t.shape()) pod<int32_t>(d);
        raw(t.data(), t.numel() * sizeof(float));
    }
};

struct Reader {
    std::span<const uint8_t> bytes;
    size_t pos = 0;

    void raw(void* p, size_t n) {
        if (pos + n > bytes.size()) throw CorruptFile("checkpoint truncated");
        std::memcpy(p, bytes.data() + pos, n);
        pos += n;
    }
    template <typename T>
    T pod() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    std::string str() {
        const uint32_t n = pod<uint32_t>();
        if (pos + n > bytes.size()) throw CorruptFile("checkpoint truncated");
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
    Tensor tensor() {
        const uint32_t ndim = pod<uint32_t>();
        if (ndim == 0 || ndim > 8) throw CorruptFile("checkpoint tensor rank out of range");
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = pod<int32_t>();
        Tensor t(shape);
        raw(t.data(), t.numel() * sizeof(float));
        return t;
    }
};

}  // namespace

Checkpoint make_checkpoint(Model& model, const AdamState* adam, const EmaState* ema,
                           CheckpointMeta meta) {
    Checkpoint ckpt;
    ckpt.model_name = model.spec().name;
    ckpt.bn_mode = model.spec().bn_mode;
    ckpt.fingerprint = model.fingerprint();
    ckpt.meta = meta;
    for (auto& [name, tensor] : model.named_tensors()) ckpt.tensors.emplace_back(name, *tensor);
    if (adam) ckpt.adam = *adam;
    if (ema) ckpt.ema = *ema;
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.pod<uint32_t>(ckpt.version);
    w.pod<uint64_t>(ckpt.fingerprint);
    w.str(ckpt.model_name);
    w.pod<uint32_t>(uint32_t(ckpt.bn_mode));
    w.pod<int32_t>(ckpt.meta.epoch);
    w.pod<uint64_t>(ckpt.meta.seed);
    w.pod<double>(ckpt.meta.test_accuracy);

    w.pod<uint32_t>(uint32_t(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        w.str(name);
        w.tensor(tensor);
    }

    w.pod<uint8_t>(ckpt.adam ? 1 : 0);
    if (ckpt.adam) {
        w.pod<int64_t>(ckpt.adam->t);
        w.pod<float>(ckpt.adam->beta1);
        w.pod<float>(ckpt.adam->beta2);
        w.pod<float>(ckpt.adam->eps);
        w.pod<uint32_t>(uint32_t(ckpt.adam->m.size()));
        for (const Tensor& t : ckpt.adam->m) w.tensor(t);
        for (const Tensor& t : ckpt.adam->v) w.tensor(t);
    }

    w.pod<uint8_t>(ckpt.ema ? 1 : 0);
    if (ckpt.ema) {
        w.pod<double>(ckpt.ema->decay);
        w.pod<uint32_t>(uint32_t(ckpt.ema->shadow.size()));
        for (const Tensor& t : ckpt.ema->shadow) w.tensor(t);
    }

    const uint32_t checksum = crc32(w.bytes);
    w.pod<uint32_t>(checksum);
    write_file(path, w.bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file(path);
    if (bytes.size() < sizeof(kMagic) + 4) throw CorruptFile("checkpoint too short");
    const size_t body = bytes.size() - 4;
    uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, 4);
    if (crc32({bytes.data(), body}) != stored)
        throw CorruptFile("checkpoint checksum mismatch: " + path);

    Reader r{{bytes.data(), body}};
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CorruptFile("not a checkpoint file: " + path);

    Checkpoint ckpt;
    ckpt.version = r.pod<uint32_t>();
    if (ckpt.version != 1)
        throw VersionMismatch("unsupported checkpoint version " + std::to_string(ckpt.version));
    ckpt.fingerprint = r.pod<uint64_t>();
    ckpt.model_name = r.str();
    ckpt.bn_mode = BnMode(r.pod<uint32_t>());
    ckpt.meta.epoch = r.pod<int32_t>();
    ckpt.meta.seed = r.pod<uint64_t>();
    ckpt.meta.test_accuracy = r.pod<double>();

    const uint32_t tensor_count = r.pod<uint32_t>();
    for (uint32_t i = 0; i < tensor_count; ++i) {
        std::string name = r.str();
        ckpt.tensors.emplace_back(std::move(name), r.tensor());
    }

    if (r.pod<uint8_t>()) {
        AdamState adam;
        adam.t = r.pod<int64_t>();
        adam.beta1 = r.pod<float>();
        adam.beta2 = r.pod<float>();
        adam.eps = r.pod<float>();
        const uint32_t n = r.pod<uint32_t>();
        for (uint32_t i = 0; i < n; ++i) adam.m.push_back(r.tensor());
        for (uint32_t i = 0; i < n; ++i) adam.v.push_back(r.tensor());
        ckpt.adam = std::move(adam);
    }

    if (r.pod<uint8_t>()) {
        EmaState ema;
        ema.decay = r.pod<double>();
        const uint32_t n = r.pod<uint32_t>();
        for (uint32_t i = 0; i < n; ++i) ema.shadow.push_back(r.tensor());
        ckpt.ema = std::move(ema);
    }
    return ckpt;
}

void load_into_model(const Checkpoint& ckpt, Model& model) {
    if (ckpt.fingerprint != model.fingerprint())
        throw FingerprintMismatch("checkpoint was produced by model '" + ckpt.model_name +
                                  "', incompatible with '" + model.spec().name + "'");
    auto named = model.named_tensors();
    if (named.size() != ckpt.tensors.size())
        throw FingerprintMismatch("checkpoint tensor count mismatch");
    for (size_t i = 0; i < named.size(); ++i) {
        if (named[i].first != ckpt.tensors[i].first)
            throw FingerprintMismatch("checkpoint tensor name mismatch: " + named[i].first);
        if (!named[i].second->same_shape(ckpt.tensors[i].second))
            throw FingerprintMismatch("checkpoint tensor shape mismatch: " + named[i].first);
        *named[i].second = ckpt.tensors[i].second;
    }
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    Model model(build_model(ckpt.model_name, ckpt.bn_mode));
    load_into_model(ckpt, model);
    return model;
}

}  // namespace mcnn
