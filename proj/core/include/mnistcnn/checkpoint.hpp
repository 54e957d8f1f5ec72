#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mnistcnn/model.hpp"
#include "mnistcnn/optim.hpp"

namespace mcnn {

/// Versioned little-endian binary container for a trained model: named
/// tensors, optional optimizer and EMA state, run metadata, CRC32 trailer.

struct CheckpointMeta {
    int32_t epoch = -1;
    uint64_t seed = 0;
    double test_accuracy = -1.0;  // < 0 when not recorded
};

struct Checkpoint {
    uint32_t version = 1;
    std::string model_name;
    BnMode bn_mode = BnMode::All;
    uint64_t fingerprint = 0;
    CheckpointMeta meta;
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::optional<AdamState> adam;
    std::optional<EmaState> ema;
};

Checkpoint make_checkpoint(Model& model, const AdamState* adam = nullptr,
                           const EmaState* ema = nullptr, CheckpointMeta meta = {});

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Copy checkpoint tensors into a model; throws FingerprintMismatch when the
/// checkpoint was produced by a structurally different spec.
void load_into_model(const Checkpoint& checkpoint, Model& model);

/// Model built from the checkpoint's own recorded spec name and BN mode.
Model model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace mcnn
