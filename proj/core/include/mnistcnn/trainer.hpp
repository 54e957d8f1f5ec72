#pragma once

#include <span>
#include <string>
#include <vector>

#include "mnistcnn/checkpoint.hpp"
#include "mnistcnn/dataset.hpp"
#include "mnistcnn/model.hpp"
#include "mnistcnn/optim.hpp"

namespace mcnn {

struct TrainConfig {
    std::string model_name = "m5";
    BnMode bn_mode = BnMode::All;
    int epochs = 150;
    int batch_size = 120;
    uint64_t seed = 0;
    AugmentConfig augment;
    LrSchedule lr_schedule;
    double ema_decay = 0.999;
    bool ema_include_bn_stats = true;
    int eval_every = 1;           // epochs between test evaluations
    bool save_best = true;
    bool best_by_train_loss = false;  // default: select checkpoint by best test accuracy
    int subset = 0;               // > 0: train on the first N images only
    bool track_train_accuracy = true;  // measured on clean, unaugmented images
    std::string output_dir;       // when set: metrics.csv, final.ckpt, best.ckpt
};

struct EpochMetrics {
    int epoch = 0;          // 0-based
    double lr = 0.0;
    double mean_loss = 0.0;
    double train_acc = -1.0;     // -1 when not measured
    double test_acc_ema = -1.0;  // -1 when not evaluated this epoch
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<uint8_t> predictions;  // argmax label per image, lowest-index ties
};

/// Eval-mode accuracy plus per-image predicted labels (the PredictionMatrix
/// row used for ensembling).
EvalResult evaluate(Model& model, const RawDataset& data, int batch_size = 500);

/// Copy of the model with every EMA-tracked tensor replaced by its shadow.
Model ema_view(const Model& model, const EmaState& ema, bool include_bn_stats = true);

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    Checkpoint final_checkpoint;
    Checkpoint best_checkpoint;
    double best_accuracy = -1.0;
    int best_epoch = -1;
};

/// The full training loop: per-epoch shuffle, augmented batches,
/// forward/backward/Adam/EMA, per-epoch LR decay and EMA evaluation.
/// Deterministic given (config, data).
TrainResult train_run(const TrainConfig& config, const RawDataset& train,
                      const RawDataset& test);

struct BandStats {
    double min = 0.0, avg = 0.0, max = 0.0;
};

/// min/avg/max of test accuracy over 1-based epochs [from, to].
BandStats epoch_band_stats(std::span<const EpochMetrics> metrics, int from_epoch,
                           int to_epoch);

std::string metrics_to_csv(std::span<const EpochMetrics> metrics);
void write_metrics_csv(const std::string& path, std::span<const EpochMetrics> metrics);
std::vector<EpochMetrics> read_metrics_csv(const std::string& path);

}  // namespace mcnn
