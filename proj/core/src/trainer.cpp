#include "mnistcnn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mnistcnn/nn_ops.hpp"

namespace mcnn {

namespace {

int argmax_row(const float* row, int k) {
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;  // ties keep the lowest index
    return best;
}

RawDataset take_subset(const RawDataset& data, int count) {
    RawDataset sub;
    sub.count = count;
    sub.rows = data.rows;
    sub.cols = data.cols;
    const size_t hw = size_t(data.rows) * data.cols;
    sub.images.assign(data.images.begin(), data.images.begin() + size_t(count) * hw);
    sub.labels.assign(data.labels.begin(), data.labels.begin() + count);
    return sub;
}

}  // namespace

EvalResult evaluate(Model& model, const RawDataset& data, int batch_size) {
    EvalResult result;
    result.predictions.reserve(size_t(data.count));
    size_t correct = 0;
    for (int from = 0; from < data.count; from += batch_size) {
        const int n = std::min(batch_size, data.count - from);
        Tensor batch = to_eval_tensor(data, from, n);
        Tensor logits = model.forward(batch, /*train=*/false);
        const int k = logits.dim(1);
        for (int i = 0; i < n; ++i) {
            const int pred = argmax_row(logits.data() + size_t(i) * k, k);
            result.predictions.push_back(uint8_t(pred));
            if (pred == data.labels[size_t(from + i)]) ++correct;
        }
    }
    result.accuracy = double(correct) / double(data.count);
    return result;
}

Model ema_view(const Model& model, const EmaState& ema, bool include_bn_stats) {
    Model view = model;
    auto tracked = view.tracked_tensors(include_bn_stats);
    if (tracked.size() != ema.shadow.size())
        throw ShapeMismatch("ema_view tracked tensor count mismatch");
    for (size_t i = 0; i < tracked.size(); ++i) *tracked[i] = ema.shadow[i];
    return view;
}

TrainResult train_run(const TrainConfig& config, const RawDataset& train,
                      const RawDataset& test) {
    if (config.epochs < 1) throw Error("epochs must be >= 1");
    if (config.batch_size < 2) throw Error("batch size must be >= 2 (batchnorm)");

    const RawDataset* train_data = &train;
    RawDataset subset_storage;
    if (config.subset > 0 && config.subset < train.count) {
        subset_storage = take_subset(train, config.subset);
        train_data = &subset_storage;
    }

    Model model(build_model(config.model_name, config.bn_mode));
    model.init_params(config.seed);
    auto params = model.parameters();
    AdamState adam = AdamState::make(params);

    auto tracked = model.tracked_tensors(config.ema_include_bn_stats);
    std::vector<const Tensor*> tracked_const(tracked.begin(), tracked.end());
    EmaState ema = EmaState::make(tracked_const, config.ema_decay);

    Batcher batcher(*train_data, config.batch_size, config.seed, config.augment);
    const int batches = batcher.batches_per_epoch();

    TrainResult result;
    double best_metric = -1.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(config.lr_schedule, epoch);
        double loss_sum = 0.0;
        for (int b = 0; b < batches; ++b) {
            Batch batch = batcher.make_batch(epoch, b);
            std::vector<LayerCache> caches;
            Tensor logits = model.forward(batch.images, /*train=*/true, &caches);
            ops::LossResult loss = ops::softmax_cross_entropy(logits, batch.labels);
            if (!std::isfinite(loss.loss))
                throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(b));
            std::vector<Tensor> grads = model.backward(caches, loss.grad_logits);
            std::vector<const Tensor*> grad_ptrs;
            grad_ptrs.reserve(grads.size());
            for (const Tensor& g : grads) grad_ptrs.push_back(&g);
            adam_step(params, grad_ptrs, adam, static_cast<float>(lr));
            ema_update(ema, tracked_const);
            loss_sum += loss.loss;
        }

        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.lr = lr;
        metrics.mean_loss = loss_sum / batches;
        if (config.track_train_accuracy)
            metrics.train_acc = evaluate(model, *train_data).accuracy;

        const bool eval_now =
            (epoch + 1) % config.eval_every == 0 || epoch == config.epochs - 1;
        if (eval_now) {
            Model eval_model = ema_view(model, ema, config.ema_include_bn_stats);
            metrics.test_acc_ema = evaluate(eval_model, test).accuracy;

            const double selector =
                config.best_by_train_loss ? -metrics.mean_loss : metrics.test_acc_ema;
            if (selector > best_metric) {
                best_metric = selector;
                result.best_epoch = epoch;
                result.best_accuracy = metrics.test_acc_ema;
                result.best_checkpoint = make_checkpoint(
                    eval_model, nullptr, nullptr,
                    {epoch, config.seed, metrics.test_acc_ema});
            }
        }
        result.metrics.push_back(metrics);
    }

    const double final_acc = result.metrics.back().test_acc_ema;
    result.final_checkpoint = make_checkpoint(model, &adam, &ema,
                                              {config.epochs - 1, config.seed, final_acc});

    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        write_metrics_csv(config.output_dir + "/metrics.csv", result.metrics);
        save_checkpoint(config.output_dir + "/final.ckpt", result.final_checkpoint);
        if (config.save_best) save_checkpoint(config.output_dir + "/best.ckpt",
                                              result.best_checkpoint);
    }
    return result;
}

BandStats epoch_band_stats(std::span<const EpochMetrics> metrics, int from_epoch,
                           int to_epoch) {
    if (from_epoch < 1 || to_epoch < from_epoch)
        throw BandOutOfRange("invalid epoch band");
    if (metrics.empty() || metrics.back().epoch + 1 < to_epoch)
        throw BandOutOfRange("metrics log does not cover the requested band");
    BandStats stats{1.0, 0.0, 0.0};
    int count = 0;
    for (const EpochMetrics& m : metrics) {
        const int one_based = m.epoch + 1;
        if (one_based < from_epoch || one_based > to_epoch || m.test_acc_ema < 0) continue;
        stats.min = std::min(stats.min, m.test_acc_ema);
        stats.max = std::max(stats.max, m.test_acc_ema);
        stats.avg += m.test_acc_ema;
        ++count;
    }
    if (count == 0) throw BandOutOfRange("no evaluated epochs inside the band");
    stats.avg /= count;
    return stats;
}

std::string metrics_to_csv(std::span<const EpochMetrics> metrics) {
    std::string out = "epoch,lr,mean_loss,train_acc,test_acc_ema\n";
    char line[160];
    for (const EpochMetrics& m : metrics) {
        std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.12g,%.12g\n", m.epoch, m.lr,
                      m.mean_loss, m.train_acc, m.test_acc_ema);
        out += line;
    }
    return out;
}

void write_metrics_csv(const std::string& path, std::span<const EpochMetrics> metrics) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << metrics_to_csv(metrics);
}

std::vector<EpochMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<EpochMetrics> metrics;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochMetrics m;
        std::istringstream ss(line);
        char comma;
        ss >> m.epoch >> comma >> m.lr >> comma >> m.mean_loss >> comma >> m.train_acc >>
            comma >> m.test_acc_ema;
        metrics.push_back(m);
    }
    return metrics;
}

}  // namespace mcnn
