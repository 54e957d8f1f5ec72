#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mnistcnn/rng.hpp"

namespace mcnn {

/// Per-network predicted labels over a fixed test set, plus ground truth.
struct PredictionRow {
    int network_id = 0;
    std::string model_type;  // m3 | m5 | m7 | ...
    std::vector<uint8_t> predictions;
};

struct PredictionMatrix {
    std::vector<PredictionRow> rows;
    std::vector<uint8_t> truth;

    void validate() const;
    const PredictionRow& row_by_id(int network_id) const;
};

void save_prediction_matrix(const std::string& path, const PredictionMatrix& matrix);
PredictionMatrix load_prediction_matrix(const std::string& path);

/// Majority vote over three class labels: the modal class when two or more
/// agree, otherwise a uniform-random pick among the three votes.
uint8_t majority_vote(const std::array<uint8_t, 3>& votes, Rng& rng);

/// Two rounds of majority voting: within each group of three, then across the
/// three group winners. Independent tie-break draws at each level.
uint8_t two_level_vote(const std::array<std::array<uint8_t, 3>, 3>& groups, Rng& rng);

/// Per-image majority vote of three member rows against the truth. Tie-break
/// randomness is seeded per image from (seed, image index), so evaluation
/// order cannot change the result.
double ensemble_accuracy(const PredictionMatrix& matrix, const std::array<int, 3>& member_ids,
                         uint64_t seed);

/// Nine members in three groups of three, two-level voting per image.
double two_level_ensemble_accuracy(const PredictionMatrix& matrix,
                                   const std::array<std::array<int, 3>, 3>& group_ids,
                                   uint64_t seed);

enum class Strategy { Homogeneous, Heterogeneous, TwoLevel };

struct EnsembleConfig {
    Strategy strategy = Strategy::Homogeneous;
    std::string model_type;  // homogeneous only
    int trials = 1000;
    uint64_t seed = 0;
};

struct AccuracyDistribution {
    std::vector<double> samples;
    std::vector<double> bin_edges;  // bins+1 edges, fixed width over [min, max]
    std::vector<int> counts;
    double mean = 0.0;
    double ci_half_width = 0.0;
};

/// Members are drawn without replacement within a trial, uniformly from the
/// eligible pools; heterogeneous trials draw one member per model type.
AccuracyDistribution sample_ensembles(const PredictionMatrix& matrix,
                                      const EnsembleConfig& config, int histogram_bins = 30);

AccuracyDistribution make_distribution(std::vector<double> samples, int histogram_bins = 30);

struct ConfidenceRange {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * s / sqrt(n)
};

ConfidenceRange confidence_range_95(const std::vector<double>& samples);

struct BestPick {
    size_t index = 0;
    double value = 0.0;
};

/// Maximum with the stable lowest-index tie-break.
BestPick best_of(const std::vector<double>& values);

/// Histogram CSV (bin_left, bin_right, count) at `path`, raw samples beside it
/// at `<path minus extension>_samples.csv`. Byte-stable for identical inputs.
void export_distribution_csv(const AccuracyDistribution& distribution, const std::string& path);

}  // namespace mcnn
