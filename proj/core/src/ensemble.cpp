#include "mnistcnn/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mnistcnn/errors.hpp"

namespace mcnn {

namespace {

constexpr uint64_t kTieStream = 0x7131E00;
constexpr uint64_t kTrialStream = 0x7121A1;

void check_label(uint8_t label) {
    if (label > 9) throw BadLabel("class label " + std::to_string(label) + " out of range");
}

std::vector<size_t> indices_of_type(const PredictionMatrix& matrix, const std::string& type) {
    std::vector<size_t> out;
    for (size_t i = 0; i < matrix.rows.size(); ++i)
        if (matrix.rows[i].model_type == type) out.push_back(i);
    return out;
}

// draw k distinct elements from pool, order-stable in draw order
std::vector<size_t> draw_without_replacement(const std::vector<size_t>& pool, int k, Rng& rng) {
    std::vector<size_t> remaining = pool;
    std::vector<size_t> picked;
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<size_t> dist(0, remaining.size() - 1);
        const size_t j = dist(rng);
        picked.push_back(remaining[j]);
        remaining.erase(remaining.begin() + ptrdiff_t(j));
    }
    return picked;
}

double vote_accuracy(const PredictionMatrix& matrix, const std::vector<const PredictionRow*>& rows,
                     uint64_t seed, bool two_level) {
    const size_t images = matrix.truth.size();
    size_t correct = 0;
    for (size_t img = 0; img < images; ++img) {
        Rng tie_rng = make_rng(seed, kTieStream, img);
        uint8_t result;
        if (!two_level) {
            result = majority_vote({rows[0]->predictions[img], rows[1]->predictions[img],
                                    rows[2]->predictions[img]},
                                   tie_rng);
        } else {
            std::array<std::array<uint8_t, 3>, 3> groups;
            for (int g = 0; g < 3; ++g)
                for (int m = 0; m < 3; ++m)
                    groups[size_t(g)][size_t(m)] = rows[size_t(3 * g + m)]->predictions[img];
            result = two_level_vote(groups, tie_rng);
        }
        if (result == matrix.truth[img]) ++correct;
    }
    return double(correct) / double(images);
}

}  // namespace

void PredictionMatrix::validate() const {
    for (const PredictionRow& row : rows) {
        if (row.predictions.size() != truth.size())
            throw ShapeMismatch("prediction row length != truth length");
        for (uint8_t p : row.predictions) check_label(p);
    }
    for (uint8_t t : truth) check_label(t);
}

const PredictionRow& PredictionMatrix::row_by_id(int network_id) const {
    for (const PredictionRow& row : rows)
        if (row.network_id == network_id) return row;
    throw UnknownMember("no network with id " + std::to_string(network_id));
}

uint8_t majority_vote(const std::array<uint8_t, 3>& votes, Rng& rng) {
    for (uint8_t v : votes) check_label(v);
    if (votes[0] == votes[1] || votes[0] == votes[2]) return votes[0];
    if (votes[1] == votes[2]) return votes[1];
    std::uniform_int_distribution<int> pick(0, 2);
    return votes[size_t(pick(rng))];
}

uint8_t two_level_vote(const std::array<std::array<uint8_t, 3>, 3>& groups, Rng& rng) {
    std::array<uint8_t, 3> winners{};
    for (size_t g = 0; g < 3; ++g) winners[g] = majority_vote(groups[g], rng);
    return majority_vote(winners, rng);
}

double ensemble_accuracy(const PredictionMatrix& matrix, const std::array<int, 3>& member_ids,
                         uint64_t seed) {
    std::vector<const PredictionRow*> rows;
    for (int id : member_ids) rows.push_back(&matrix.row_by_id(id));
    return vote_accuracy(matrix, rows, seed, /*two_level=*/false);
}

double two_level_ensemble_accuracy(const PredictionMatrix& matrix,
                                   const std::array<std::array<int, 3>, 3>& group_ids,
                                   uint64_t seed) {
    std::vector<const PredictionRow*> rows;
    for (const auto& group : group_ids)
        for (int id : group) rows.push_back(&matrix.row_by_id(id));
    return vote_accuracy(matrix, rows, seed, /*two_level=*/true);
}

AccuracyDistribution sample_ensembles(const PredictionMatrix& matrix,
                                      const EnsembleConfig& config, int histogram_bins) {
    matrix.validate();
    static const std::array<std::string, 3> kTypes = {"m3", "m5", "m7"};

    std::vector<std::vector<size_t>> pools;
    int per_pool = 0;
    switch (config.strategy) {
        case Strategy::Homogeneous:
            pools.push_back(indices_of_type(matrix, config.model_type));
            per_pool = 3;
            break;
        case Strategy::Heterogeneous:
            for (const auto& t : kTypes) pools.push_back(indices_of_type(matrix, t));
            per_pool = 1;
            break;
        case Strategy::TwoLevel:
            for (const auto& t : kTypes) pools.push_back(indices_of_type(matrix, t));
            per_pool = 3;
            break;
    }
    for (const auto& pool : pools)
        if (int(pool.size()) < per_pool)
            throw PoolTooSmall("ensemble strategy needs " + std::to_string(per_pool) +
                               " networks per pool, have " + std::to_string(pool.size()));

    std::vector<double> samples;
    samples.reserve(size_t(config.trials));
    for (int trial = 0; trial < config.trials; ++trial) {
        const uint64_t trial_seed = derive_seed(config.seed, kTrialStream, uint64_t(trial));
        Rng rng(trial_seed);
        std::vector<const PredictionRow*> rows;
        for (const auto& pool : pools)
            for (size_t idx : draw_without_replacement(pool, per_pool, rng))
                rows.push_back(&matrix.rows[idx]);
        samples.push_back(
            vote_accuracy(matrix, rows, trial_seed, config.strategy == Strategy::TwoLevel));
    }
    return make_distribution(std::move(samples), histogram_bins);
}

AccuracyDistribution make_distribution(std::vector<double> samples, int histogram_bins) {
    AccuracyDistribution dist;
    dist.samples = std::move(samples);
    if (dist.samples.empty()) return dist;

    const auto [lo_it, hi_it] = std::minmax_element(dist.samples.begin(), dist.samples.end());
    const double lo = *lo_it;
    double hi = *hi_it;
    if (hi == lo) hi = lo + 1e-12;  // degenerate: single bin
    dist.bin_edges.resize(size_t(histogram_bins) + 1);
    for (int i = 0; i <= histogram_bins; ++i)
        dist.bin_edges[size_t(i)] = lo + (hi - lo) * i / histogram_bins;
    dist.counts.assign(size_t(histogram_bins), 0);
    for (double s : dist.samples) {
        int bin = int((s - lo) / (hi - lo) * histogram_bins);
        bin = std::clamp(bin, 0, histogram_bins - 1);
        ++dist.counts[size_t(bin)];
    }

    if (dist.samples.size() >= 2) {
        const ConfidenceRange ci = confidence_range_95(dist.samples);
        dist.mean = ci.mean;
        dist.ci_half_width = ci.half_width;
    } else {
        dist.mean = dist.samples[0];
    }
    return dist;
}

ConfidenceRange confidence_range_95(const std::vector<double>& samples) {
    const size_t n = samples.size();
    if (n < 2) throw TooFewSamples("confidence range needs >= 2 samples");
    double sum = 0.0;
    for (double s : samples) sum += s;
    const double mean = sum / double(n);
    double sq = 0.0;
    for (double s : samples) sq += (s - mean) * (s - mean);
    const double stddev = std::sqrt(sq / double(n - 1));
    return {mean, 1.96 * stddev / std::sqrt(double(n))};
}

BestPick best_of(const std::vector<double>& values) {
    if (values.empty()) throw EmptyInput("best_of on an empty set");
    size_t best = 0;
    for (size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return {best, values[best]};
}

void export_distribution_csv(const AccuracyDistribution& dist, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "bin_left,bin_right,count\n";
    char line[96];
    for (size_t i = 0; i < dist.counts.size(); ++i) {
        std::snprintf(line, sizeof(line), "%.12g,%.12g,%d\n", dist.bin_edges[i],
                      dist.bin_edges[i + 1], dist.counts[i]);
        out << line;
    }

    std::string samples_path = path;
    const size_t dot = samples_path.rfind('.');
    if (dot == std::string::npos)
        samples_path += "_samples";
    else
        samples_path.insert(dot, "_samples");
    std::ofstream samples_out(samples_path, std::ios::trunc);
    if (!samples_out) throw IoError("cannot open " + samples_path + " for writing");
    samples_out << "sample\n";
    for (double s : dist.samples) {
        std::snprintf(line, sizeof(line), "%.12g\n", s);
        samples_out << line;
    }
}

void save_prediction_matrix(const std::string& path, const PredictionMatrix& matrix) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "network_id,model_type,labels...\n";
    auto write_row = [&out](int id, const std::string& type, const std::vector<uint8_t>& labels) {
        out << id << ',' << type;
        for (uint8_t l : labels) out << ',' << int(l);
        out << '\n';
    };
    write_row(-1, "truth", matrix.truth);
    for (const PredictionRow& row : matrix.rows)
        write_row(row.network_id, row.model_type, row.predictions);
}

PredictionMatrix load_prediction_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    PredictionMatrix matrix;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        const int id = std::stoi(field);
        std::string type;
        std::getline(ss, type, ',');
        std::vector<uint8_t> labels;
        while (std::getline(ss, field, ',')) labels.push_back(uint8_t(std::stoi(field)));
        if (id == -1 && type == "truth")
            matrix.truth = std::move(labels);
        else
            matrix.rows.push_back({id, type, std::move(labels)});
    }
    matrix.validate();
    return matrix;
}

}  // namespace mcnn
