#pragma once

#include <string>
#include <vector>

#include "mnistcnn/rng.hpp"
#include "mnistcnn/tensor.hpp"

namespace mcnn::ops {

/// Finite-difference verification of the analytic backward passes.
///
/// The oracle re-implements each forward in double precision by direct
/// summation, reduces the output to a scalar with fixed random weights, and
/// differentiates that scalar with central differences (step 1e-3). The
/// analytic gradient of the float implementation is compared against it.

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::string op;
    std::vector<GradCheckEntry> entries;
    double worst() const;
};

constexpr double kGradCheckStep = 1e-3;
constexpr double kGradCheckTolerance = 1e-3;

/// max over elements of |a - n| / max(|a|, |n|), skipping elements where both
/// magnitudes fall below skip_below (float noise floor).
double max_rel_error(const Tensor& analytic, const std::vector<double>& numeric,
                     double skip_below = 1e-3);

GradCheckReport check_conv2d(Rng& rng);
GradCheckReport check_batchnorm2d(Rng& rng);
GradCheckReport check_batchnorm1d(Rng& rng);
GradCheckReport check_relu(Rng& rng);
GradCheckReport check_linear(Rng& rng);
GradCheckReport check_softmax_cross_entropy(Rng& rng);
GradCheckReport check_maxpool(Rng& rng);

/// Run every check for `rounds` independent seeds; returns the worst report
/// per op.
std::vector<GradCheckReport> run_gradcheck_suite(uint64_t seed, int rounds);

}  // namespace mcnn::ops
