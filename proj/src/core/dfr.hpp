#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/datagen.hpp"
#include "core/nn.hpp"

namespace dfrlab {

struct FeatureMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;  // rows*cols, row-major
  std::vector<uint8_t> labels;
  std::vector<GroupId> groups;

  double at(size_t r, size_t c) const { return values[r * cols + c]; }
};

struct DfrConfig {
  double l1_lambda = 0.05;
  uint32_t max_iters = 5000;
  double step_size = 0.1;
  double tol = 1e-8;  // on objective decrease
  uint32_t n_subset_repeats = 1;
  bool standardize = false;
  uint64_t seed = 0;
};

void validate(const DfrConfig& cfg);

struct DfrResult {
  Head head;
  double zero_fraction = 0.0;
  bool converged = false;
  uint32_t iterations = 0;
  std::vector<double> objective_trace;  // accepted iterates, non-increasing
  // One entry per balanced subset that was solved (empty when the features
  // were used as given).
  std::vector<std::vector<size_t>> subset_indices;
  bool standardized = false;
};

// m = min group size samples per group, drawn uniformly without
// replacement; indices are sorted within each group and groups are
// concatenated in index order. Throws Errc::GroupBalance naming any empty
// group.
std::vector<size_t> balanced_subset(std::span<const GroupId> groups,
                                    uint64_t seed);

// Row i = forward(encoder, samples[i]).features; labels/groups carried
// through.
FeatureMatrix extract_features(const TrainedModel& model,
                               std::span<const Sample> samples);

FeatureMatrix select_rows(const FeatureMatrix& fm,
                          std::span<const size_t> indices);

// sign(v) * max(|v| - t, 0); t must be >= 0.
double soft_threshold(double v, double t);

// L1-penalized logistic regression by full-batch proximal gradient descent
// from (w,b) = 0, bias unpenalized, with step halving on objective
// increase. With n_subset_repeats > 1 the solve runs once per independent
// balanced subset drawn from the given rows and the resulting (w, b) are
// averaged elementwise; with 1 repeat the rows are used as given.
DfrResult retrain_head(const FeatureMatrix& features, const DfrConfig& cfg);

// Encoder is carried over bitwise; only the head is replaced.
TrainedModel apply_dfr(const TrainedModel& model, const DfrResult& result);

// Fraction of head weights exactly equal to zero.
double sparsity(const Head& head);

// Validation-split orchestration: extract features, balance, retrain.
DfrResult run_dfr(const TrainedModel& model, const GroupedDataset& dataset,
                  const DfrConfig& cfg);

}  // namespace dfrlab
