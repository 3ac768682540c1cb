#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "core/datagen.hpp"
#include "core/nn.hpp"

namespace dfrlab {

struct GroupMetrics {
  std::array<double, 4> per_group_accuracy{};
  std::array<uint64_t, 4> n_per_group{};
  double average_accuracy = 0.0;  // micro: total correct / total count
  int worst_group = -1;           // -1 while unset
};

// Prediction is [p >= threshold]; every group must be represented.
GroupMetrics group_accuracies(const TrainedModel& model,
                              std::span<const Sample> split,
                              double threshold = 0.5);

// Argmin of the per-group accuracies, ties broken by lowest group index.
int worst_group(const GroupMetrics& erm_metrics);

struct RunSummary {
  size_t n_runs = 0;
  bool single_run = false;
  std::array<double, 4> erm_group_mean{}, erm_group_std{};
  double erm_avg_mean = 0.0, erm_avg_std = 0.0;
  std::array<double, 4> dfr_group_mean{}, dfr_group_std{};
  double dfr_avg_mean = 0.0, dfr_avg_std = 0.0;
  // Fixed by the ERM mean accuracies; used to read both columns.
  int worst_group = -1;
  double erm_worst_mean = 0.0, erm_worst_std = 0.0;
  double dfr_worst_mean = 0.0, dfr_worst_std = 0.0;
};

// Mean and sample standard deviation (n-1 denominator; 0 for a single
// run, which is flagged).
RunSummary summarize_runs(
    std::span<const std::pair<GroupMetrics, GroupMetrics>> per_run);

}  // namespace dfrlab
