#include "core/eval.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace dfrlab {

namespace {

double sample_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double mean_of(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

}  // namespace

GroupMetrics group_accuracies(const TrainedModel& model,
                              std::span<const Sample> split,
                              double threshold) {
  if (split.empty())
    fail(Errc::InvalidArgument, "group_accuracies: empty split");

  std::array<uint64_t, 4> correct{};
  std::array<uint64_t, 4> total{};
  for (const Sample& s : split) {
    const ForwardResult fr = forward(model.encoder, s.image);
    const double p = predict(model.head, fr.features);
    const int pred = p >= threshold ? 1 : 0;
    const int g = s.group.index();
    ++total[g];
    if (pred == s.label) ++correct[g];
  }

  GroupMetrics m;
  uint64_t all_correct = 0, all_total = 0;
  for (int g = 0; g < 4; ++g) {
    if (total[g] == 0)
      fail(Errc::Metric, "group_accuracies: group " + std::to_string(g) +
                             " (label=" + std::to_string(g / 2) +
                             ", patch=" + std::to_string(g % 2) +
                             ") has no samples");
    m.n_per_group[g] = total[g];
    m.per_group_accuracy[g] =
        static_cast<double>(correct[g]) / static_cast<double>(total[g]);
    all_correct += correct[g];
    all_total += total[g];
  }
  m.average_accuracy =
      static_cast<double>(all_correct) / static_cast<double>(all_total);
  return m;
}

int worst_group(const GroupMetrics& erm_metrics) {
  int best = 0;
  for (int g = 1; g < 4; ++g)
    if (erm_metrics.per_group_accuracy[g] <
        erm_metrics.per_group_accuracy[best])
      best = g;
  return best;
}

RunSummary summarize_runs(
    std::span<const std::pair<GroupMetrics, GroupMetrics>> per_run) {
  if (per_run.empty())
    fail(Errc::InvalidArgument, "summarize_runs: need at least one run");

  RunSummary s;
  s.n_runs = per_run.size();
  s.single_run = per_run.size() == 1;

  for (int g = 0; g < 4; ++g) {
    std::vector<double> erm, dfr;
    for (const auto& [e, d] : per_run) {
      erm.push_back(e.per_group_accuracy[g]);
      dfr.push_back(d.per_group_accuracy[g]);
    }
    s.erm_group_mean[g] = mean_of(erm);
    s.erm_group_std[g] = sample_std(erm, s.erm_group_mean[g]);
    s.dfr_group_mean[g] = mean_of(dfr);
    s.dfr_group_std[g] = sample_std(dfr, s.dfr_group_mean[g]);
  }
  {
    std::vector<double> erm, dfr;
    for (const auto& [e, d] : per_run) {
      erm.push_back(e.average_accuracy);
      dfr.push_back(d.average_accuracy);
    }
    s.erm_avg_mean = mean_of(erm);
    s.erm_avg_std = sample_std(erm, s.erm_avg_mean);
    s.dfr_avg_mean = mean_of(dfr);
    s.dfr_avg_std = sample_std(dfr, s.dfr_avg_mean);
  }

  GroupMetrics erm_means;
  erm_means.per_group_accuracy = s.erm_group_mean;
  s.worst_group = worst_group(erm_means);

  {
    std::vector<double> erm, dfr;
    for (const auto& [e, d] : per_run) {
      erm.push_back(e.per_group_accuracy[s.worst_group]);
      dfr.push_back(d.per_group_accuracy[s.worst_group]);
    }
    s.erm_worst_mean = mean_of(erm);
    s.erm_worst_std = sample_std(erm, s.erm_worst_mean);
    s.dfr_worst_mean = mean_of(dfr);
    s.dfr_worst_std = sample_std(dfr, s.dfr_worst_mean);
  }
  return s;
}

}  // namespace dfrlab
