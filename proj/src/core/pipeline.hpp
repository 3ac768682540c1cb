#pragma once

#include <array>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/eval.hpp"

namespace dfrlab {

struct RunArtifacts {
  uint32_t run_index = 0;
  uint64_t dataset_seed = 0, train_seed = 0, dfr_seed = 0;
  GroupMetrics erm;  // worst_group filled in
  GroupMetrics dfr;
  double erm_worst_accuracy = 0.0;
  double dfr_accuracy_at_worst = 0.0;  // DFR read at the ERM worst group
  double zero_fraction = 0.0;
  bool dfr_converged = false;
  // Counts indexed spurious_only, core_only, mixed, inactive.
  std::array<int, 4> taxonomy_counts{};
  // Mean spurious score of DFR-zeroed vs retained neurons, over neurons
  // with nonzero activation mass; NaN when a side is empty.
  double spurious_score_zeroed_mean = 0.0;
  double spurious_score_retained_mean = 0.0;
  std::vector<std::string> files;  // paths relative to the output dir
};

struct Report {
  PipelineConfig config;
  std::vector<RunArtifacts> runs;
  RunSummary summary;
};

// Per run seed (base seed + run index): generate, train ERM, evaluate,
// retrain the head on a balanced validation subset, evaluate DFR, export
// the CAM panel and the neuron taxonomy; then summarize. All artifacts are
// deterministic functions of the config; the report JSON additionally
// carries a timestamp. A stage failure writes <out>/FAILED.json and
// rethrows with the stage name; completed outputs are retained.
Report run_pipeline(const PipelineConfig& cfg, const std::string& out_dir);

std::string report_to_json(const Report& report, const std::string& timestamp);
std::string metrics_csv(const Report& report);
std::string current_timestamp();

// CLI drivers; each one maps to a subcommand and works through files under
// out_dir (generate -> dataset.dfrt, train -> model_erm.dfrt, ...).
void cmd_generate(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_train(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_dfr(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_eval(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_cam(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_neurons(const PipelineConfig& cfg, const std::string& out_dir);
void cmd_report(const std::string& out_dir);
void cmd_pipeline(const PipelineConfig& cfg, const std::string& out_dir);

}  // namespace dfrlab
