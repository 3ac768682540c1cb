#pragma once

#include <optional>
#include <string>

#include "core/datagen.hpp"
#include "core/dfr.hpp"
#include "core/interpret.hpp"
#include "core/nn.hpp"

namespace dfrlab {

// Composite configuration for the whole workbench. All fields are optional
// in the JSON form; nested seeds default to the top-level seed. Unknown
// keys are rejected.
struct PipelineConfig {
  uint64_t seed = 42;
  uint32_t n_runs = 5;
  DatasetSpec dataset;
  TrainConfig train;
  DfrConfig dfr;
  double eval_threshold = 0.5;
  TaxonomyThresholds taxonomy;
  uint32_t probes_per_group = 8;
  uint32_t cam_per_group = 2;
};

void validate(const PipelineConfig& cfg);

struct ConfigOverrides {
  std::optional<uint64_t> seed;
  std::optional<uint32_t> n_runs;
};

// Parses JSON text ("" or "{}" mean all defaults). Overrides, when set,
// replace the top-level seed (and every nested seed) and n_runs.
PipelineConfig config_from_json(const std::string& text,
                                const ConfigOverrides& overrides = {});

PipelineConfig load_config_file(const std::string& path,
                                const ConfigOverrides& overrides = {});

// Full echo including defaulted fields.
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace dfrlab
