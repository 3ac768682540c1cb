#pragma once

#include <string>

#include "core/datagen.hpp"
#include "core/dfr.hpp"
#include "core/nn.hpp"

namespace dfrlab {

// Model checkpoints and datasets persist in the tensor container format;
// round-trips are bitwise on every parameter and pixel.
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

void save_dataset(const std::string& path, const GroupedDataset& ds);
GroupedDataset load_dataset(const std::string& path);

// JSON manifest with the spec and per-split per-group counts.
std::string dataset_manifest_json(const GroupedDataset& ds);

std::string dfr_result_json(const DfrResult& result, const DfrConfig& cfg);

}  // namespace dfrlab
