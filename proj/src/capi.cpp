// extern-C surface over the dfrlab core. Handles own their C++ objects;
// errors cross the boundary as status codes plus a thread-local message.

#include "dfrlab/dfrlab.h"

#include <string>

#include "core/config.hpp"
#include "core/datagen.hpp"
#include "core/dfr.hpp"
#include "core/error.hpp"
#include "core/eval.hpp"
#include "core/image_io.hpp"
#include "core/interpret.hpp"
#include "core/nn.hpp"
#include "core/pipeline.hpp"
#include "core/serialize.hpp"

struct dfrlab_dataset {
  dfrlab::GroupedDataset ds;
};
struct dfrlab_model {
  dfrlab::TrainedModel model;
};
struct dfrlab_features {
  dfrlab::FeatureMatrix fm;
};
struct dfrlab_dfr_result {
  dfrlab::DfrResult result;
  dfrlab::DfrConfig cfg;
};

namespace {

thread_local std::string g_last_error;

dfrlab_status to_status(dfrlab::Errc c) {
  switch (c) {
    case dfrlab::Errc::InvalidArgument: return DFRLAB_ERR_INVALID_ARGUMENT;
    case dfrlab::Errc::InvalidSpec: return DFRLAB_ERR_INVALID_SPEC;
    case dfrlab::Errc::ShapeMismatch: return DFRLAB_ERR_SHAPE_MISMATCH;
    case dfrlab::Errc::Io: return DFRLAB_ERR_IO;
    case dfrlab::Errc::Format: return DFRLAB_ERR_FORMAT;
    case dfrlab::Errc::Diverged: return DFRLAB_ERR_DIVERGED;
    case dfrlab::Errc::GroupBalance: return DFRLAB_ERR_GROUP_BALANCE;
    case dfrlab::Errc::Labels: return DFRLAB_ERR_LABELS;
    case dfrlab::Errc::Metric: return DFRLAB_ERR_METRIC;
    case dfrlab::Errc::Probe: return DFRLAB_ERR_PROBE;
    case dfrlab::Errc::Pipeline: return DFRLAB_ERR_PIPELINE;
    default: return DFRLAB_ERR_INTERNAL;
  }
}

template <class F>
dfrlab_status guarded(F&& f) {
  try {
    f();
    return DFRLAB_OK;
  } catch (const dfrlab::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DFRLAB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DFRLAB_ERR_INTERNAL;
  }
}

dfrlab_status bad_arg(const char* msg) {
  g_last_error = msg;
  return DFRLAB_ERR_INVALID_ARGUMENT;
}

dfrlab::Split to_split(dfrlab_split s) {
  switch (s) {
    case DFRLAB_SPLIT_TRAIN: return dfrlab::Split::Train;
    case DFRLAB_SPLIT_VALID: return dfrlab::Split::Valid;
    case DFRLAB_SPLIT_TEST: return dfrlab::Split::Test;
    default:
      dfrlab::fail(dfrlab::Errc::InvalidArgument, "invalid split value");
  }
}

dfrlab::DatasetSpec from_c(const dfrlab_dataset_spec& s) {
  dfrlab::DatasetSpec out;
  out.image_size = s.image_size;
  out.channels = s.channels;
  out.n_train_per_class = s.n_train_per_class;
  out.n_val_per_class = s.n_val_per_class;
  out.n_test_per_class = s.n_test_per_class;
  out.train_correlation = s.train_correlation;
  out.patch_size = s.patch_size;
  out.noise_sigma = s.noise_sigma;
  out.seed = s.seed;
  return out;
}

dfrlab::TrainConfig from_c(const dfrlab_train_config& c) {
  dfrlab::TrainConfig out;
  out.learning_rate = c.learning_rate;
  out.momentum = c.momentum;
  out.epochs = c.epochs;
  out.batch_size = c.batch_size;
  out.weight_decay = c.weight_decay;
  out.seed = c.seed;
  return out;
}

dfrlab::DfrConfig from_c(const dfrlab_dfr_config& c) {
  dfrlab::DfrConfig out;
  out.l1_lambda = c.l1_lambda;
  out.max_iters = c.max_iters;
  out.step_size = c.step_size;
  out.tol = c.tol;
  out.n_subset_repeats = c.n_subset_repeats;
  out.standardize = c.standardize != 0;
  out.seed = c.seed;
  return out;
}

const dfrlab::Sample& sample_at(const dfrlab_dataset* dataset,
                                dfrlab_split split, size_t index) {
  const auto& samples = dataset->ds.split(to_split(split));
  if (index >= samples.size())
    dfrlab::fail(dfrlab::Errc::InvalidArgument,
                 "sample index " + std::to_string(index) +
                     " out of range (split has " +
                     std::to_string(samples.size()) + " samples)");
  return samples[index];
}

dfrlab::ConfigOverrides from_c(const dfrlab_overrides* ov) {
  dfrlab::ConfigOverrides out;
  if (ov) {
    if (ov->has_seed) out.seed = ov->seed;
    if (ov->n_runs > 0) out.n_runs = ov->n_runs;
  }
  return out;
}

dfrlab::PipelineConfig parse_config(const char* config_json,
                                    const dfrlab_overrides* ov) {
  const std::string text = config_json ? config_json : "";
  return dfrlab::config_from_json(text, from_c(ov));
}

}  // namespace

extern "C" {

const char* dfrlab_version(void) { return "1.0.0"; }

const char* dfrlab_status_name(dfrlab_status status) {
  switch (status) {
    case DFRLAB_OK: return "ok";
    case DFRLAB_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case DFRLAB_ERR_INVALID_SPEC: return "invalid_spec";
    case DFRLAB_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case DFRLAB_ERR_IO: return "io";
    case DFRLAB_ERR_FORMAT: return "format";
    case DFRLAB_ERR_DIVERGED: return "diverged";
    case DFRLAB_ERR_GROUP_BALANCE: return "group_balance";
    case DFRLAB_ERR_LABELS: return "labels";
    case DFRLAB_ERR_METRIC: return "metric";
    case DFRLAB_ERR_PROBE: return "probe";
    case DFRLAB_ERR_PIPELINE: return "pipeline";
    default: return "internal";
  }
}

const char* dfrlab_last_error(void) { return g_last_error.c_str(); }

void dfrlab_dataset_spec_init(dfrlab_dataset_spec* spec) {
  if (!spec) return;
  const dfrlab::DatasetSpec d;
  spec->image_size = d.image_size;
  spec->channels = d.channels;
  spec->n_train_per_class = d.n_train_per_class;
  spec->n_val_per_class = d.n_val_per_class;
  spec->n_test_per_class = d.n_test_per_class;
  spec->train_correlation = d.train_correlation;
  spec->patch_size = d.patch_size;
  spec->noise_sigma = d.noise_sigma;
  spec->seed = d.seed;
}

void dfrlab_train_config_init(dfrlab_train_config* cfg) {
  if (!cfg) return;
  const dfrlab::TrainConfig d;
  cfg->learning_rate = d.learning_rate;
  cfg->momentum = d.momentum;
  cfg->epochs = d.epochs;
  cfg->batch_size = d.batch_size;
  cfg->weight_decay = d.weight_decay;
  cfg->seed = d.seed;
}

void dfrlab_dfr_config_init(dfrlab_dfr_config* cfg) {
  if (!cfg) return;
  const dfrlab::DfrConfig d;
  cfg->l1_lambda = d.l1_lambda;
  cfg->max_iters = d.max_iters;
  cfg->step_size = d.step_size;
  cfg->tol = d.tol;
  cfg->n_subset_repeats = d.n_subset_repeats;
  cfg->standardize = d.standardize ? 1 : 0;
  cfg->seed = d.seed;
}

dfrlab_status dfrlab_dataset_generate(const dfrlab_dataset_spec* spec,
                                      dfrlab_dataset** out) {
  if (!spec || !out) return bad_arg("dataset_generate: NULL argument");
  return guarded([&] {
    auto handle = new dfrlab_dataset{dfrlab::generate_dataset(from_c(*spec))};
    *out = handle;
  });
}

dfrlab_status dfrlab_dataset_save(const dfrlab_dataset* dataset,
                                  const char* path) {
  if (!dataset || !path) return bad_arg("dataset_save: NULL argument");
  return guarded([&] { dfrlab::save_dataset(path, dataset->ds); });
}

dfrlab_status dfrlab_dataset_load(const char* path, dfrlab_dataset** out) {
  if (!path || !out) return bad_arg("dataset_load: NULL argument");
  return guarded([&] {
    *out = new dfrlab_dataset{dfrlab::load_dataset(path)};
  });
}

void dfrlab_dataset_free(dfrlab_dataset* dataset) { delete dataset; }

dfrlab_status dfrlab_dataset_split_size(const dfrlab_dataset* dataset,
                                        dfrlab_split split, size_t* out) {
  if (!dataset || !out) return bad_arg("dataset_split_size: NULL argument");
  return guarded([&] { *out = dataset->ds.split(to_split(split)).size(); });
}

dfrlab_status dfrlab_dataset_group_counts(const dfrlab_dataset* dataset,
                                          dfrlab_split split,
                                          uint64_t counts[4]) {
  if (!dataset || !counts)
    return bad_arg("dataset_group_counts: NULL argument");
  return guarded([&] {
    for (int g = 0; g < 4; ++g) counts[g] = 0;
    for (const auto& s : dataset->ds.split(to_split(split)))
      ++counts[s.group.index()];
  });
}

dfrlab_status dfrlab_train_erm(const dfrlab_dataset* dataset,
                               const dfrlab_train_config* cfg,
                               dfrlab_model** out) {
  if (!dataset || !cfg || !out) return bad_arg("train_erm: NULL argument");
  return guarded([&] {
    *out = new dfrlab_model{dfrlab::train_erm(dataset->ds, from_c(*cfg))};
  });
}

dfrlab_status dfrlab_model_save(const dfrlab_model* model, const char* path) {
  if (!model || !path) return bad_arg("model_save: NULL argument");
  return guarded([&] { dfrlab::save_model(path, model->model); });
}

dfrlab_status dfrlab_model_load(const char* path, dfrlab_model** out) {
  if (!path || !out) return bad_arg("model_load: NULL argument");
  return guarded([&] { *out = new dfrlab_model{dfrlab::load_model(path)}; });
}

void dfrlab_model_free(dfrlab_model* model) { delete model; }

dfrlab_status dfrlab_model_feature_dim(const dfrlab_model* model,
                                       size_t* out) {
  if (!model || !out) return bad_arg("model_feature_dim: NULL argument");
  *out = model->model.encoder.feature_dim();
  return DFRLAB_OK;
}

dfrlab_status dfrlab_model_head(const dfrlab_model* model, double* weights,
                                double* bias) {
  if (!model || !weights || !bias) return bad_arg("model_head: NULL argument");
  const auto& head = model->model.head;
  for (size_t k = 0; k < head.weights.size(); ++k) weights[k] = head.weights[k];
  *bias = head.bias;
  return DFRLAB_OK;
}

dfrlab_status dfrlab_model_predict(const dfrlab_model* model,
                                   const dfrlab_dataset* dataset,
                                   dfrlab_split split, size_t index,
                                   double* probability) {
  if (!model || !dataset || !probability)
    return bad_arg("model_predict: NULL argument");
  return guarded([&] {
    const auto& s = sample_at(dataset, split, index);
    const auto fr = dfrlab::forward(model->model.encoder, s.image);
    *probability = dfrlab::predict(model->model.head, fr.features);
  });
}

dfrlab_status dfrlab_extract_features(const dfrlab_model* model,
                                      const dfrlab_dataset* dataset,
                                      dfrlab_split split,
                                      dfrlab_features** out) {
  if (!model || !dataset || !out)
    return bad_arg("extract_features: NULL argument");
  return guarded([&] {
    *out = new dfrlab_features{dfrlab::extract_features(
        model->model, dataset->ds.split(to_split(split)))};
  });
}

dfrlab_status dfrlab_features_dims(const dfrlab_features* features,
                                   size_t* rows, size_t* cols) {
  if (!features || !rows || !cols)
    return bad_arg("features_dims: NULL argument");
  *rows = features->fm.rows;
  *cols = features->fm.cols;
  return DFRLAB_OK;
}

void dfrlab_features_free(dfrlab_features* features) { delete features; }

dfrlab_status dfrlab_dfr_run(const dfrlab_model* model,
                             const dfrlab_dataset* dataset,
                             const dfrlab_dfr_config* cfg,
                             dfrlab_dfr_result** out) {
  if (!model || !dataset || !cfg || !out)
    return bad_arg("dfr_run: NULL argument");
  return guarded([&] {
    const auto ccfg = from_c(*cfg);
    *out = new dfrlab_dfr_result{
        dfrlab::run_dfr(model->model, dataset->ds, ccfg), ccfg};
  });
}

dfrlab_status dfrlab_retrain_head(const dfrlab_features* features,
                                  const dfrlab_dfr_config* cfg,
                                  dfrlab_dfr_result** out) {
  if (!features || !cfg || !out) return bad_arg("retrain_head: NULL argument");
  return guarded([&] {
    const auto ccfg = from_c(*cfg);
    *out = new dfrlab_dfr_result{dfrlab::retrain_head(features->fm, ccfg),
                                 ccfg};
  });
}

dfrlab_status dfrlab_dfr_result_zero_fraction(const dfrlab_dfr_result* result,
                                              double* out) {
  if (!result || !out) return bad_arg("dfr_result_zero_fraction: NULL argument");
  *out = result->result.zero_fraction;
  return DFRLAB_OK;
}

dfrlab_status dfrlab_dfr_result_head(const dfrlab_dfr_result* result,
                                     double* weights, double* bias) {
  if (!result || !weights || !bias)
    return bad_arg("dfr_result_head: NULL argument");
  const auto& head = result->result.head;
  for (size_t k = 0; k < head.weights.size(); ++k) weights[k] = head.weights[k];
  *bias = head.bias;
  return DFRLAB_OK;
}

dfrlab_status dfrlab_dfr_result_save_json(const dfrlab_dfr_result* result,
                                          const char* path) {
  if (!result || !path) return bad_arg("dfr_result_save_json: NULL argument");
  return guarded([&] {
    const std::string text =
        dfrlab::dfr_result_json(result->result, result->cfg);
    dfrlab::write_bytes(path, {text.begin(), text.end()});
  });
}

void dfrlab_dfr_result_free(dfrlab_dfr_result* result) { delete result; }

dfrlab_status dfrlab_apply_dfr(const dfrlab_model* model,
                               const dfrlab_dfr_result* result,
                               dfrlab_model** out) {
  if (!model || !result || !out) return bad_arg("apply_dfr: NULL argument");
  return guarded([&] {
    *out = new dfrlab_model{dfrlab::apply_dfr(model->model, result->result)};
  });
}

dfrlab_status dfrlab_evaluate(const dfrlab_model* model,
                              const dfrlab_dataset* dataset,
                              dfrlab_split split, double threshold,
                              dfrlab_group_metrics* out) {
  if (!model || !dataset || !out) return bad_arg("evaluate: NULL argument");
  return guarded([&] {
    const auto m = dfrlab::group_accuracies(
        model->model, dataset->ds.split(to_split(split)), threshold);
    for (int g = 0; g < 4; ++g) {
      out->per_group_accuracy[g] = m.per_group_accuracy[g];
      out->n_per_group[g] = m.n_per_group[g];
    }
    out->average_accuracy = m.average_accuracy;
    out->worst_group = dfrlab::worst_group(m);
  });
}

dfrlab_status dfrlab_export_cam(const dfrlab_model* model,
                                const dfrlab_dataset* dataset,
                                dfrlab_split split, size_t index,
                                const char* path) {
  if (!model || !dataset || !path) return bad_arg("export_cam: NULL argument");
  return guarded([&] {
    const auto& s = sample_at(dataset, split, index);
    dfrlab::export_heatmap(dfrlab::cam(model->model, s.image), path,
                           dfrlab::HeatmapStyle::Diverging);
  });
}

dfrlab_status dfrlab_export_neuron_map(const dfrlab_model* model,
                                       const dfrlab_dataset* dataset,
                                       dfrlab_split split, size_t index,
                                       size_t neuron, const char* path) {
  if (!model || !dataset || !path)
    return bad_arg("export_neuron_map: NULL argument");
  return guarded([&] {
    const auto& s = sample_at(dataset, split, index);
    dfrlab::export_heatmap(dfrlab::neuron_map(model->model, s.image, neuron),
                           path, dfrlab::HeatmapStyle::Gray);
  });
}

dfrlab_status dfrlab_cmd_generate(const char* config_json, const char* out_dir,
                                  const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_generate: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_generate(parse_config(config_json, ov), out_dir);
  });
}

dfrlab_status dfrlab_cmd_train(const char* config_json, const char* out_dir,
                               const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_train: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_train(parse_config(config_json, ov), out_dir);
  });
}

dfrlab_status dfrlab_cmd_dfr(const char* config_json, const char* out_dir,
                             const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_dfr: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_dfr(parse_config(config_json, ov), out_dir);
  });
}

dfrlab_status dfrlab_cmd_eval(const char* config_json, const char* out_dir,
                              const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_eval: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_eval(parse_config(config_json, ov), out_dir);
  });
}

dfrlab_status dfrlab_cmd_cam(const char* config_json, const char* out_dir,
                             const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_cam: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_cam(parse_config(config_json, ov), out_dir);
  });
}

dfrlab_status dfrlab_cmd_neurons(const char* config_json, const char* out_dir,
                                 const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_neurons: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_neurons(parse_config(config_json, ov), out_dir);
  });
}

dfrlab_status dfrlab_cmd_report(const char* out_dir) {
  if (!out_dir) return bad_arg("cmd_report: NULL out_dir");
  return guarded([&] { dfrlab::cmd_report(out_dir); });
}

dfrlab_status dfrlab_cmd_pipeline(const char* config_json, const char* out_dir,
                                  const dfrlab_overrides* ov) {
  if (!out_dir) return bad_arg("cmd_pipeline: NULL out_dir");
  return guarded([&] {
    dfrlab::cmd_pipeline(parse_config(config_json, ov), out_dir);
  });
}

}  // extern "C"
