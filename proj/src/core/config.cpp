#include "core/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"

namespace dfrlab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object())
    fail(Errc::Format, "config: section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      fail(Errc::Format,
           "config: unknown field '" + key + "' in section '" + section + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(Errc::Format,
           std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  validate(cfg.dataset);
  validate(cfg.train);
  validate(cfg.dfr);
  if (cfg.n_runs < 1)
    fail(Errc::InvalidSpec, "config: n_runs must be >= 1");
  if (!(cfg.eval_threshold >= 0.0 && cfg.eval_threshold <= 1.0))
    fail(Errc::InvalidSpec, "config: eval_threshold must lie in [0,1]");
  if (!(cfg.taxonomy.tau_lo >= 0.0 && cfg.taxonomy.tau_hi <= 1.0 &&
        cfg.taxonomy.tau_lo <= cfg.taxonomy.tau_hi))
    fail(Errc::InvalidSpec,
         "config: taxonomy thresholds must satisfy 0 <= tau_lo <= tau_hi <= 1");
  if (!(cfg.taxonomy.eps_act >= 0.0))
    fail(Errc::InvalidSpec, "config: taxonomy eps_act must be >= 0");
  if (cfg.probes_per_group < 1)
    fail(Errc::InvalidSpec, "config: probes_per_group must be >= 1");
  if (cfg.cam_per_group < 1)
    fail(Errc::InvalidSpec, "config: cam_per_group must be >= 1");
}

PipelineConfig config_from_json(const std::string& text,
                                const ConfigOverrides& overrides) {
  json j;
  if (text.empty()) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(Errc::Format, std::string("config: invalid JSON: ") + e.what());
    }
  }
  check_keys(j, "(top level)",
             {"seed", "n_runs", "dataset", "train", "dfr", "eval", "taxonomy",
              "interpret"});

  PipelineConfig cfg;
  read(j, "seed", cfg.seed);
  read(j, "n_runs", cfg.n_runs);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.n_runs) cfg.n_runs = *overrides.n_runs;

  cfg.dataset.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.dfr.seed = cfg.seed;

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset",
               {"image_size", "channels", "n_train_per_class",
                "n_val_per_class", "n_test_per_class", "train_correlation",
                "patch_size", "noise_sigma", "seed"});
    read(d, "image_size", cfg.dataset.image_size);
    read(d, "channels", cfg.dataset.channels);
    read(d, "n_train_per_class", cfg.dataset.n_train_per_class);
    read(d, "n_val_per_class", cfg.dataset.n_val_per_class);
    read(d, "n_test_per_class", cfg.dataset.n_test_per_class);
    read(d, "train_correlation", cfg.dataset.train_correlation);
    read(d, "patch_size", cfg.dataset.patch_size);
    read(d, "noise_sigma", cfg.dataset.noise_sigma);
    if (!overrides.seed) read(d, "seed", cfg.dataset.seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"learning_rate", "momentum", "epochs", "batch_size",
                "weight_decay", "seed"});
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "momentum", cfg.train.momentum);
    read(t, "epochs", cfg.train.epochs);
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "weight_decay", cfg.train.weight_decay);
    if (!overrides.seed) read(t, "seed", cfg.train.seed);
  }
  if (j.contains("dfr")) {
    const json& d = j.at("dfr");
    check_keys(d, "dfr",
               {"l1_lambda", "max_iters", "step_size", "tol",
                "n_subset_repeats", "standardize", "seed"});
    read(d, "l1_lambda", cfg.dfr.l1_lambda);
    read(d, "max_iters", cfg.dfr.max_iters);
    read(d, "step_size", cfg.dfr.step_size);
    read(d, "tol", cfg.dfr.tol);
    read(d, "n_subset_repeats", cfg.dfr.n_subset_repeats);
    read(d, "standardize", cfg.dfr.standardize);
    if (!overrides.seed) read(d, "seed", cfg.dfr.seed);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"threshold"});
    read(e, "threshold", cfg.eval_threshold);
  }
  if (j.contains("taxonomy")) {
    const json& t = j.at("taxonomy");
    check_keys(t, "taxonomy", {"tau_hi", "tau_lo", "eps_act"});
    read(t, "tau_hi", cfg.taxonomy.tau_hi);
    read(t, "tau_lo", cfg.taxonomy.tau_lo);
    read(t, "eps_act", cfg.taxonomy.eps_act);
  }
  if (j.contains("interpret")) {
    const json& i = j.at("interpret");
    check_keys(i, "interpret", {"probes_per_group", "cam_per_group"});
    read(i, "probes_per_group", cfg.probes_per_group);
    read(i, "cam_per_group", cfg.cam_per_group);
  }

  validate(cfg);
  return cfg;
}

PipelineConfig load_config_file(const std::string& path,
                                const ConfigOverrides& overrides) {
  std::ifstream f(path);
  if (!f) fail(Errc::Io, "config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str(), overrides);
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["n_runs"] = cfg.n_runs;
  j["dataset"] = {{"image_size", cfg.dataset.image_size},
                  {"channels", cfg.dataset.channels},
                  {"n_train_per_class", cfg.dataset.n_train_per_class},
                  {"n_val_per_class", cfg.dataset.n_val_per_class},
                  {"n_test_per_class", cfg.dataset.n_test_per_class},
                  {"train_correlation", cfg.dataset.train_correlation},
                  {"patch_size", cfg.dataset.patch_size},
                  {"noise_sigma", cfg.dataset.noise_sigma},
                  {"seed", cfg.dataset.seed}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"weight_decay", cfg.train.weight_decay},
                {"seed", cfg.train.seed}};
  j["dfr"] = {{"l1_lambda", cfg.dfr.l1_lambda},
              {"max_iters", cfg.dfr.max_iters},
              {"step_size", cfg.dfr.step_size},
              {"tol", cfg.dfr.tol},
              {"n_subset_repeats", cfg.dfr.n_subset_repeats},
              {"standardize", cfg.dfr.standardize},
              {"seed", cfg.dfr.seed}};
  j["eval"] = {{"threshold", cfg.eval_threshold}};
  j["taxonomy"] = {{"tau_hi", cfg.taxonomy.tau_hi},
                   {"tau_lo", cfg.taxonomy.tau_lo},
                   {"eps_act", cfg.taxonomy.eps_act}};
  j["interpret"] = {{"probes_per_group", cfg.probes_per_group},
                    {"cam_per_group", cfg.cam_per_group}};
  return j.dump(2) + "\n";
}

}  // namespace dfrlab
