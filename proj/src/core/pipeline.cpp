#include "core/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "core/dfr.hpp"
#include "core/error.hpp"
#include "core/image_io.hpp"
#include "core/interpret.hpp"
#include "core/serialize.hpp"

namespace dfrlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("DFRLAB_LOG_LEVEL");
    if (!env) return 1;
    if (!std::strcmp(env, "quiet") || !std::strcmp(env, "0")) return 0;
    if (!std::strcmp(env, "debug") || !std::strcmp(env, "2")) return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[dfrlab] %s\n", msg.c_str());
}

// Tags pipeline failures with the stage that raised them.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(inner.code(), "stage " + stage + ": " + inner.what()),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(Errc::Io, "cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) fail(Errc::Io, "write to '" + path.string() + "' failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::Io, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json metrics_to_json(const GroupMetrics& m) {
  json j;
  j["per_group_accuracy"] = m.per_group_accuracy;
  j["n_per_group"] = m.n_per_group;
  j["average_accuracy"] = m.average_accuracy;
  j["worst_group"] = m.worst_group;
  return j;
}

GroupMetrics metrics_from_json(const json& j) {
  GroupMetrics m;
  m.per_group_accuracy = j.at("per_group_accuracy").get<std::array<double, 4>>();
  m.n_per_group = j.at("n_per_group").get<std::array<uint64_t, 4>>();
  m.average_accuracy = j.at("average_accuracy").get<double>();
  m.worst_group = j.at("worst_group").get<int>();
  return m;
}

json run_to_json(const RunArtifacts& r) {
  json j;
  j["run"] = r.run_index;
  j["seeds"] = {{"dataset", r.dataset_seed},
                {"train", r.train_seed},
                {"dfr", r.dfr_seed}};
  j["erm"] = metrics_to_json(r.erm);
  j["dfr"] = metrics_to_json(r.dfr);
  j["erm_worst_accuracy"] = r.erm_worst_accuracy;
  j["dfr_accuracy_at_worst"] = r.dfr_accuracy_at_worst;
  j["zero_fraction"] = r.zero_fraction;
  j["dfr_converged"] = r.dfr_converged;
  j["taxonomy_counts"] = {{"spurious_only", r.taxonomy_counts[0]},
                          {"core_only", r.taxonomy_counts[1]},
                          {"mixed", r.taxonomy_counts[2]},
                          {"inactive", r.taxonomy_counts[3]}};
  j["spurious_score_zeroed_mean"] = r.spurious_score_zeroed_mean;
  j["spurious_score_retained_mean"] = r.spurious_score_retained_mean;
  j["files"] = r.files;
  return j;
}

RunArtifacts run_from_json(const json& j) {
  RunArtifacts r;
  r.run_index = j.at("run").get<uint32_t>();
  r.dataset_seed = j.at("seeds").at("dataset").get<uint64_t>();
  r.train_seed = j.at("seeds").at("train").get<uint64_t>();
  r.dfr_seed = j.at("seeds").at("dfr").get<uint64_t>();
  r.erm = metrics_from_json(j.at("erm"));
  r.dfr = metrics_from_json(j.at("dfr"));
  r.erm_worst_accuracy = j.at("erm_worst_accuracy").get<double>();
  r.dfr_accuracy_at_worst = j.at("dfr_accuracy_at_worst").get<double>();
  r.zero_fraction = j.at("zero_fraction").get<double>();
  r.dfr_converged = j.at("dfr_converged").get<bool>();
  const json& t = j.at("taxonomy_counts");
  r.taxonomy_counts = {t.at("spurious_only").get<int>(),
                       t.at("core_only").get<int>(),
                       t.at("mixed").get<int>(), t.at("inactive").get<int>()};
  if (j.at("spurious_score_zeroed_mean").is_null())
    r.spurious_score_zeroed_mean = std::numeric_limits<double>::quiet_NaN();
  else
    r.spurious_score_zeroed_mean =
        j.at("spurious_score_zeroed_mean").get<double>();
  if (j.at("spurious_score_retained_mean").is_null())
    r.spurious_score_retained_mean = std::numeric_limits<double>::quiet_NaN();
  else
    r.spurious_score_retained_mean =
        j.at("spurious_score_retained_mean").get<double>();
  r.files = j.at("files").get<std::vector<std::string>>();
  return r;
}

// First cam_per_group test samples of each group, in group order.
std::vector<size_t> panel_indices(const std::vector<Sample>& test,
                                  uint32_t per_group) {
  std::vector<size_t> out;
  for (int g = 0; g < 4; ++g) {
    uint32_t taken = 0;
    for (size_t i = 0; i < test.size() && taken < per_group; ++i) {
      if (test[i].group.index() == g) {
        out.push_back(i);
        ++taken;
      }
    }
  }
  return out;
}

std::vector<Sample> probe_samples(const std::vector<Sample>& test,
                                  uint32_t per_group) {
  std::vector<Sample> probe;
  for (size_t i : panel_indices(test, per_group)) probe.push_back(test[i]);
  return probe;
}

Heatmap as_input_space(Heatmap m) {
  m.space = MapSpace::Input;
  return m;
}

size_t weight_grid_width(size_t d) {
  size_t gw = static_cast<size_t>(std::sqrt(static_cast<double>(d)));
  while (gw > 1 && d % gw != 0) --gw;
  return gw == 0 ? 1 : gw;
}

std::string neuron_csv(const std::vector<NeuronReport>& reports) {
  std::ostringstream os;
  os.precision(10);
  os << "k,w_erm,w_dfr,core_score,spurious_score,taxonomy\n";
  for (const auto& r : reports)
    os << r.k << ',' << r.w_erm << ',' << r.w_dfr << ',' << r.core_score
       << ',' << r.spurious_score << ',' << neuron_kind_name(r.kind) << '\n';
  return os.str();
}

void fill_taxonomy_stats(const std::vector<NeuronReport>& reports,
                         RunArtifacts& art) {
  art.taxonomy_counts = {0, 0, 0, 0};
  double zeroed_sum = 0.0, retained_sum = 0.0;
  size_t zeroed_n = 0, retained_n = 0;
  for (const auto& r : reports) {
    switch (r.kind) {
      case NeuronKind::SpuriousOnly: ++art.taxonomy_counts[0]; break;
      case NeuronKind::CoreOnly: ++art.taxonomy_counts[1]; break;
      case NeuronKind::Mixed: ++art.taxonomy_counts[2]; break;
      case NeuronKind::Inactive: ++art.taxonomy_counts[3]; break;
    }
    if (r.mean_activation_mass > 0.0) {
      if (r.w_dfr == 0.0) {
        zeroed_sum += r.spurious_score;
        ++zeroed_n;
      } else {
        retained_sum += r.spurious_score;
        ++retained_n;
      }
    }
  }
  art.spurious_score_zeroed_mean =
      zeroed_n ? zeroed_sum / static_cast<double>(zeroed_n)
               : std::numeric_limits<double>::quiet_NaN();
  art.spurious_score_retained_mean =
      retained_n ? retained_sum / static_cast<double>(retained_n)
                 : std::numeric_limits<double>::quiet_NaN();
}

// One complete run: every artifact lands under run_dir, every recorded
// path is relative to out_dir.
RunArtifacts execute_run(const PipelineConfig& cfg, uint32_t run,
                         const fs::path& out_dir, const fs::path& run_dir) {
  RunArtifacts art;
  art.run_index = run;
  art.dataset_seed = cfg.dataset.seed + run;
  art.train_seed = cfg.train.seed + run;
  art.dfr_seed = cfg.dfr.seed + run;

  const auto rel = [&](const fs::path& p) {
    return fs::relative(p, out_dir).generic_string();
  };

  fs::create_directories(run_dir);

  DatasetSpec spec = cfg.dataset;
  spec.seed = art.dataset_seed;
  const GroupedDataset ds =
      stage("generate", [&] { return generate_dataset(spec); });
  stage("generate", [&] {
    write_text(run_dir / "dataset_manifest.json", dataset_manifest_json(ds));
    return 0;
  });

  TrainConfig tcfg = cfg.train;
  tcfg.seed = art.train_seed;
  const TrainedModel erm_model =
      stage("train", [&] { return train_erm(ds, tcfg); });
  stage("train", [&] {
    save_model((run_dir / "model_erm.dfrt").string(), erm_model);
    art.files.push_back(rel(run_dir / "model_erm.dfrt"));
    return 0;
  });

  art.erm = stage("eval-erm", [&] {
    GroupMetrics m = group_accuracies(erm_model, ds.test, cfg.eval_threshold);
    m.worst_group = worst_group(m);
    return m;
  });
  art.erm_worst_accuracy = art.erm.per_group_accuracy[art.erm.worst_group];

  DfrConfig dcfg = cfg.dfr;
  dcfg.seed = art.dfr_seed;
  const DfrResult dfr_result =
      stage("dfr", [&] { return run_dfr(erm_model, ds, dcfg); });
  const TrainedModel dfr_model =
      stage("dfr", [&] { return apply_dfr(erm_model, dfr_result); });
  stage("dfr", [&] {
    write_text(run_dir / "dfr_result.json", dfr_result_json(dfr_result, dcfg));
    save_model((run_dir / "model_dfr.dfrt").string(), dfr_model);
    art.files.push_back(rel(run_dir / "dfr_result.json"));
    art.files.push_back(rel(run_dir / "model_dfr.dfrt"));
    return 0;
  });
  art.zero_fraction = dfr_result.zero_fraction;
  art.dfr_converged = dfr_result.converged;

  art.dfr = stage("eval-dfr", [&] {
    GroupMetrics m = group_accuracies(dfr_model, ds.test, cfg.eval_threshold);
    m.worst_group = art.erm.worst_group;
    return m;
  });
  art.dfr_accuracy_at_worst = art.dfr.per_group_accuracy[art.erm.worst_group];

  stage("cam", [&] {
    const fs::path cam_dir = run_dir / "cam";
    fs::create_directories(cam_dir);
    for (size_t idx : panel_indices(ds.test, cfg.cam_per_group)) {
      const Sample& s = ds.test[idx];
      const std::string base =
          "g" + std::to_string(s.group.index()) + "_s" + std::to_string(idx);
      const fs::path input = cam_dir / (base + "_input.ppm");
      export_image(s.image, input.string());
      art.files.push_back(rel(input));
      const fs::path erm_path = cam_dir / (base + "_cam_erm.ppm");
      export_heatmap(cam(erm_model, s.image), erm_path.string(),
                     HeatmapStyle::Diverging);
      art.files.push_back(rel(erm_path));
      const fs::path dfr_path = cam_dir / (base + "_cam_dfr.ppm");
      export_heatmap(cam(dfr_model, s.image), dfr_path.string(),
                     HeatmapStyle::Diverging);
      art.files.push_back(rel(dfr_path));
    }
    // Weight grids are standalone images at their own resolution.
    const size_t gw = weight_grid_width(erm_model.head.weights.size());
    const fs::path w_erm = run_dir / "weights_erm.ppm";
    export_heatmap(as_input_space(weight_heatmap(erm_model.head, gw)),
                   w_erm.string(), HeatmapStyle::Diverging);
    art.files.push_back(rel(w_erm));
    const fs::path w_dfr = run_dir / "weights_dfr.ppm";
    export_heatmap(as_input_space(weight_heatmap(dfr_model.head, gw)),
                   w_dfr.string(), HeatmapStyle::Diverging);
    art.files.push_back(rel(w_dfr));
    return 0;
  });

  stage("neurons", [&] {
    const std::vector<Sample> probe =
        probe_samples(ds.test, cfg.probes_per_group);
    const auto reports =
        neuron_taxonomy(erm_model, dfr_model.head, probe, cfg.taxonomy);
    write_text(run_dir / "neurons.csv", neuron_csv(reports));
    art.files.push_back(rel(run_dir / "neurons.csv"));
    fill_taxonomy_stats(reports, art);
    return 0;
  });

  write_text(run_dir / "metrics.json", run_to_json(art).dump(2) + "\n");
  art.files.push_back(rel(run_dir / "metrics.json"));
  return art;
}

Report assemble_report(const PipelineConfig& cfg,
                       std::vector<RunArtifacts> runs) {
  Report report;
  report.config = cfg;
  report.runs = std::move(runs);
  std::vector<std::pair<GroupMetrics, GroupMetrics>> pairs;
  for (const auto& r : report.runs) pairs.emplace_back(r.erm, r.dfr);
  report.summary = summarize_runs(pairs);
  return report;
}

std::string summary_table(const Report& report) {
  static const char* kGroupNames[4] = {
      "class0 / no patch", "class0 / patch", "class1 / no patch",
      "class1 / patch"};
  std::ostringstream os;
  const auto& s = report.summary;
  char line[160];
  os << "group                      ERM                DFR\n";
  for (int g = 0; g < 4; ++g) {
    std::snprintf(line, sizeof line, "%-22s %6.2f +- %5.2f   %6.2f +- %5.2f%s\n",
                  kGroupNames[g], 100.0 * s.erm_group_mean[g],
                  100.0 * s.erm_group_std[g], 100.0 * s.dfr_group_mean[g],
                  100.0 * s.dfr_group_std[g],
                  g == s.worst_group ? "   <- worst group" : "");
    os << line;
  }
  std::snprintf(line, sizeof line, "%-22s %6.2f +- %5.2f   %6.2f +- %5.2f\n",
                "average", 100.0 * s.erm_avg_mean, 100.0 * s.erm_avg_std,
                100.0 * s.dfr_avg_mean, 100.0 * s.dfr_avg_std);
  os << line;
  if (s.single_run) os << "(single run: std is 0 by convention)\n";
  return os.str();
}

void write_failure_marker(const std::string& out_dir, const std::string& stage,
                          const std::string& message) {
  json j;
  j["failed_stage"] = stage;
  j["error"] = message;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream f(fs::path(out_dir) / "FAILED.json", std::ios::trunc);
  if (f) f << j.dump(2) << "\n";
}

}  // namespace

std::string current_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string report_to_json(const Report& report,
                           const std::string& timestamp) {
  json j;
  j["report_version"] = 1;
  j["timestamp"] = timestamp;
  j["config"] = json::parse(config_to_json(report.config));
  j["runs"] = json::array();
  for (const auto& r : report.runs) j["runs"].push_back(run_to_json(r));
  const auto& s = report.summary;
  j["summary"] = {
      {"n_runs", s.n_runs},
      {"single_run", s.single_run},
      {"worst_group", s.worst_group},
      {"erm",
       {{"group_mean", s.erm_group_mean},
        {"group_std", s.erm_group_std},
        {"average_mean", s.erm_avg_mean},
        {"average_std", s.erm_avg_std},
        {"worst_mean", s.erm_worst_mean},
        {"worst_std", s.erm_worst_std}}},
      {"dfr",
       {{"group_mean", s.dfr_group_mean},
        {"group_std", s.dfr_group_std},
        {"average_mean", s.dfr_avg_mean},
        {"average_std", s.dfr_avg_std},
        {"worst_mean", s.dfr_worst_mean},
        {"worst_std", s.dfr_worst_std}}}};
  return j.dump(2) + "\n";
}

std::string metrics_csv(const Report& report) {
  std::ostringstream os;
  os.precision(10);
  os << "run,stage,group,n,accuracy\n";
  for (const auto& r : report.runs) {
    const GroupMetrics* stages[2] = {&r.erm, &r.dfr};
    const char* names[2] = {"erm", "dfr"};
    for (int s = 0; s < 2; ++s) {
      uint64_t total = 0;
      for (int g = 0; g < 4; ++g) {
        os << r.run_index << ',' << names[s] << ',' << g << ','
           << stages[s]->n_per_group[g] << ','
           << stages[s]->per_group_accuracy[g] << '\n';
        total += stages[s]->n_per_group[g];
      }
      os << r.run_index << ',' << names[s] << ",average," << total << ','
         << stages[s]->average_accuracy << '\n';
    }
  }
  return os.str();
}

Report run_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  const fs::path out(out_dir);
  try {
    fs::create_directories(out / "runs");
    write_text(out / "config.json", config_to_json(cfg));

    std::vector<std::future<RunArtifacts>> futures;
    futures.reserve(cfg.n_runs);
    for (uint32_t run = 0; run < cfg.n_runs; ++run) {
      char name[32];
      std::snprintf(name, sizeof name, "run_%03u", run);
      const fs::path run_dir = out / "runs" / name;
      futures.push_back(std::async(std::launch::async, [&, run, run_dir] {
        log_info("run " + std::to_string(run) + " started");
        RunArtifacts art = execute_run(cfg, run, out, run_dir);
        log_info("run " + std::to_string(run) + " finished");
        return art;
      }));
    }
    std::vector<RunArtifacts> runs;
    std::exception_ptr first_failure;
    for (auto& f : futures) {
      try {
        runs.push_back(f.get());
      } catch (...) {
        if (!first_failure) first_failure = std::current_exception();
      }
    }
    if (first_failure) std::rethrow_exception(first_failure);

    Report report = assemble_report(cfg, std::move(runs));
    write_text(out / "report.json",
               report_to_json(report, current_timestamp()));
    write_text(out / "metrics.csv", metrics_csv(report));
    log_info("pipeline complete\n" + summary_table(report));
    return report;
  } catch (const StageError& e) {
    write_failure_marker(out_dir, e.stage(), e.what());
    throw;
  } catch (const Error& e) {
    write_failure_marker(out_dir, "pipeline", e.what());
    throw;
  }
}

void cmd_generate(const PipelineConfig& cfg, const std::string& out_dir) {
  validate(cfg.dataset);
  fs::create_directories(out_dir);
  const GroupedDataset ds = generate_dataset(cfg.dataset);
  save_dataset((fs::path(out_dir) / "dataset.dfrt").string(), ds);
  write_text(fs::path(out_dir) / "dataset.json", dataset_manifest_json(ds));
  log_info("wrote dataset.dfrt and dataset.json to " + out_dir);
}

namespace {

GroupedDataset load_dataset_artifact(const std::string& out_dir) {
  const fs::path p = fs::path(out_dir) / "dataset.dfrt";
  if (!fs::exists(p))
    fail(Errc::Io, "no dataset at '" + p.string() + "' (run `generate` first)");
  return load_dataset(p.string());
}

TrainedModel load_model_artifact(const std::string& out_dir,
                                 const char* file, const char* hint) {
  const fs::path p = fs::path(out_dir) / file;
  if (!fs::exists(p))
    fail(Errc::Io, "no model at '" + p.string() + "' (run `" +
                       std::string(hint) + "` first)");
  return load_model(p.string());
}

}  // namespace

void cmd_train(const PipelineConfig& cfg, const std::string& out_dir) {
  const GroupedDataset ds = load_dataset_artifact(out_dir);
  const TrainedModel model = train_erm(ds, cfg.train);
  save_model((fs::path(out_dir) / "model_erm.dfrt").string(), model);
  json j;
  j["epochs"] = json::array();
  for (size_t e = 0; e < model.log.size(); ++e)
    j["epochs"].push_back({{"epoch", e},
                           {"loss", model.log[e].loss},
                           {"accuracy", model.log[e].accuracy}});
  write_text(fs::path(out_dir) / "train_log.json", j.dump(2) + "\n");
  log_info("wrote model_erm.dfrt and train_log.json to " + out_dir);
}

void cmd_dfr(const PipelineConfig& cfg, const std::string& out_dir) {
  const GroupedDataset ds = load_dataset_artifact(out_dir);
  const TrainedModel erm = load_model_artifact(out_dir, "model_erm.dfrt", "train");
  const DfrResult res = run_dfr(erm, ds, cfg.dfr);
  write_text(fs::path(out_dir) / "dfr_result.json",
             dfr_result_json(res, cfg.dfr));
  save_model((fs::path(out_dir) / "model_dfr.dfrt").string(),
             apply_dfr(erm, res));
  log_info("wrote dfr_result.json and model_dfr.dfrt to " + out_dir +
           " (zero_fraction=" + std::to_string(res.zero_fraction) + ")");
}

void cmd_eval(const PipelineConfig& cfg, const std::string& out_dir) {
  const GroupedDataset ds = load_dataset_artifact(out_dir);
  const TrainedModel erm = load_model_artifact(out_dir, "model_erm.dfrt", "train");

  RunArtifacts art;
  art.erm = group_accuracies(erm, ds.test, cfg.eval_threshold);
  art.erm.worst_group = worst_group(art.erm);
  art.erm_worst_accuracy = art.erm.per_group_accuracy[art.erm.worst_group];

  const bool have_dfr = fs::exists(fs::path(out_dir) / "model_dfr.dfrt");
  json j;
  j["erm"] = metrics_to_json(art.erm);
  if (have_dfr) {
    const TrainedModel dfr = load_model(
        (fs::path(out_dir) / "model_dfr.dfrt").string());
    art.dfr = group_accuracies(dfr, ds.test, cfg.eval_threshold);
    art.dfr.worst_group = art.erm.worst_group;
    j["dfr"] = metrics_to_json(art.dfr);
  } else {
    j["dfr"] = nullptr;
  }
  write_text(fs::path(out_dir) / "metrics.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv.precision(10);
  csv << "run,stage,group,n,accuracy\n";
  const GroupMetrics* stages[2] = {&art.erm, have_dfr ? &art.dfr : nullptr};
  const char* names[2] = {"erm", "dfr"};
  for (int s = 0; s < 2; ++s) {
    if (!stages[s]) continue;
    uint64_t total = 0;
    for (int g = 0; g < 4; ++g) {
      csv << "0," << names[s] << ',' << g << ',' << stages[s]->n_per_group[g]
          << ',' << stages[s]->per_group_accuracy[g] << '\n';
      total += stages[s]->n_per_group[g];
    }
    csv << "0," << names[s] << ",average," << total << ','
        << stages[s]->average_accuracy << '\n';
  }
  write_text(fs::path(out_dir) / "metrics.csv", csv.str());
  log_info("wrote metrics.json and metrics.csv to " + out_dir);
}

void cmd_cam(const PipelineConfig& cfg, const std::string& out_dir) {
  const GroupedDataset ds = load_dataset_artifact(out_dir);
  const TrainedModel erm = load_model_artifact(out_dir, "model_erm.dfrt", "train");
  const bool have_dfr = fs::exists(fs::path(out_dir) / "model_dfr.dfrt");
  TrainedModel dfr;
  if (have_dfr)
    dfr = load_model((fs::path(out_dir) / "model_dfr.dfrt").string());

  const fs::path cam_dir = fs::path(out_dir) / "cam";
  fs::create_directories(cam_dir);
  for (size_t idx : panel_indices(ds.test, cfg.cam_per_group)) {
    const Sample& s = ds.test[idx];
    const std::string base =
        "g" + std::to_string(s.group.index()) + "_s" + std::to_string(idx);
    export_image(s.image, (cam_dir / (base + "_input.ppm")).string());
    export_heatmap(cam(erm, s.image),
                   (cam_dir / (base + "_cam_erm.ppm")).string(),
                   HeatmapStyle::Diverging);
    if (have_dfr)
      export_heatmap(cam(dfr, s.image),
                     (cam_dir / (base + "_cam_dfr.ppm")).string(),
                     HeatmapStyle::Diverging);
  }
  log_info("wrote CAM panel to " + cam_dir.string());
}

void cmd_neurons(const PipelineConfig& cfg, const std::string& out_dir) {
  const GroupedDataset ds = load_dataset_artifact(out_dir);
  const TrainedModel erm = load_model_artifact(out_dir, "model_erm.dfrt", "train");
  const TrainedModel dfr =
      load_model_artifact(out_dir, "model_dfr.dfrt", "dfr");
  const std::vector<Sample> probe = probe_samples(ds.test, cfg.probes_per_group);
  const auto reports = neuron_taxonomy(erm, dfr.head, probe, cfg.taxonomy);
  write_text(fs::path(out_dir) / "neurons.csv", neuron_csv(reports));
  RunArtifacts art;
  fill_taxonomy_stats(reports, art);
  log_info("wrote neurons.csv to " + out_dir + " (spurious_only=" +
           std::to_string(art.taxonomy_counts[0]) + ", core_only=" +
           std::to_string(art.taxonomy_counts[1]) + ", mixed=" +
           std::to_string(art.taxonomy_counts[2]) + ", inactive=" +
           std::to_string(art.taxonomy_counts[3]) + ")");
}

void cmd_report(const std::string& out_dir) {
  const fs::path out(out_dir);
  if (!fs::exists(out / "config.json"))
    fail(Errc::Io, "no pipeline outputs under '" + out_dir +
                       "' (missing config.json)");
  const PipelineConfig cfg = config_from_json(read_text(out / "config.json"));

  std::vector<RunArtifacts> runs;
  for (uint32_t run = 0;; ++run) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03u", run);
    const fs::path metrics = out / "runs" / name / "metrics.json";
    if (!fs::exists(metrics)) break;
    try {
      runs.push_back(run_from_json(json::parse(read_text(metrics))));
    } catch (const json::exception& e) {
      fail(Errc::Format,
           "report: malformed '" + metrics.string() + "': " + e.what());
    }
  }
  if (runs.empty())
    fail(Errc::Io, "report: no per-run metrics under '" + out_dir + "'");

  Report report = assemble_report(cfg, std::move(runs));
  write_text(out / "report.json", report_to_json(report, current_timestamp()));
  write_text(out / "metrics.csv", metrics_csv(report));
  std::fputs(summary_table(report).c_str(), stdout);
}

void cmd_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
  const Report report = run_pipeline(cfg, out_dir);
  std::fputs(summary_table(report).c_str(), stdout);
}

}  // namespace dfrlab
