// dfrlab command line: thin argument parsing over the C API.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dfrlab/dfrlab.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool has_seed = false;
  uint32_t runs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_runs) {
  cmd->add_option("--config", args.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override every configured seed")
      ->each([&args](const std::string&) { args.has_seed = true; });
  if (with_runs)
    cmd->add_option("--runs", args.runs, "override the number of runs");
}

int run_driver(const CommonArgs& args,
               dfrlab_status (*driver)(const char*, const char*,
                                       const dfrlab_overrides*)) {
  std::string config_text;
  if (!args.config_path.empty()) {
    std::ifstream f(args.config_path);
    if (!f) {
      std::fprintf(stderr, "error: cannot open config '%s'\n",
                   args.config_path.c_str());
      return 1;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    config_text = ss.str();
  }
  dfrlab_overrides ov{};
  ov.has_seed = args.has_seed ? 1 : 0;
  ov.seed = args.seed;
  ov.n_runs = args.runs;
  const dfrlab_status st =
      driver(config_text.empty() ? nullptr : config_text.c_str(),
             args.out_dir.c_str(), &ov);
  if (st != DFRLAB_OK) {
    std::fprintf(stderr, "error (%s): %s\n", dfrlab_status_name(st),
                 dfrlab_last_error());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dfrlab: group-robustness workbench (ERM training, "
               "group-balanced last-layer retraining, worst-group "
               "evaluation, CAM and neuron-level analysis)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dfrlab_version()));

  struct Sub {
    const char* name;
    const char* help;
    dfrlab_status (*driver)(const char*, const char*,
                            const dfrlab_overrides*);
    bool with_runs;
  };
  const Sub subs[] = {
      {"generate", "generate a dataset (dataset.dfrt + dataset.json)",
       dfrlab_cmd_generate, false},
      {"train", "train the ERM model on a generated dataset",
       dfrlab_cmd_train, false},
      {"dfr", "retrain the last layer on a balanced validation subset",
       dfrlab_cmd_dfr, false},
      {"eval", "per-group and average accuracy for the trained models",
       dfrlab_cmd_eval, false},
      {"cam", "export the class activation map panel", dfrlab_cmd_cam, false},
      {"neurons", "export the neuron taxonomy CSV", dfrlab_cmd_neurons,
       false},
      {"pipeline", "run the full multi-seed pipeline and write report.json",
       dfrlab_cmd_pipeline, true},
  };

  CommonArgs args[std::size(subs)];
  for (size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, args[i], subs[i].with_runs);
  }

  std::string report_dir = "out";
  CLI::App* report = app.add_subcommand(
      "report", "re-aggregate per-run metrics into report.json");
  report->add_option("--out", report_dir, "pipeline output directory");

  CLI11_PARSE(app, argc, argv);

  if (report->parsed()) {
    const dfrlab_status st = dfrlab_cmd_report(report_dir.c_str());
    if (st != DFRLAB_OK) {
      std::fprintf(stderr, "error (%s): %s\n", dfrlab_status_name(st),
                   dfrlab_last_error());
      return 1;
    }
    return 0;
  }
  for (size_t i = 0; i < std::size(subs); ++i) {
    if (app.get_subcommand(subs[i].name)->parsed())
      return run_driver(args[i], subs[i].driver);
  }
  return 0;
}
