#include "core/serialize.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "core/container.hpp"
#include "core/error.hpp"

namespace dfrlab {

namespace {

using nlohmann::json;

double seed_to_double(uint64_t seed) {
  double d;
  std::memcpy(&d, &seed, 8);
  return d;
}

uint64_t seed_from_double(double d) {
  uint64_t seed;
  std::memcpy(&seed, &d, 8);
  return seed;
}

const Tensor& find_entry(const std::vector<TensorEntry>& entries,
                         const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return e.tensor;
  fail(Errc::Format, "checkpoint: missing entry '" + name + "'");
}

Tensor samples_to_tensor(const std::vector<Sample>& samples,
                         const DatasetSpec& spec) {
  const size_t c = spec.channels, s = spec.image_size;
  Tensor t({samples.size(), c, s, s});
  size_t off = 0;
  for (const auto& smp : samples) {
    std::copy(smp.image.values().begin(), smp.image.values().end(),
              t.values().begin() + static_cast<long>(off));
    off += c * s * s;
  }
  return t;
}

Tensor masks_to_tensor(const std::vector<Sample>& samples, bool spurious,
                       const DatasetSpec& spec) {
  const size_t s = spec.image_size;
  Tensor t({samples.size(), s, s});
  size_t off = 0;
  for (const auto& smp : samples) {
    const auto& m = spurious ? smp.spurious_mask : smp.core_mask;
    for (uint8_t v : m) t[off++] = v ? 1.0 : 0.0;
  }
  return t;
}

}  // namespace

void save_model(const std::string& path, const TrainedModel& model) {
  std::vector<TensorEntry> entries;
  const auto& cfg = model.encoder.cfg;
  std::vector<double> arch = {static_cast<double>(cfg.image_size),
                              static_cast<double>(cfg.in_channels),
                              static_cast<double>(cfg.widths.size())};
  for (uint32_t w : cfg.widths) arch.push_back(static_cast<double>(w));
  entries.push_back({"meta/arch", Tensor({arch.size()}, arch)});

  for (size_t i = 0; i < model.encoder.stages.size(); ++i) {
    const auto& st = model.encoder.stages[i];
    entries.push_back(
        {"encoder/stage" + std::to_string(i) + "/weights", st.weights});
    entries.push_back(
        {"encoder/stage" + std::to_string(i) + "/bias", st.bias});
  }
  entries.push_back(
      {"head/weights",
       Tensor({model.head.weights.size()}, model.head.weights)});
  entries.push_back({"head/bias", Tensor({1}, {model.head.bias})});

  std::vector<double> log;
  for (const auto& e : model.log) {
    log.push_back(e.loss);
    log.push_back(e.accuracy);
  }
  entries.push_back({"training/log", Tensor({model.log.size(), 2}, log)});
  save_container(path, entries);
}

TrainedModel load_model(const std::string& path) {
  const auto entries = load_container(path);
  const Tensor& arch = find_entry(entries, "meta/arch");
  if (arch.size() < 3) fail(Errc::Format, "checkpoint: malformed meta/arch");

  TrainedModel model;
  auto& cfg = model.encoder.cfg;
  cfg.image_size = static_cast<uint32_t>(arch[0]);
  cfg.in_channels = static_cast<uint32_t>(arch[1]);
  const size_t n_stages = static_cast<size_t>(arch[2]);
  cfg.widths.clear();
  for (size_t i = 0; i < n_stages; ++i)
    cfg.widths.push_back(static_cast<uint32_t>(arch[3 + i]));

  for (size_t i = 0; i < n_stages; ++i) {
    ConvStage st;
    st.weights =
        find_entry(entries, "encoder/stage" + std::to_string(i) + "/weights");
    st.bias =
        find_entry(entries, "encoder/stage" + std::to_string(i) + "/bias");
    model.encoder.stages.push_back(std::move(st));
  }
  model.head.weights = find_entry(entries, "head/weights").values();
  model.head.bias = find_entry(entries, "head/bias")[0];

  const Tensor& log = find_entry(entries, "training/log");
  for (size_t i = 0; i < log.shape()[0]; ++i)
    model.log.push_back({log(i, 0), log(i, 1)});
  return model;
}

void save_dataset(const std::string& path, const GroupedDataset& ds) {
  std::vector<TensorEntry> entries;
  std::vector<double> spec = {static_cast<double>(ds.spec.image_size),
                              static_cast<double>(ds.spec.channels),
                              static_cast<double>(ds.spec.n_train_per_class),
                              static_cast<double>(ds.spec.n_val_per_class),
                              static_cast<double>(ds.spec.n_test_per_class),
                              ds.spec.train_correlation,
                              static_cast<double>(ds.spec.patch_size),
                              ds.spec.noise_sigma,
                              seed_to_double(ds.spec.seed)};
  entries.push_back({"spec", Tensor({spec.size()}, spec)});

  for (Split split : {Split::Train, Split::Valid, Split::Test}) {
    const auto& samples = ds.split(split);
    const std::string base = split_name(split);
    entries.push_back(
        {base + "/images", samples_to_tensor(samples, ds.spec)});
    std::vector<double> labels, groups;
    for (const auto& s : samples) {
      labels.push_back(s.label);
      groups.push_back(s.group.index());
    }
    entries.push_back({base + "/labels", Tensor({samples.size()}, labels)});
    entries.push_back({base + "/groups", Tensor({samples.size()}, groups)});
    entries.push_back(
        {base + "/core_mask", masks_to_tensor(samples, false, ds.spec)});
    entries.push_back(
        {base + "/spurious_mask", masks_to_tensor(samples, true, ds.spec)});
  }
  save_container(path, entries);
}

GroupedDataset load_dataset(const std::string& path) {
  const auto entries = load_container(path);
  const Tensor& spec_t = find_entry(entries, "spec");
  if (spec_t.size() != 9) fail(Errc::Format, "dataset: malformed spec entry");

  GroupedDataset ds;
  ds.spec.image_size = static_cast<uint32_t>(spec_t[0]);
  ds.spec.channels = static_cast<uint32_t>(spec_t[1]);
  ds.spec.n_train_per_class = static_cast<uint32_t>(spec_t[2]);
  ds.spec.n_val_per_class = static_cast<uint32_t>(spec_t[3]);
  ds.spec.n_test_per_class = static_cast<uint32_t>(spec_t[4]);
  ds.spec.train_correlation = spec_t[5];
  ds.spec.patch_size = static_cast<uint32_t>(spec_t[6]);
  ds.spec.noise_sigma = spec_t[7];
  ds.spec.seed = seed_from_double(spec_t[8]);

  const size_t c = ds.spec.channels, s = ds.spec.image_size;
  for (Split split : {Split::Train, Split::Valid, Split::Test}) {
    const std::string base = split_name(split);
    const Tensor& images = find_entry(entries, base + "/images");
    const Tensor& labels = find_entry(entries, base + "/labels");
    const Tensor& groups = find_entry(entries, base + "/groups");
    const Tensor& core = find_entry(entries, base + "/core_mask");
    const Tensor& spur = find_entry(entries, base + "/spurious_mask");
    if (images.rank() != 4 || images.shape()[1] != c ||
        images.shape()[2] != s || images.shape()[3] != s)
      fail(Errc::Format, "dataset: malformed " + base + "/images");
    const size_t n = images.shape()[0];
    if (labels.size() != n || groups.size() != n)
      fail(Errc::Format, "dataset: inconsistent " + base + " sizes");

    auto& out = ds.split(split);
    out.resize(n);
    for (size_t i = 0; i < n; ++i) {
      Sample& smp = out[i];
      smp.image = Tensor({c, s, s});
      std::copy(images.values().begin() + static_cast<long>(i * c * s * s),
                images.values().begin() + static_cast<long>((i + 1) * c * s * s),
                smp.image.values().begin());
      smp.label = static_cast<uint8_t>(labels[i]);
      const int g = static_cast<int>(groups[i]);
      smp.group = group_of(g / 2, g % 2);
      smp.core_mask.resize(s * s);
      smp.spurious_mask.resize(s * s);
      for (size_t px = 0; px < s * s; ++px) {
        smp.core_mask[px] = core[i * s * s + px] != 0.0;
        smp.spurious_mask[px] = spur[i * s * s + px] != 0.0;
      }
    }
  }
  return ds;
}

std::string dataset_manifest_json(const GroupedDataset& ds) {
  json j;
  j["spec"] = {{"image_size", ds.spec.image_size},
               {"channels", ds.spec.channels},
               {"n_train_per_class", ds.spec.n_train_per_class},
               {"n_val_per_class", ds.spec.n_val_per_class},
               {"n_test_per_class", ds.spec.n_test_per_class},
               {"train_correlation", ds.spec.train_correlation},
               {"patch_size", ds.spec.patch_size},
               {"noise_sigma", ds.spec.noise_sigma},
               {"seed", ds.spec.seed}};
  for (Split split : {Split::Train, Split::Valid, Split::Test}) {
    std::array<uint64_t, 4> counts{};
    for (const auto& s : ds.split(split)) ++counts[s.group.index()];
    j["counts"][split_name(split)] = counts;
  }
  return j.dump(2) + "\n";
}

std::string dfr_result_json(const DfrResult& result, const DfrConfig& cfg) {
  json j;
  j["weights"] = result.head.weights;
  j["bias"] = result.head.bias;
  j["zero_fraction"] = result.zero_fraction;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["standardized"] = result.standardized;
  j["subset_indices"] = result.subset_indices;
  j["config"] = {{"l1_lambda", cfg.l1_lambda},
                 {"max_iters", cfg.max_iters},
                 {"step_size", cfg.step_size},
                 {"tol", cfg.tol},
                 {"n_subset_repeats", cfg.n_subset_repeats},
                 {"standardize", cfg.standardize},
                 {"seed", cfg.seed}};
  return j.dump(2) + "\n";
}

}  // namespace dfrlab
