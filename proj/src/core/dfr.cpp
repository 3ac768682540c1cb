#include "core/dfr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace dfrlab {

namespace {

constexpr uint64_t kSubsetTag = 0x5B5E7000ull;
constexpr double kMinStep = 1e-18;
constexpr int kMaxHalvings = 64;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

struct SolveOutput {
  std::vector<double> w;
  double b = 0.0;
  bool converged = false;
  uint32_t iterations = 0;
  std::vector<double> trace;
};

double objective(const FeatureMatrix& fm, const std::vector<double>& w,
                 double b, double lambda) {
  double loss = 0.0;
  for (size_t r = 0; r < fm.rows; ++r) {
    const double* z = &fm.values[r * fm.cols];
    double t = b;
    for (size_t c = 0; c < fm.cols; ++c) t += w[c] * z[c];
    loss += bce_loss(sigmoid(t), fm.labels[r]);
  }
  loss /= static_cast<double>(fm.rows);
  double l1 = 0.0;
  for (double v : w) l1 += std::abs(v);
  return loss + lambda * l1;
}

void smooth_gradient(const FeatureMatrix& fm, const std::vector<double>& w,
                     double b, std::vector<double>& gw, double& gb) {
  std::fill(gw.begin(), gw.end(), 0.0);
  gb = 0.0;
  for (size_t r = 0; r < fm.rows; ++r) {
    const double* z = &fm.values[r * fm.cols];
    double t = b;
    for (size_t c = 0; c < fm.cols; ++c) t += w[c] * z[c];
    const double dt = sigmoid(t) - static_cast<double>(fm.labels[r]);
    for (size_t c = 0; c < fm.cols; ++c) gw[c] += dt * z[c];
    gb += dt;
  }
  const double inv = 1.0 / static_cast<double>(fm.rows);
  for (double& v : gw) v *= inv;
  gb *= inv;
}

// Proximal gradient with monotone step halving: a step is accepted only if
// it does not increase the objective, which makes the trace non-increasing
// and lets soft-thresholding produce exact zeros.
SolveOutput solve_l1_logistic(const FeatureMatrix& fm, const DfrConfig& cfg) {
  SolveOutput out;
  out.w.assign(fm.cols, 0.0);
  out.b = 0.0;

  std::vector<double> gw(fm.cols, 0.0);
  std::vector<double> wcand(fm.cols, 0.0);
  double gb = 0.0;
  double step = cfg.step_size;
  double obj = objective(fm, out.w, out.b, cfg.l1_lambda);
  out.trace.push_back(obj);

  for (uint32_t it = 0; it < cfg.max_iters; ++it) {
    smooth_gradient(fm, out.w, out.b, gw, gb);

    double cand_obj = 0.0;
    double bcand = 0.0;
    bool accepted = false;
    for (int h = 0; h < kMaxHalvings; ++h) {
      for (size_t c = 0; c < fm.cols; ++c)
        wcand[c] =
            soft_threshold(out.w[c] - step * gw[c], step * cfg.l1_lambda);
      bcand = out.b - step * gb;
      cand_obj = objective(fm, wcand, bcand, cfg.l1_lambda);
      if (cand_obj <= obj) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < kMinStep) break;
    }
    if (!accepted) {
      // No descent direction at representable step size: treat as
      // converged.
      out.converged = true;
      out.iterations = it;
      return out;
    }
    out.w.swap(wcand);
    out.b = bcand;
    out.trace.push_back(cand_obj);
    out.iterations = it + 1;
    if (obj - cand_obj < cfg.tol) {
      out.converged = true;
      obj = cand_obj;
      return out;
    }
    obj = cand_obj;
  }
  return out;
}

// Mean/variance standardization of the columns; constant columns are left
// unscaled. Returns the transform so the solved head can be mapped back to
// raw feature space.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

Standardizer standardize_columns(FeatureMatrix& fm) {
  Standardizer st;
  st.mean.assign(fm.cols, 0.0);
  st.scale.assign(fm.cols, 1.0);
  for (size_t c = 0; c < fm.cols; ++c) {
    double m = 0.0;
    for (size_t r = 0; r < fm.rows; ++r) m += fm.at(r, c);
    m /= static_cast<double>(fm.rows);
    double var = 0.0;
    for (size_t r = 0; r < fm.rows; ++r) {
      const double d = fm.at(r, c) - m;
      var += d * d;
    }
    var /= static_cast<double>(fm.rows);
    st.mean[c] = m;
    st.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  for (size_t r = 0; r < fm.rows; ++r)
    for (size_t c = 0; c < fm.cols; ++c)
      fm.values[r * fm.cols + c] =
          (fm.values[r * fm.cols + c] - st.mean[c]) / st.scale[c];
  return st;
}

void check_labels(const FeatureMatrix& fm) {
  bool has0 = false, has1 = false;
  for (uint8_t y : fm.labels) (y ? has1 : has0) = true;
  if (!has0 || !has1)
    fail(Errc::Labels, "retrain_head: both labels must be present (got a "
                       "single-class input)");
}

}  // namespace

void validate(const DfrConfig& cfg) {
  if (!(cfg.l1_lambda >= 0.0))
    fail(Errc::InvalidSpec, "dfr config: l1_lambda must be >= 0");
  if (cfg.max_iters < 1)
    fail(Errc::InvalidSpec, "dfr config: max_iters must be >= 1");
  if (!(cfg.step_size > 0.0))
    fail(Errc::InvalidSpec, "dfr config: step_size must be > 0");
  if (!(cfg.tol >= 0.0))
    fail(Errc::InvalidSpec, "dfr config: tol must be >= 0");
  if (cfg.n_subset_repeats < 1)
    fail(Errc::InvalidSpec, "dfr config: n_subset_repeats must be >= 1");
}

std::vector<size_t> balanced_subset(std::span<const GroupId> groups,
                                    uint64_t seed) {
  std::vector<std::vector<size_t>> members(4);
  for (size_t i = 0; i < groups.size(); ++i)
    members[groups[i].index()].push_back(i);
  size_t m = SIZE_MAX;
  for (int g = 0; g < 4; ++g) {
    if (members[g].empty())
      fail(Errc::GroupBalance,
           "balanced_subset: group " + std::to_string(g) +
               " (label=" + std::to_string(g / 2) +
               ", patch=" + std::to_string(g % 2) + ") is empty");
    m = std::min(m, members[g].size());
  }
  std::vector<size_t> out;
  out.reserve(4 * m);
  for (int g = 0; g < 4; ++g) {
    Rng rng = Rng::substream(seed, kSubsetTag, static_cast<uint64_t>(g));
    auto& pool = members[g];
    // Partial Fisher-Yates: first m entries are a uniform draw without
    // replacement.
    for (size_t i = 0; i < m; ++i) {
      const size_t j = i + static_cast<size_t>(rng.next_below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<long>(m));
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<long>(m));
  }
  return out;
}

FeatureMatrix extract_features(const TrainedModel& model,
                               std::span<const Sample> samples) {
  FeatureMatrix fm;
  fm.cols = model.encoder.feature_dim();
  fm.rows = samples.size();
  fm.values.reserve(fm.rows * fm.cols);
  fm.labels.reserve(fm.rows);
  fm.groups.reserve(fm.rows);
  for (const Sample& s : samples) {
    ForwardResult fr = forward(model.encoder, s.image);
    fm.values.insert(fm.values.end(), fr.features.begin(), fr.features.end());
    fm.labels.push_back(s.label);
    fm.groups.push_back(s.group);
  }
  return fm;
}

FeatureMatrix select_rows(const FeatureMatrix& fm,
                          std::span<const size_t> indices) {
  FeatureMatrix out;
  out.cols = fm.cols;
  out.rows = indices.size();
  out.values.reserve(out.rows * out.cols);
  for (size_t i : indices) {
    if (i >= fm.rows)
      fail(Errc::InvalidArgument, "select_rows: index out of range");
    const double* z = &fm.values[i * fm.cols];
    out.values.insert(out.values.end(), z, z + fm.cols);
    out.labels.push_back(fm.labels[i]);
    out.groups.push_back(fm.groups[i]);
  }
  return out;
}

double soft_threshold(double v, double t) {
  if (!(t >= 0.0))
    fail(Errc::InvalidArgument, "soft_threshold: threshold must be >= 0");
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

DfrResult retrain_head(const FeatureMatrix& features, const DfrConfig& cfg) {
  validate(cfg);
  if (features.rows == 0 || features.cols == 0)
    fail(Errc::InvalidArgument, "retrain_head: empty feature matrix");
  if (features.labels.size() != features.rows)
    fail(Errc::ShapeMismatch, "retrain_head: labels/rows mismatch");
  for (double v : features.values)
    if (!std::isfinite(v))
      fail(Errc::InvalidArgument, "retrain_head: non-finite feature value");
  check_labels(features);

  DfrResult result;
  result.standardized = cfg.standardize;

  std::vector<FeatureMatrix> problems;
  if (cfg.n_subset_repeats == 1) {
    problems.push_back(features);
  } else {
    for (uint32_t r = 0; r < cfg.n_subset_repeats; ++r) {
      auto idx = balanced_subset(features.groups, cfg.seed + r);
      result.subset_indices.push_back(idx);
      problems.push_back(select_rows(features, idx));
    }
  }

  std::vector<double> w_sum(features.cols, 0.0);
  double b_sum = 0.0;
  bool all_converged = true;
  for (size_t r = 0; r < problems.size(); ++r) {
    FeatureMatrix& fm = problems[r];
    check_labels(fm);
    Standardizer st;
    if (cfg.standardize) st = standardize_columns(fm);
    SolveOutput sol = solve_l1_logistic(fm, cfg);
    all_converged = all_converged && sol.converged;
    if (cfg.standardize) {
      // Map back to raw feature space; exact zeros stay exact.
      double shift = 0.0;
      for (size_t c = 0; c < fm.cols; ++c) {
        sol.w[c] = sol.w[c] / st.scale[c];
        shift += sol.w[c] * st.mean[c];
      }
      sol.b -= shift;
    }
    for (size_t c = 0; c < fm.cols; ++c) w_sum[c] += sol.w[c];
    b_sum += sol.b;
    if (r == 0) {
      result.objective_trace = std::move(sol.trace);
      result.iterations = sol.iterations;
    }
  }

  const double inv = 1.0 / static_cast<double>(problems.size());
  result.head.weights.resize(features.cols);
  for (size_t c = 0; c < features.cols; ++c)
    result.head.weights[c] = w_sum[c] * inv;
  result.head.bias = b_sum * inv;
  result.converged = all_converged;
  result.zero_fraction = sparsity(result.head);
  return result;
}

TrainedModel apply_dfr(const TrainedModel& model, const DfrResult& result) {
  if (result.head.weights.size() != model.encoder.feature_dim())
    fail(Errc::ShapeMismatch,
         "apply_dfr: head has " + std::to_string(result.head.weights.size()) +
             " weights, encoder produces " +
             std::to_string(model.encoder.feature_dim()));
  TrainedModel out;
  out.encoder = model.encoder;
  out.head = result.head;
  out.log = model.log;
  return out;
}

double sparsity(const Head& head) {
  if (head.weights.empty()) return 0.0;
  size_t zeros = 0;
  for (double w : head.weights)
    if (w == 0.0) ++zeros;
  return static_cast<double>(zeros) / static_cast<double>(head.weights.size());
}

DfrResult run_dfr(const TrainedModel& model, const GroupedDataset& dataset,
                  const DfrConfig& cfg) {
  validate(cfg);
  if (dataset.valid.empty())
    fail(Errc::InvalidArgument, "run_dfr: empty validation split");
  FeatureMatrix all = extract_features(model, dataset.valid);
  if (cfg.n_subset_repeats > 1) return retrain_head(all, cfg);

  auto idx = balanced_subset(all.groups, cfg.seed);
  FeatureMatrix sub = select_rows(all, idx);
  DfrResult result = retrain_head(sub, cfg);
  result.subset_indices.assign(1, idx);
  return result;
}

}  // namespace dfrlab
