#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "core/dfr.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

using namespace dfrlab;

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double logistic_objective(const FeatureMatrix& fm, const std::vector<double>& w,
                          double b, double lambda) {
  double loss = 0.0;
  for (size_t r = 0; r < fm.rows; ++r) {
    double t = b;
    for (size_t c = 0; c < fm.cols; ++c) t += w[c] * fm.at(r, c);
    loss += bce_loss(sigmoid(t), fm.labels[r]);
  }
  loss /= static_cast<double>(fm.rows);
  for (double v : w) loss += lambda * std::abs(v);
  return loss;
}

FeatureMatrix balanced_groups(FeatureMatrix fm) {
  // Cycle the four groups so balanced-subset preconditions hold.
  fm.groups.resize(fm.rows);
  for (size_t i = 0; i < fm.rows; ++i)
    fm.groups[i] = group_of(static_cast<int>(fm.labels[i]),
                            static_cast<int>((i / 2) % 2));
  return fm;
}

// Overlapping two-feature data; the pinned contradictory pairs make it
// provably nonseparable, so the unregularized optimum is finite.
FeatureMatrix nonseparable_instance() {
  FeatureMatrix fm;
  fm.cols = 2;
  Rng rng(2024);
  for (int i = 0; i < 36; ++i) {
    const int y = i % 2;
    fm.values.push_back((y ? 0.6 : -0.6) + rng.next_gaussian());
    fm.values.push_back((y ? -0.3 : 0.3) + 0.8 * rng.next_gaussian());
    fm.labels.push_back(static_cast<uint8_t>(y));
  }
  for (int y = 0; y < 2; ++y) {
    fm.values.push_back(0.25);
    fm.values.push_back(-0.4);
    fm.labels.push_back(static_cast<uint8_t>(y));
    fm.values.push_back(-1.1);
    fm.values.push_back(0.7);
    fm.labels.push_back(static_cast<uint8_t>(1 - y));
  }
  fm.rows = fm.labels.size();
  return balanced_groups(std::move(fm));
}

}  // namespace

TEST_CASE("soft_threshold analytic cases") {
  CHECK(soft_threshold(0.7, 0.2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(soft_threshold(-0.1, 0.2) == 0.0);
  CHECK(soft_threshold(1.25, 0.0) == 1.25);
  CHECK(soft_threshold(-3.5, 0.0) == -3.5);
  CHECK(soft_threshold(-0.9, 0.4) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK_THROWS_AS(soft_threshold(1.0, -0.1), Error);
}

TEST_CASE("balanced_subset draws the min group size from each group") {
  SUBCASE("equal groups of 10") {
    std::vector<GroupId> groups;
    for (int g = 0; g < 4; ++g)
      for (int i = 0; i < 10; ++i) groups.push_back(group_of(g / 2, g % 2));
    const auto idx = balanced_subset(groups, 1);
    CHECK(idx.size() == 40);
  }
  SUBCASE("ISIC-like validation: 60 per group gives 240") {
    std::vector<GroupId> groups;
    for (int g = 0; g < 4; ++g)
      for (int i = 0; i < 60; ++i) groups.push_back(group_of(g / 2, g % 2));
    CHECK(balanced_subset(groups, 1).size() == 240);
  }
  SUBCASE("uneven groups use the min rule") {
    std::vector<GroupId> groups;
    const int sizes[4] = {5, 9, 7, 6};
    for (int g = 0; g < 4; ++g)
      for (int i = 0; i < sizes[g]; ++i) groups.push_back(group_of(g / 2, g % 2));
    const auto idx = balanced_subset(groups, 3);
    CHECK(idx.size() == 20);
    std::array<int, 4> per_group{};
    for (size_t i : idx) ++per_group[groups[i].index()];
    for (int g = 0; g < 4; ++g) CHECK(per_group[g] == 5);
    // Unique indices.
    auto sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
  SUBCASE("missing group raises a balance error naming it") {
    std::vector<GroupId> groups = {group_of(0, 0), group_of(0, 1),
                                   group_of(1, 0)};
    CHECK_THROWS_WITH_AS(balanced_subset(groups, 1),
                         doctest::Contains("group 3"), Error);
  }
  SUBCASE("deterministic given the seed") {
    std::vector<GroupId> groups;
    for (int g = 0; g < 4; ++g)
      for (int i = 0; i < 17; ++i) groups.push_back(group_of(g / 2, g % 2));
    CHECK(balanced_subset(groups, 9) == balanced_subset(groups, 9));
    CHECK(balanced_subset(groups, 9) != balanced_subset(groups, 10));
  }
}

TEST_CASE("extract_features equals independent per-sample forward calls") {
  EncoderConfig ecfg;
  ecfg.image_size = 8;
  ecfg.in_channels = 3;
  ecfg.widths = {4, 4};
  TrainedModel model;
  model.encoder = make_encoder(ecfg, 17);
  model.head.weights.assign(model.encoder.feature_dim(), 0.0);

  std::vector<Sample> samples;
  Rng rng(33);
  for (int i = 0; i < 16; ++i) {
    Sample s;
    s.image = Tensor({3, 8, 8});
    for (auto& v : s.image.values()) v = rng.next_unit();
    s.label = static_cast<uint8_t>(i % 2);
    s.group = group_of(i % 2, (i / 2) % 2);
    samples.push_back(std::move(s));
  }

  const FeatureMatrix fm = extract_features(model, samples);
  REQUIRE(fm.rows == 16);
  REQUIRE(fm.cols == model.encoder.feature_dim());
  for (size_t i = 0; i < samples.size(); ++i) {
    const ForwardResult fr = forward(model.encoder, samples[i].image);
    for (size_t k = 0; k < fm.cols; ++k) CHECK(fm.at(i, k) == fr.features[k]);
    CHECK(fm.labels[i] == samples[i].label);
    CHECK(fm.groups[i] == samples[i].group);
  }
}

TEST_CASE("zero-parameter encoder extracts an all-zero matrix") {
  EncoderConfig ecfg;
  ecfg.image_size = 8;
  ecfg.in_channels = 1;
  ecfg.widths = {2};
  TrainedModel model;
  model.encoder = make_encoder(ecfg, 1);
  for (auto& st : model.encoder.stages) {
    std::fill(st.weights.values().begin(), st.weights.values().end(), 0.0);
    std::fill(st.bias.values().begin(), st.bias.values().end(), 0.0);
  }
  model.head.weights.assign(2, 0.0);
  std::vector<Sample> samples(3);
  Rng rng(4);
  for (auto& s : samples) {
    s.image = Tensor({1, 8, 8});
    for (auto& v : s.image.values()) v = rng.next_unit();
    s.label = 1;
    s.group = group_of(1, 0);
  }
  samples[0].label = 0;
  const FeatureMatrix fm = extract_features(model, samples);
  for (double v : fm.values) CHECK(v == 0.0);
}

TEST_CASE("lambda = 0 solution matches a long-run plain gradient-descent oracle") {
  const FeatureMatrix fm = nonseparable_instance();

  // Oracle: plain full-batch GD, fixed small step, one million iterations.
  std::vector<double> w_oracle(2, 0.0);
  double b_oracle = 0.0;
  for (int it = 0; it < 1000000; ++it) {
    double g0 = 0.0, g1 = 0.0, gb = 0.0;
    for (size_t r = 0; r < fm.rows; ++r) {
      const double t =
          b_oracle + w_oracle[0] * fm.at(r, 0) + w_oracle[1] * fm.at(r, 1);
      const double d = sigmoid(t) - static_cast<double>(fm.labels[r]);
      g0 += d * fm.at(r, 0);
      g1 += d * fm.at(r, 1);
      gb += d;
    }
    const double inv = 1.0 / static_cast<double>(fm.rows);
    w_oracle[0] -= 0.5 * g0 * inv;
    w_oracle[1] -= 0.5 * g1 * inv;
    b_oracle -= 0.5 * gb * inv;
  }

  DfrConfig cfg;
  cfg.l1_lambda = 0.0;
  cfg.tol = 1e-14;
  cfg.max_iters = 300000;
  cfg.step_size = 0.5;
  const DfrResult res = retrain_head(fm, cfg);

  CHECK(std::abs(res.head.weights[0] - w_oracle[0]) < 1e-4);
  CHECK(std::abs(res.head.weights[1] - w_oracle[1]) < 1e-4);
  CHECK(std::abs(res.head.bias - b_oracle) < 1e-4);
  CHECK(res.zero_fraction == 0.0);
}

TEST_CASE("one-feature lasso matches a dense grid search in objective") {
  // Symmetric instance: optimal bias is exactly zero for every w, so a 1-D
  // grid over w with b = 0 covers the joint optimum.
  FeatureMatrix fm;
  fm.cols = 1;
  const double zs[] = {0.1, 0.3, 0.9, 1.7, 2.5};
  for (double z : zs) {
    fm.values.push_back(z);
    fm.labels.push_back(1);
    fm.values.push_back(-z);
    fm.labels.push_back(0);
  }
  fm.rows = fm.labels.size();
  FeatureMatrix fmg = balanced_groups(fm);

  DfrConfig cfg;
  cfg.l1_lambda = 0.3;
  cfg.tol = 1e-14;
  cfg.max_iters = 200000;
  const DfrResult res = retrain_head(fmg, cfg);

  double best = 1e300;
  for (int i = -50000; i <= 50000; ++i) {
    const double w = static_cast<double>(i) * 1e-4;
    best = std::min(best,
                    logistic_objective(fmg, {w}, 0.0, cfg.l1_lambda));
  }
  const double got =
      logistic_objective(fmg, res.head.weights, res.head.bias, cfg.l1_lambda);
  CHECK(std::abs(got - best) < 1e-6);
}

TEST_CASE("lambda above the zero-point subgradient bound returns exactly w = 0") {
  // |z| <= 1 bounds every smooth-part gradient coordinate by 1, so with
  // lambda = 1 the proximal step can never move w off zero.
  FeatureMatrix fm;
  fm.cols = 3;
  Rng rng(77);
  for (int i = 0; i < 24; ++i) {
    for (int c = 0; c < 3; ++c)
      fm.values.push_back(rng.next_uniform(-1.0, 1.0));
    fm.labels.push_back(static_cast<uint8_t>(i % 2));
  }
  fm.rows = 24;
  FeatureMatrix fmg = balanced_groups(fm);

  DfrConfig cfg;
  cfg.l1_lambda = 1.0;
  const DfrResult res = retrain_head(fmg, cfg);
  for (double w : res.head.weights) CHECK(w == 0.0);
  CHECK(res.zero_fraction == 1.0);
}

TEST_CASE("zero fraction is non-decreasing in lambda on fixed features") {
  FeatureMatrix fm;
  fm.cols = 6;
  Rng rng(404);
  for (int i = 0; i < 60; ++i) {
    const int y = i % 2;
    for (int c = 0; c < 6; ++c) {
      const double signal = c < 3 ? (y ? 0.4 : -0.4) * (c + 1) * 0.3 : 0.0;
      fm.values.push_back(signal + 0.5 * rng.next_gaussian());
    }
    fm.labels.push_back(static_cast<uint8_t>(y));
  }
  fm.rows = 60;
  FeatureMatrix fmg = balanced_groups(fm);

  double prev = -1.0;
  for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
    DfrConfig cfg;
    cfg.l1_lambda = lambda;
    cfg.tol = 1e-12;
    cfg.max_iters = 50000;
    const DfrResult res = retrain_head(fmg, cfg);
    CHECK(res.zero_fraction >= prev);
    prev = res.zero_fraction;
  }
}

TEST_CASE("objective trace is non-increasing and the optimum ignores row order") {
  FeatureMatrix fm = nonseparable_instance();
  DfrConfig cfg;
  cfg.l1_lambda = 0.05;
  cfg.tol = 1e-13;
  cfg.max_iters = 100000;
  const DfrResult res = retrain_head(fm, cfg);
  for (size_t i = 1; i < res.objective_trace.size(); ++i)
    CHECK(res.objective_trace[i] <= res.objective_trace[i - 1]);

  // Reverse the rows.
  FeatureMatrix rev;
  rev.cols = fm.cols;
  rev.rows = fm.rows;
  for (size_t r = fm.rows; r-- > 0;) {
    rev.values.push_back(fm.at(r, 0));
    rev.values.push_back(fm.at(r, 1));
    rev.labels.push_back(fm.labels[r]);
    rev.groups.push_back(fm.groups[r]);
  }
  const DfrResult res2 = retrain_head(rev, cfg);
  CHECK(std::abs(res.head.weights[0] - res2.head.weights[0]) < 1e-6);
  CHECK(std::abs(res.head.weights[1] - res2.head.weights[1]) < 1e-6);
  CHECK(std::abs(res.head.bias - res2.head.bias) < 1e-6);
}

TEST_CASE("single-class input raises a label error; max_iters=1 flags non-convergence") {
  FeatureMatrix fm;
  fm.cols = 1;
  for (int i = 0; i < 6; ++i) {
    fm.values.push_back(0.5 * i);
    fm.labels.push_back(1);
  }
  fm.rows = 6;
  CHECK_THROWS_AS(retrain_head(fm, DfrConfig{}), Error);

  FeatureMatrix ok = nonseparable_instance();
  DfrConfig cfg;
  cfg.max_iters = 1;
  const DfrResult res = retrain_head(ok, cfg);
  CHECK_FALSE(res.converged);
}

TEST_CASE("n_subset_repeats > 1 draws balanced subsets and averages the heads") {
  FeatureMatrix fm;
  fm.cols = 2;
  Rng rng(55);
  for (int i = 0; i < 80; ++i) {
    const int y = i % 2;
    fm.values.push_back((y ? 0.8 : -0.8) + 0.3 * rng.next_gaussian());
    fm.values.push_back(rng.next_gaussian());
    fm.labels.push_back(static_cast<uint8_t>(y));
  }
  fm.rows = 80;
  FeatureMatrix fmg = balanced_groups(fm);

  DfrConfig cfg;
  cfg.n_subset_repeats = 3;
  cfg.l1_lambda = 0.01;
  cfg.seed = 5;
  const DfrResult res = retrain_head(fmg, cfg);
  CHECK(res.subset_indices.size() == 3);
  for (const auto& idx : res.subset_indices) CHECK(idx.size() == 80);
  // Deterministic under repetition.
  const DfrResult res2 = retrain_head(fmg, cfg);
  CHECK(res.head.weights == res2.head.weights);
  CHECK(res.head.bias == res2.head.bias);
}

TEST_CASE("standardize solves in normalized space but returns a raw-space head") {
  FeatureMatrix fm;
  fm.cols = 2;
  Rng rng(91);
  for (int i = 0; i < 40; ++i) {
    const int y = i % 2;
    // Column 0 informative with a big offset and scale; column 1 constant.
    fm.values.push_back(100.0 + 5.0 * ((y ? 1.0 : -1.0) + 0.5 * rng.next_gaussian()));
    fm.values.push_back(3.0);
    fm.labels.push_back(static_cast<uint8_t>(y));
  }
  fm.rows = 40;
  FeatureMatrix fmg = balanced_groups(fm);

  DfrConfig cfg;
  cfg.standardize = true;
  cfg.l1_lambda = 0.01;
  const DfrResult res = retrain_head(fmg, cfg);
  CHECK(res.standardized);
  // Raw-space head must classify the raw features.
  size_t correct = 0;
  for (size_t r = 0; r < fmg.rows; ++r) {
    const double t = res.head.bias + res.head.weights[0] * fmg.at(r, 0) +
                     res.head.weights[1] * fmg.at(r, 1);
    if ((sigmoid(t) >= 0.5 ? 1 : 0) == fmg.labels[r]) ++correct;
  }
  CHECK(correct >= 36);
}

TEST_CASE("apply_dfr swaps the head and keeps the encoder bitwise") {
  EncoderConfig ecfg;
  ecfg.image_size = 8;
  ecfg.in_channels = 1;
  ecfg.widths = {3};
  TrainedModel model;
  model.encoder = make_encoder(ecfg, 3);
  model.head.weights = {0.5, -0.25, 0.1};
  model.head.bias = 0.05;

  std::vector<Sample> samples(5);
  Rng rng(8);
  for (auto& s : samples) {
    s.image = Tensor({1, 8, 8});
    for (auto& v : s.image.values()) v = rng.next_unit();
  }

  SUBCASE("identity head keeps predictions identical") {
    DfrResult res;
    res.head = model.head;
    const TrainedModel same = apply_dfr(model, res);
    CHECK(same.encoder == model.encoder);
    for (const auto& s : samples) {
      const double a =
          predict(model.head, forward(model.encoder, s.image).features);
      const double b =
          predict(same.head, forward(same.encoder, s.image).features);
      CHECK(a == b);
    }
  }
  SUBCASE("zero weights predict sigmoid(bias) everywhere") {
    DfrResult res;
    res.head.weights = {0.0, 0.0, 0.0};
    res.head.bias = 0.7;
    const TrainedModel flat = apply_dfr(model, res);
    for (const auto& s : samples) {
      const double p =
          predict(flat.head, forward(flat.encoder, s.image).features);
      CHECK(p == doctest::Approx(sigmoid(0.7)).epsilon(1e-15));
    }
  }
  SUBCASE("dimension mismatch is rejected") {
    DfrResult res;
    res.head.weights = {1.0};
    CHECK_THROWS_AS(apply_dfr(model, res), Error);
  }
}

TEST_CASE("sparsity counts exact zeros only") {
  Head head;
  head.weights = {0.0, 0.0, 0.5, -0.2};
  CHECK(sparsity(head) == 0.5);
  head.weights = {1e-300, 0.0};
  CHECK(sparsity(head) == 0.5);
  head.weights = {};
  CHECK(sparsity(head) == 0.0);
}
