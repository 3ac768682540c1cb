#include "core/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace dfrlab {

namespace {

constexpr double kProbEps = 1e-7;
constexpr uint64_t kInitTag = 0x1A171000ull;
constexpr uint64_t kShuffleTag = 0x5AFF1E00ull;
constexpr uint64_t kGradCheckTag = 0x6C0FFEEull;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// One conv stage's forward cache; kept for the backward pass.
struct StageCache {
  Tensor padded_in;  // [ic, h+2, w+2]
  Tensor pre_act;    // [oc, h, w]
  Tensor pooled;     // [oc, h/2, w/2] (intermediate stages only)
  std::vector<uint32_t> argmax;  // per pooled cell, flat index into pre_act map
};

void conv_forward(const ConvStage& st, const Tensor& padded_in,
                  Tensor& pre_act) {
  const size_t oc = st.weights.shape()[0];
  const size_t ic = st.weights.shape()[1];
  const size_t h = pre_act.shape()[1];
  const size_t w = pre_act.shape()[2];
  const size_t pw = padded_in.shape()[2];
  for (size_t o = 0; o < oc; ++o) {
    double* out = &pre_act.values()[o * h * w];
    std::fill(out, out + h * w, st.bias[o]);
    for (size_t i = 0; i < ic; ++i) {
      const double* in = &padded_in.values()[i * (h + 2) * pw];
      for (size_t ky = 0; ky < 3; ++ky) {
        for (size_t kx = 0; kx < 3; ++kx) {
          const double wv = st.weights(o, i, ky, kx);
          for (size_t y = 0; y < h; ++y) {
            const double* src = in + (y + ky) * pw + kx;
            double* dst = out + y * w;
            for (size_t x = 0; x < w; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

void pad_into(const Tensor& in, Tensor& padded) {
  const size_t c = in.shape()[0];
  const size_t h = in.shape()[1];
  const size_t w = in.shape()[2];
  std::fill(padded.values().begin(), padded.values().end(), 0.0);
  for (size_t i = 0; i < c; ++i)
    for (size_t y = 0; y < h; ++y) {
      const double* src = &in.values()[(i * h + y) * w];
      double* dst = &padded.values()[(i * (h + 2) + y + 1) * (w + 2) + 1];
      std::copy(src, src + w, dst);
    }
}

// ReLU then 2x2 max-pool. Pool argmax is taken over the pre-activation in
// row-major block order with strict greater-than, so ties resolve to the
// first element deterministically.
void relu_pool(const Tensor& pre_act, Tensor& pooled,
               std::vector<uint32_t>& argmax) {
  const size_t c = pre_act.shape()[0];
  const size_t h = pre_act.shape()[1];
  const size_t w = pre_act.shape()[2];
  const size_t ph = h / 2;
  const size_t pw = w / 2;
  argmax.resize(c * ph * pw);
  for (size_t i = 0; i < c; ++i) {
    const double* in = &pre_act.values()[i * h * w];
    for (size_t y = 0; y < ph; ++y) {
      for (size_t x = 0; x < pw; ++x) {
        const size_t base = (2 * y) * w + 2 * x;
        size_t best = base;
        double bv = in[base];
        const size_t cand[3] = {base + 1, base + w, base + w + 1};
        for (size_t k = 0; k < 3; ++k)
          if (in[cand[k]] > bv) {
            bv = in[cand[k]];
            best = cand[k];
          }
        pooled(i, y, x) = bv > 0.0 ? bv : 0.0;
        argmax[(i * ph + y) * pw + x] = static_cast<uint32_t>(best);
      }
    }
  }
}

struct ForwardCache {
  std::vector<StageCache> stages;
  Tensor final_maps;  // [d, h, w]
};

void run_forward(const Encoder& enc, const Tensor& image, ForwardCache& fc) {
  const auto& shape = image.shape();
  if (shape.size() != 3 || shape[0] != enc.cfg.in_channels ||
      shape[1] != enc.cfg.image_size || shape[2] != enc.cfg.image_size)
    fail(Errc::ShapeMismatch,
         "forward: expected image [" + std::to_string(enc.cfg.in_channels) +
             "," + std::to_string(enc.cfg.image_size) + "," +
             std::to_string(enc.cfg.image_size) + "], got [" +
             (shape.size() == 3 ? std::to_string(shape[0]) + "," +
                                      std::to_string(shape[1]) + "," +
                                      std::to_string(shape[2])
                                : std::to_string(shape.size()) + "-d") +
             "]");

  if (enc.stages.empty()) {
    fc.stages.clear();
    fc.final_maps = image;
    return;
  }
  fc.stages.resize(enc.stages.size());
  const Tensor* cur = &image;
  size_t side = enc.cfg.image_size;
  for (size_t s = 0; s < enc.stages.size(); ++s) {
    StageCache& sc = fc.stages[s];
    const size_t ic = cur->shape()[0];
    const size_t oc = enc.stages[s].weights.shape()[0];
    if (sc.padded_in.shape() != std::vector<size_t>{ic, side + 2, side + 2})
      sc.padded_in = Tensor({ic, side + 2, side + 2});
    pad_into(*cur, sc.padded_in);
    if (sc.pre_act.shape() != std::vector<size_t>{oc, side, side})
      sc.pre_act = Tensor({oc, side, side});
    conv_forward(enc.stages[s], sc.padded_in, sc.pre_act);
    Tensor& pooled = (s + 1 == enc.stages.size()) ? fc.final_maps : sc.pooled;
    if (pooled.shape() != std::vector<size_t>{oc, side / 2, side / 2})
      pooled = Tensor({oc, side / 2, side / 2});
    relu_pool(sc.pre_act, pooled, sc.argmax);
    cur = &pooled;
    side /= 2;
  }
}

}  // namespace

size_t Encoder::parameter_count() const {
  size_t n = 0;
  for (const auto& st : stages) n += st.weights.size() + st.bias.size();
  return n;
}

bool Encoder::operator==(const Encoder& o) const {
  if (cfg.image_size != o.cfg.image_size ||
      cfg.in_channels != o.cfg.in_channels || cfg.widths != o.cfg.widths)
    return false;
  if (stages.size() != o.stages.size()) return false;
  for (size_t i = 0; i < stages.size(); ++i)
    if (!(stages[i].weights == o.stages[i].weights &&
          stages[i].bias == o.stages[i].bias))
      return false;
  return true;
}

void validate(const EncoderConfig& cfg) {
  if (cfg.image_size == 0 || cfg.in_channels == 0)
    fail(Errc::InvalidSpec, "encoder config: image_size and in_channels must be positive");
  const uint32_t div = 1u << cfg.widths.size();
  if (cfg.image_size % div != 0)
    fail(Errc::InvalidSpec,
         "encoder config: image_size " + std::to_string(cfg.image_size) +
             " not divisible by 2^" + std::to_string(cfg.widths.size()));
  for (uint32_t w : cfg.widths)
    if (w == 0) fail(Errc::InvalidSpec, "encoder config: zero stage width");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0))
    fail(Errc::InvalidSpec, "train config: learning_rate must be positive");
  if (!(cfg.momentum >= 0.0))
    fail(Errc::InvalidSpec, "train config: momentum must be >= 0");
  if (cfg.epochs < 1)
    fail(Errc::InvalidSpec, "train config: epochs must be >= 1");
  if (cfg.batch_size < 1)
    fail(Errc::InvalidSpec, "train config: batch_size must be >= 1");
  if (!(cfg.weight_decay >= 0.0))
    fail(Errc::InvalidSpec, "train config: weight_decay must be >= 0");
}

Encoder make_encoder(const EncoderConfig& cfg, uint64_t seed) {
  validate(cfg);
  Encoder enc;
  enc.cfg = cfg;
  Rng rng = Rng::substream(seed, kInitTag);
  uint32_t ic = cfg.in_channels;
  for (uint32_t oc : cfg.widths) {
    ConvStage st;
    st.weights = Tensor({oc, ic, 3, 3});
    st.bias = Tensor({oc});
    const double fan_in = static_cast<double>(ic) * 9.0;
    const double fan_out = static_cast<double>(oc) * 9.0;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : st.weights.values()) v = rng.next_uniform(-limit, limit);
    enc.stages.push_back(std::move(st));
    ic = oc;
  }
  return enc;
}

ForwardResult forward(const Encoder& encoder, const Tensor& image) {
  ForwardCache fc;
  run_forward(encoder, image, fc);
  const Tensor& maps = fc.final_maps;
  const size_t d = maps.shape()[0];
  const size_t hw = maps.shape()[1] * maps.shape()[2];
  ForwardResult res;
  res.features.resize(d);
  for (size_t k = 0; k < d; ++k) {
    double sum = 0.0;
    const double* m = &maps.values()[k * hw];
    for (size_t i = 0; i < hw; ++i) sum += m[i];
    res.features[k] = sum / static_cast<double>(hw);
  }
  res.spatial_maps = maps;
  return res;
}

double predict(const Head& head, std::span<const double> features) {
  if (features.size() != head.weights.size())
    fail(Errc::ShapeMismatch,
         "predict: head expects " + std::to_string(head.weights.size()) +
             " features, got " + std::to_string(features.size()));
  double t = head.bias;
  for (size_t k = 0; k < features.size(); ++k)
    t += head.weights[k] * features[k];
  return sigmoid(t);
}

double bce_loss(double p, int y) {
  const double q = std::min(1.0 - kProbEps, std::max(kProbEps, p));
  return y ? -std::log(q) : -std::log(1.0 - q);
}

namespace {

Gradients zero_gradients(const Encoder& enc, const Head& head) {
  Gradients g;
  g.stages.reserve(enc.stages.size());
  for (const auto& st : enc.stages) {
    ConvStage z;
    z.weights = Tensor(st.weights.shape());
    z.bias = Tensor(st.bias.shape());
    g.stages.push_back(std::move(z));
  }
  g.head_weights.assign(head.weights.size(), 0.0);
  g.head_bias = 0.0;
  return g;
}

// Backward through one stage given d(pooled); accumulates parameter
// gradients and returns d(input).
Tensor stage_backward(const ConvStage& st, const StageCache& sc,
                      const Tensor& d_pooled, ConvStage& g) {
  const size_t oc = st.weights.shape()[0];
  const size_t ic = st.weights.shape()[1];
  const size_t h = sc.pre_act.shape()[1];
  const size_t w = sc.pre_act.shape()[2];
  const size_t ph = h / 2;
  const size_t pw = w / 2;

  // Pool + ReLU backward.
  Tensor d_pre({oc, h, w});
  for (size_t o = 0; o < oc; ++o)
    for (size_t y = 0; y < ph; ++y)
      for (size_t x = 0; x < pw; ++x) {
        const uint32_t am = sc.argmax[(o * ph + y) * pw + x];
        if (sc.pre_act.values()[o * h * w + am] > 0.0)
          d_pre.values()[o * h * w + am] += d_pooled(o, y, x);
      }

  // Conv backward.
  Tensor d_padded({ic, h + 2, w + 2});
  const size_t pwid = w + 2;
  for (size_t o = 0; o < oc; ++o) {
    const double* delta = &d_pre.values()[o * h * w];
    double bsum = 0.0;
    for (size_t i = 0; i < h * w; ++i) bsum += delta[i];
    g.bias[o] += bsum;
    for (size_t i = 0; i < ic; ++i) {
      const double* in = &sc.padded_in.values()[i * (h + 2) * pwid];
      double* din = &d_padded.values()[i * (h + 2) * pwid];
      for (size_t ky = 0; ky < 3; ++ky)
        for (size_t kx = 0; kx < 3; ++kx) {
          const double wv = st.weights(o, i, ky, kx);
          double wsum = 0.0;
          for (size_t y = 0; y < h; ++y) {
            const double* src = in + (y + ky) * pwid + kx;
            double* dsrc = din + (y + ky) * pwid + kx;
            const double* drow = delta + y * w;
            for (size_t x = 0; x < w; ++x) {
              wsum += drow[x] * src[x];
              dsrc[x] += wv * drow[x];
            }
          }
          g.weights(o, i, ky, kx) += wsum;
        }
    }
  }

  // Crop padding.
  Tensor d_in({ic, h, w});
  for (size_t i = 0; i < ic; ++i)
    for (size_t y = 0; y < h; ++y) {
      const double* src = &d_padded.values()[(i * (h + 2) + y + 1) * pwid + 1];
      double* dst = &d_in.values()[(i * h + y) * w];
      std::copy(src, src + w, dst);
    }
  return d_in;
}

double batch_loss_ptrs(const Encoder& enc, const Head& head,
                       std::span<const Sample* const> batch, Gradients* grads,
                       double* accuracy_out) {
  if (batch.empty())
    fail(Errc::InvalidArgument, "batch_loss: empty batch");
  const size_t d = enc.feature_dim();
  if (head.weights.size() != d)
    fail(Errc::ShapeMismatch, "batch_loss: head/encoder dimension mismatch");

  double loss_sum = 0.0;
  size_t correct = 0;
  ForwardCache fc;
  for (const Sample* sp : batch) {
    run_forward(enc, sp->image, fc);
    const Tensor& maps = fc.final_maps;
    const size_t hw = maps.shape()[1] * maps.shape()[2];
    std::vector<double> z(d);
    for (size_t k = 0; k < d; ++k) {
      double sum = 0.0;
      const double* m = &maps.values()[k * hw];
      for (size_t i = 0; i < hw; ++i) sum += m[i];
      z[k] = sum / static_cast<double>(hw);
    }
    double t = head.bias;
    for (size_t k = 0; k < d; ++k) t += head.weights[k] * z[k];
    const double p = sigmoid(t);
    const int y = sp->label;
    loss_sum += bce_loss(p, y);
    if ((p >= 0.5 ? 1 : 0) == y) ++correct;

    if (!grads) continue;
    // Clamped probabilities contribute a constant loss, hence zero slope.
    const double dt =
        (p > kProbEps && p < 1.0 - kProbEps) ? (p - static_cast<double>(y))
                                             : 0.0;
    for (size_t k = 0; k < d; ++k) grads->head_weights[k] += dt * z[k];
    grads->head_bias += dt;
    if (!enc.stages.empty()) {
      Tensor d_maps({d, maps.shape()[1], maps.shape()[2]});
      const double inv = 1.0 / static_cast<double>(hw);
      for (size_t k = 0; k < d; ++k) {
        const double g = dt * head.weights[k] * inv;
        double* dm = &d_maps.values()[k * hw];
        for (size_t i = 0; i < hw; ++i) dm[i] = g;
      }
      Tensor delta = std::move(d_maps);
      for (size_t s = enc.stages.size(); s-- > 0;)
        delta = stage_backward(enc.stages[s], fc.stages[s], delta,
                               grads->stages[s]);
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (grads) {
    for (auto& st : grads->stages) {
      for (auto& v : st.weights.values()) v *= inv_n;
      for (auto& v : st.bias.values()) v *= inv_n;
    }
    for (auto& v : grads->head_weights) v *= inv_n;
    grads->head_bias *= inv_n;
  }
  if (accuracy_out)
    *accuracy_out = static_cast<double>(correct) * inv_n;
  return loss_sum * inv_n;
}

std::vector<double*> parameter_pointers(Encoder& enc, Head& head) {
  std::vector<double*> out;
  for (auto& st : enc.stages) {
    for (auto& v : st.weights.values()) out.push_back(&v);
    for (auto& v : st.bias.values()) out.push_back(&v);
  }
  for (auto& v : head.weights) out.push_back(&v);
  out.push_back(&head.bias);
  return out;
}

std::vector<double> gradient_values(const Gradients& g) {
  std::vector<double> out;
  for (const auto& st : g.stages) {
    out.insert(out.end(), st.weights.values().begin(),
               st.weights.values().end());
    out.insert(out.end(), st.bias.values().begin(), st.bias.values().end());
  }
  out.insert(out.end(), g.head_weights.begin(), g.head_weights.end());
  out.push_back(g.head_bias);
  return out;
}

}  // namespace

double batch_loss(const Encoder& encoder, const Head& head,
                  std::span<const Sample> batch, Gradients* grads,
                  double* accuracy_out) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(batch.size());
  for (const Sample& s : batch) ptrs.push_back(&s);
  if (grads) *grads = zero_gradients(encoder, head);
  return batch_loss_ptrs(encoder, head, ptrs, grads, accuracy_out);
}

TrainedModel train_erm(const GroupedDataset& dataset, const TrainConfig& cfg) {
  validate(cfg);
  if (dataset.train.empty())
    fail(Errc::InvalidArgument, "train_erm: empty train split");

  EncoderConfig ecfg;
  ecfg.image_size = dataset.spec.image_size;
  ecfg.in_channels = dataset.spec.channels;
  TrainedModel model;
  model.encoder = make_encoder(ecfg, cfg.seed);
  const size_t d = model.encoder.feature_dim();
  {
    Rng rng = Rng::substream(cfg.seed, kInitTag + 1);
    const double limit = std::sqrt(6.0 / (static_cast<double>(d) + 1.0));
    model.head.weights.resize(d);
    for (auto& v : model.head.weights) v = rng.next_uniform(-limit, limit);
    model.head.bias = 0.0;
  }

  Gradients velocity = zero_gradients(model.encoder, model.head);
  Gradients grads = zero_gradients(model.encoder, model.head);
  const size_t n = dataset.train.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::substream(cfg.seed, kShuffleTag, epoch);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    double correct_sum = 0.0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<const Sample*> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i)
        batch.push_back(&dataset.train[order[i]]);

      grads = zero_gradients(model.encoder, model.head);
      double batch_acc = 0.0;
      const double loss =
          batch_loss_ptrs(model.encoder, model.head, batch, &grads, &batch_acc);
      if (!std::isfinite(loss))
        fail(Errc::Diverged, "train_erm: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      loss_sum += loss * static_cast<double>(batch.size());
      correct_sum += batch_acc * static_cast<double>(batch.size());

      // SGD with momentum; L2 decay on weights only.
      for (size_t s = 0; s < model.encoder.stages.size(); ++s) {
        auto& wv = model.encoder.stages[s].weights.values();
        auto& vv = velocity.stages[s].weights.values();
        auto& gv = grads.stages[s].weights.values();
        for (size_t i = 0; i < wv.size(); ++i) {
          vv[i] = cfg.momentum * vv[i] + gv[i] + cfg.weight_decay * wv[i];
          wv[i] -= cfg.learning_rate * vv[i];
        }
        auto& bv = model.encoder.stages[s].bias.values();
        auto& vb = velocity.stages[s].bias.values();
        auto& gb = grads.stages[s].bias.values();
        for (size_t i = 0; i < bv.size(); ++i) {
          vb[i] = cfg.momentum * vb[i] + gb[i];
          bv[i] -= cfg.learning_rate * vb[i];
        }
      }
      for (size_t k = 0; k < d; ++k) {
        velocity.head_weights[k] = cfg.momentum * velocity.head_weights[k] +
                                   grads.head_weights[k] +
                                   cfg.weight_decay * model.head.weights[k];
        model.head.weights[k] -= cfg.learning_rate * velocity.head_weights[k];
      }
      velocity.head_bias =
          cfg.momentum * velocity.head_bias + grads.head_bias;
      model.head.bias -= cfg.learning_rate * velocity.head_bias;
    }
    model.log.push_back({loss_sum / static_cast<double>(n),
                         correct_sum / static_cast<double>(n)});
  }
  return model;
}

double grad_check(const TrainedModel& model, std::span<const Sample> batch,
                  double eps) {
  if (!(eps > 0.0))
    fail(Errc::InvalidArgument, "grad_check: eps must be > 0");
  if (batch.empty())
    fail(Errc::InvalidArgument, "grad_check: empty batch");

  Gradients grads;
  batch_loss(model.encoder, model.head, batch, &grads);
  const std::vector<double> analytic = gradient_values(grads);

  TrainedModel probe = model;
  std::vector<double*> params = parameter_pointers(probe.encoder, probe.head);

  std::vector<size_t> chosen(params.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  const size_t target = std::min<size_t>(params.size(), 128);
  if (chosen.size() > target) {
    Rng rng = Rng::substream(kGradCheckTag, params.size());
    rng.shuffle(chosen);
    chosen.resize(target);
  }

  double max_rel = 0.0;
  for (size_t idx : chosen) {
    const double saved = *params[idx];
    *params[idx] = saved + eps;
    const double lp = batch_loss(probe.encoder, probe.head, batch, nullptr);
    *params[idx] = saved - eps;
    const double lm = batch_loss(probe.encoder, probe.head, batch, nullptr);
    *params[idx] = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic[idx];
    const double rel =
        std::abs(a - numeric) /
        std::max(1e-8, std::abs(a) + std::abs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace dfrlab
