#include "ltcal/head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ltcal {

std::size_t HeadParams::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

void HeadParams::validate() const {
  if (dims.size() < 2) throw std::invalid_argument("HeadParams: need at least one layer");
  if (weights.size() != dims.size() - 1 || biases.size() != dims.size() - 1)
    throw std::invalid_argument("HeadParams: layer count mismatch");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = static_cast<std::size_t>(dims[l]);
    const std::size_t out = static_cast<std::size_t>(dims[l + 1]);
    if (dims[l] < 1 || dims[l + 1] < 1)
      throw std::invalid_argument("HeadParams: non-positive layer width");
    if (weights[l].size() != in * out)
      throw std::invalid_argument("HeadParams: weight shape mismatch in layer " + std::to_string(l));
    if (biases[l].size() != out)
      throw std::invalid_argument("HeadParams: bias shape mismatch in layer " + std::to_string(l));
    for (const double w : weights[l])
      if (!std::isfinite(w)) throw std::invalid_argument("HeadParams: non-finite weight");
    for (const double b : biases[l])
      if (!std::isfinite(b)) throw std::invalid_argument("HeadParams: non-finite bias");
  }
}

HeadParams HeadParams::random_init(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("random_init: need at least one layer");
  HeadParams p;
  p.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = static_cast<std::size_t>(dims[l]);
    const std::size_t out = static_cast<std::size_t>(dims[l + 1]);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& x : w) x = rng.normal(0.0, std_dev);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(out, 0.0);
  }
  p.validate();
  return p;
}

nlohmann::json HeadParams::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights.size(); ++l)
    layers.push_back({{"weight", weights[l]}, {"bias", biases[l]}});
  return nlohmann::json{{"dims", dims}, {"layers", std::move(layers)}};
}

HeadParams HeadParams::from_json(const nlohmann::json& j) {
  HeadParams p;
  p.dims = j.at("dims").get<std::vector<int>>();
  for (const nlohmann::json& lj : j.at("layers")) {
    p.weights.push_back(lj.at("weight").get<std::vector<double>>());
    p.biases.push_back(lj.at("bias").get<std::vector<double>>());
  }
  p.validate();
  return p;
}

void HeadParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

HeadParams HeadParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kReweight: return "reweight";
    case LossKind::kFocal: return "focal";
    case LossKind::kMargin: return "margin";
  }
  throw std::logic_error("bad LossKind");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::kCrossEntropy;
  if (s == "reweight") return LossKind::kReweight;
  if (s == "focal") return LossKind::kFocal;
  if (s == "margin") return LossKind::kMargin;
  throw std::invalid_argument("unknown loss kind: " + s);
}

void LossConfig::validate() const {
  if (!(weight_clamp_lo < weight_clamp_hi))
    throw std::invalid_argument("LossConfig: clamp low must be < high");
  if (gamma < 0.0) throw std::invalid_argument("LossConfig: gamma must be >= 0");
  if (margin_c < 0.0) throw std::invalid_argument("LossConfig: margin_c must be >= 0");
}

void SampleBatch::add(std::span<const double> f, int label) {
  if (feature_dim == 0) feature_dim = static_cast<int>(f.size());
  if (static_cast<int>(f.size()) != feature_dim)
    throw std::invalid_argument("SampleBatch: inconsistent feature dim");
  features.insert(features.end(), f.begin(), f.end());
  labels.push_back(label);
}

void softmax(std::span<const double> logits, std::span<double> probs_out) {
  double max_logit = logits[0];
  for (const double y : logits) max_logit = std::max(max_logit, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs_out[i] = std::exp(logits[i] - max_logit);
    sum += probs_out[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < logits.size(); ++i) probs_out[i] *= inv;
}

namespace {

/// Linear layer: out = W x + b.
void affine(const std::vector<double>& w, const std::vector<double>& b,
            std::span<const double> x, std::span<double> out) {
  const std::size_t in = x.size();
  const std::size_t n = b.size();
  for (std::size_t r = 0; r < n; ++r) {
    double acc = b[r];
    const double* wr = w.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

void check_finite(std::span<const double> v, std::size_t layer) {
  for (const double x : v)
    if (!std::isfinite(x))
      throw std::runtime_error("non-finite activation in layer " + std::to_string(layer));
}

}  // namespace

void forward(const HeadParams& params, std::span<const double> features,
             std::vector<double>& logits_out, std::vector<double>& probs_out) {
  if (static_cast<int>(features.size()) != params.input_dim())
    throw std::invalid_argument("forward: feature dimension mismatch");
  std::vector<double> cur(features.begin(), features.end());
  std::vector<double> next;
  const int L = params.num_layers();
  for (int l = 0; l < L; ++l) {
    next.assign(params.biases[static_cast<std::size_t>(l)].size(), 0.0);
    affine(params.weights[static_cast<std::size_t>(l)],
           params.biases[static_cast<std::size_t>(l)], cur, next);
    check_finite(next, static_cast<std::size_t>(l));
    if (l + 1 < L)
      for (double& x : next) x = std::max(0.0, x);
    cur.swap(next);
  }
  logits_out = std::move(cur);
  probs_out.assign(logits_out.size(), 0.0);
  softmax(logits_out, probs_out);
}

PredictionVector predict(const HeadParams& params, std::span<const double> features) {
  std::vector<double> logits;
  std::vector<double> probs;
  forward(params, features, logits, probs);
  PredictionVector p;
  p.scores = std::move(probs);
  return p;
}

double loss_ce(const std::vector<double>& probs, int label) {
  return -std::log(probs.at(static_cast<std::size_t>(label)) + kLogEps);
}

double reweight_weight(int label, const ClassStats& stats, const LossConfig& cfg) {
  if (label == kBackgroundClass) return cfg.background_weight;
  const std::int64_t n = stats.instances(label);
  const double raw = n > 0 ? cfg.reweight_numerator / static_cast<double>(n)
                           : cfg.weight_clamp_hi;
  return std::clamp(raw, cfg.weight_clamp_lo, cfg.weight_clamp_hi);
}

double loss_reweight(const std::vector<double>& probs, int label,
                     const ClassStats& stats, const LossConfig& cfg) {
  return reweight_weight(label, stats, cfg) * loss_ce(probs, label);
}

double loss_focal(const std::vector<double>& probs, int label, double gamma) {
  const double p = probs.at(static_cast<std::size_t>(label));
  return -std::pow(1.0 - p, gamma) * std::log(p + kLogEps);
}

double margin_delta(int label, const ClassStats& stats, double margin_c) {
  if (label == kBackgroundClass) return 0.0;
  const std::int64_t n = stats.instances(label);
  if (n <= 0) return margin_c;  // unseen class: capped at the full margin
  return margin_c / std::pow(static_cast<double>(n), 0.25);
}

double loss_margin(const std::vector<double>& logits, int label,
                   const ClassStats& stats, double margin_c) {
  const double delta = margin_delta(label, stats, margin_c);
  std::vector<double> shifted = logits;
  shifted[static_cast<std::size_t>(label)] -= delta;
  // -log softmax(shifted)[label]; same softmax and log guard as plain CE so
  // the zero-margin case reduces to it exactly.
  std::vector<double> q(shifted.size());
  softmax(shifted, q);
  return -std::log(q[static_cast<std::size_t>(label)] + kLogEps);
}

double sample_loss(const LossConfig& cfg, const std::vector<double>& probs,
                   const std::vector<double>& logits, int label,
                   const ClassStats* stats) {
  switch (cfg.kind) {
    case LossKind::kCrossEntropy:
      return loss_ce(probs, label);
    case LossKind::kReweight:
      return loss_reweight(probs, label, *stats, cfg);
    case LossKind::kFocal: {
      const double l = loss_focal(probs, label, cfg.gamma);
      return (label != kBackgroundClass) ? cfg.focal_alpha * l : l;
    }
    case LossKind::kMargin:
      return loss_margin(logits, label, *stats, cfg.margin_c);
  }
  throw std::logic_error("bad LossKind");
}

void loss_grad_logits(const LossConfig& cfg, const std::vector<double>& probs,
                      const std::vector<double>& logits, int label,
                      const ClassStats* stats, std::span<double> out) {
  const std::size_t n = probs.size();
  const std::size_t z = static_cast<std::size_t>(label);
  switch (cfg.kind) {
    case LossKind::kCrossEntropy: {
      for (std::size_t k = 0; k < n; ++k) out[k] = probs[k];
      out[z] -= 1.0;
      return;
    }
    case LossKind::kReweight: {
      const double w = reweight_weight(label, *stats, cfg);
      for (std::size_t k = 0; k < n; ++k) out[k] = w * probs[k];
      out[z] -= w;
      return;
    }
    case LossKind::kFocal: {
      if (cfg.gamma == 0.0 && cfg.focal_alpha == 1.0) {
        // Exact CE reduction; share the CE path bit-for-bit.
        for (std::size_t k = 0; k < n; ++k) out[k] = probs[k];
        out[z] -= 1.0;
        return;
      }
      const double p = probs[z];
      const double one_minus = 1.0 - p;
      const double log_p = std::log(p + kLogEps);
      // d/dp of -(1-p)^g log(p+eps)
      double dldp = -std::pow(one_minus, cfg.gamma) / (p + kLogEps);
      if (cfg.gamma > 0.0)
        dldp += cfg.gamma * std::pow(one_minus, cfg.gamma - 1.0) * log_p;
      const double alpha = (label != kBackgroundClass) ? cfg.focal_alpha : 1.0;
      // chain through softmax: dp_z/dy_k = p_z (delta - p_k)
      for (std::size_t k = 0; k < n; ++k)
        out[k] = alpha * dldp * p * ((k == z ? 1.0 : 0.0) - probs[k]);
      return;
    }
    case LossKind::kMargin: {
      const double delta = margin_delta(label, *stats, cfg.margin_c);
      std::vector<double> shifted = logits;
      shifted[z] -= delta;
      std::vector<double> q(n);
      softmax(shifted, q);
      for (std::size_t k = 0; k < n; ++k) out[k] = q[k];
      out[z] -= 1.0;
      return;
    }
  }
  throw std::logic_error("bad LossKind");
}

Gradients Gradients::zeros_like(const HeadParams& params) {
  Gradients g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.emplace_back(params.weights[l].size(), 0.0);
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

double batch_loss(const HeadParams& params, const SampleBatch& batch,
                  const LossConfig& cfg, const ClassStats* stats) {
  if (batch.size() == 0) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  std::vector<double> logits;
  std::vector<double> probs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward(params, batch.row(i), logits, probs);
    total += sample_loss(cfg, probs, logits, batch.labels[i], stats);
  }
  return total / static_cast<double>(batch.size());
}

Gradients backward(const HeadParams& params, const SampleBatch& batch,
                   const LossConfig& cfg, const ClassStats* stats) {
  if (batch.size() == 0) throw std::invalid_argument("backward: empty batch");
  const int L = params.num_layers();
  Gradients grads = Gradients::zeros_like(params);

  // Reused per-sample buffers: activations[l] is the input of layer l,
  // preact[l] its raw output.
  std::vector<std::vector<double>> activations(static_cast<std::size_t>(L) + 1);
  std::vector<std::vector<double>> preact(static_cast<std::size_t>(L));
  std::vector<double> probs;
  std::vector<double> delta;
  std::vector<double> delta_prev;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::span<const double> x = batch.row(i);
    activations[0].assign(x.begin(), x.end());
    for (int l = 0; l < L; ++l) {
      const std::size_t lu = static_cast<std::size_t>(l);
      preact[lu].assign(params.biases[lu].size(), 0.0);
      affine(params.weights[lu], params.biases[lu], activations[lu], preact[lu]);
      check_finite(preact[lu], lu);
      activations[lu + 1] = preact[lu];
      if (l + 1 < L)
        for (double& v : activations[lu + 1]) v = std::max(0.0, v);
    }
    const std::vector<double>& logits = activations[static_cast<std::size_t>(L)];
    probs.assign(logits.size(), 0.0);
    softmax(logits, probs);

    delta.assign(logits.size(), 0.0);
    loss_grad_logits(cfg, probs, logits, batch.labels[i], stats, delta);

    for (int l = L - 1; l >= 0; --l) {
      const std::size_t lu = static_cast<std::size_t>(l);
      const std::vector<double>& in = activations[lu];
      const std::size_t rows = params.biases[lu].size();
      const std::size_t cols = in.size();
      std::vector<double>& gw = grads.weights[lu];
      std::vector<double>& gb = grads.biases[lu];
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = delta[r];
        gb[r] += dr;
        double* gwr = gw.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gwr[c] += dr * in[c];
      }
      if (l > 0) {
        delta_prev.assign(cols, 0.0);
        const std::vector<double>& w = params.weights[lu];
        for (std::size_t r = 0; r < rows; ++r) {
          const double dr = delta[r];
          const double* wr = w.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) delta_prev[c] += dr * wr[c];
        }
        // Rectifier gate on the previous layer's raw output.
        const std::vector<double>& pa = preact[lu - 1];
        for (std::size_t c = 0; c < cols; ++c)
          if (pa[c] <= 0.0) delta_prev[c] = 0.0;
        delta.swap(delta_prev);
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    for (double& g : grads.weights[l]) g *= inv_n;
    for (double& g : grads.biases[l]) g *= inv_n;
  }
  return grads;
}

double grad_check(const HeadParams& params, const SampleBatch& batch,
                  const LossConfig& cfg, const ClassStats* stats, double eps) {
  const Gradients analytic = backward(params, batch, cfg, stats);
  HeadParams probe = params;
  double max_rel = 0.0;
  const auto relerr = [&](double a, double n) {
    return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
  };
  for (std::size_t l = 0; l < probe.weights.size(); ++l) {
    for (std::size_t k = 0; k < probe.weights[l].size(); ++k) {
      const double orig = probe.weights[l][k];
      probe.weights[l][k] = orig + eps;
      const double hi = batch_loss(probe, batch, cfg, stats);
      probe.weights[l][k] = orig - eps;
      const double lo = batch_loss(probe, batch, cfg, stats);
      probe.weights[l][k] = orig;
      max_rel = std::max(max_rel, relerr(analytic.weights[l][k], (hi - lo) / (2 * eps)));
    }
    for (std::size_t k = 0; k < probe.biases[l].size(); ++k) {
      const double orig = probe.biases[l][k];
      probe.biases[l][k] = orig + eps;
      const double hi = batch_loss(probe, batch, cfg, stats);
      probe.biases[l][k] = orig - eps;
      const double lo = batch_loss(probe, batch, cfg, stats);
      probe.biases[l][k] = orig;
      max_rel = std::max(max_rel, relerr(analytic.biases[l][k], (hi - lo) / (2 * eps)));
    }
  }
  return max_rel;
}

OptState OptState::init(const HeadParams& params, double lr) {
  OptState s;
  s.lr = lr;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    s.vel_weights.emplace_back(params.weights[l].size(), 0.0);
    s.vel_biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return s;
}

void sgd_step(HeadParams& params, const Gradients& grads, OptState& state) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.weights[l].size() != params.weights[l].size() ||
        grads.biases[l].size() != params.biases[l].size())
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    for (std::size_t k = 0; k < params.weights[l].size(); ++k) {
      double& v = state.vel_weights[l][k];
      v = state.momentum * v + grads.weights[l][k];
      params.weights[l][k] -= state.lr * v;
    }
    for (std::size_t k = 0; k < params.biases[l].size(); ++k) {
      double& v = state.vel_biases[l][k];
      v = state.momentum * v + grads.biases[l][k];
      params.biases[l][k] -= state.lr * v;
    }
  }
}

}  // namespace ltcal
