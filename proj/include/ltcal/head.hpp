#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ltcal/rng.hpp"
#include "ltcal/types.hpp"

namespace ltcal {

/// Fully-connected classification head: L linear layers with rectifier
/// activations between them, mapping feature vectors to C+1 logits
/// (index 0 = background).
struct HeadParams {
  std::vector<int> dims;  // {in, hidden..., C+1}; weights[l] is dims[l+1] x dims[l]
  std::vector<std::vector<double>> weights;  // row-major
  std::vector<std::vector<double>> biases;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  std::size_t param_count() const;

  void validate() const;

  /// He-normal weights, zero biases.
  static HeadParams random_init(const std::vector<int>& dims, Rng& rng);

  nlohmann::json to_json() const;
  static HeadParams from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static HeadParams load(const std::filesystem::path& path);
};

enum class LossKind { kCrossEntropy, kReweight, kFocal, kMargin };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

struct LossConfig {
  LossKind kind = LossKind::kCrossEntropy;
  double reweight_numerator = 100.0;  // numerator of the inverse-frequency weight
  double weight_clamp_lo = 0.1;
  double weight_clamp_hi = 10.0;
  double background_weight = 1.0;
  double gamma = 3.0;       // focal exponent
  double focal_alpha = 1.0; // optional scalar on foreground focal terms; 1 disables
  double margin_c = 6.0;    // margin numerator, delta_j = margin_c / N_j^(1/4)

  void validate() const;
};

/// Guard inside log() for vanishing probabilities.
inline constexpr double kLogEps = 1e-12;

/// A batch of labeled feature vectors, row-major.
struct SampleBatch {
  int feature_dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  void add(std::span<const double> f, int label);
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
};

/// Numerically stable softmax (max-logit subtraction).
void softmax(std::span<const double> logits, std::span<double> probs_out);

/// Single-sample forward pass. probs = softmax(logits).
void forward(const HeadParams& params, std::span<const double> features,
             std::vector<double>& logits_out, std::vector<double>& probs_out);

/// Convenience wrapper returning just the probability vector.
PredictionVector predict(const HeadParams& params, std::span<const double> features);

// Per-sample losses. `probs` are softmax outputs; `logits` raw scores.
double loss_ce(const std::vector<double>& probs, int label);
double reweight_weight(int label, const ClassStats& stats, const LossConfig& cfg);
double loss_reweight(const std::vector<double>& probs, int label,
                     const ClassStats& stats, const LossConfig& cfg);
double loss_focal(const std::vector<double>& probs, int label, double gamma);
double margin_delta(int label, const ClassStats& stats, double margin_c);
double loss_margin(const std::vector<double>& logits, int label,
                   const ClassStats& stats, double margin_c);

/// Dispatch on cfg.kind. `stats` may be null for ce/focal.
double sample_loss(const LossConfig& cfg, const std::vector<double>& probs,
                   const std::vector<double>& logits, int label,
                   const ClassStats* stats);

/// d(sample loss)/d(logits), written into `out`.
void loss_grad_logits(const LossConfig& cfg, const std::vector<double>& probs,
                      const std::vector<double>& logits, int label,
                      const ClassStats* stats, std::span<double> out);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  static Gradients zeros_like(const HeadParams& params);
};

/// Mean per-sample loss over the batch.
double batch_loss(const HeadParams& params, const SampleBatch& batch,
                  const LossConfig& cfg, const ClassStats* stats);

/// Gradients of the mean per-sample loss w.r.t. every parameter.
/// Throws std::runtime_error naming the layer on a non-finite intermediate.
Gradients backward(const HeadParams& params, const SampleBatch& batch,
                   const LossConfig& cfg, const ClassStats* stats);

/// Central finite differences against backward(); returns the max over
/// parameters of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const HeadParams& params, const SampleBatch& batch,
                  const LossConfig& cfg, const ClassStats* stats,
                  double eps = 1e-5);

/// SGD with classic momentum: v <- momentum*v + g; theta <- theta - lr*v.
struct OptState {
  double lr = 0.01;
  double momentum = 0.9;
  std::vector<std::vector<double>> vel_weights;
  std::vector<std::vector<double>> vel_biases;

  static OptState init(const HeadParams& params, double lr);
};

void sgd_step(HeadParams& params, const Gradients& grads, OptState& state);

}  // namespace ltcal
