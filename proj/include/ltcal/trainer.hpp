#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ltcal/combine.hpp"
#include "ltcal/eval.hpp"
#include "ltcal/head.hpp"
#include "ltcal/sampling.hpp"
#include "ltcal/synth.hpp"

namespace ltcal {

/// Step-decay learning-rate schedule.
struct Schedule {
  std::int64_t total_steps = 4000;
  double lr_init = 0.01;
  std::vector<std::int64_t> decay_steps = {2666, 3666};
  double decay_factor = 0.1;

  void validate() const;
  /// Learning rate at a 1-based step index.
  double lr_at(std::int64_t step) const;
  /// Steps and decay points multiplied by `factor` (floored, kept >= 1).
  Schedule scaled(double factor) const;

  /// Desk-scale standard training: 4000 steps, decays at 2/3 and 11/12.
  static Schedule standard_default();
  /// Calibration: 12000 steps, decays at 8000 and 11000.
  static Schedule calibration_default();
};

struct TrainLogEntry {
  std::int64_t step;
  double lr;
  double loss;
};

struct TrainResult {
  HeadParams params;
  std::vector<TrainLogEntry> log;
};

/// Writes the log as JSON-lines: {"step":...,"lr":...,"loss":...}.
void save_train_log(const std::vector<TrainLogEntry>& log,
                    const std::filesystem::path& path);

enum class HeadInit { k2fcRand, k3fcRand, k3fcFt };
enum class CalibLayers { kLast, kLast2, kAll };

std::string to_string(HeadInit h);
HeadInit head_init_from_string(const std::string& s);
std::string to_string(CalibLayers l);
CalibLayers calib_layers_from_string(const std::string& s);

struct CalibConfig {
  HeadInit head_init = HeadInit::k3fcFt;
  CalibLayers layers = CalibLayers::kAll;
  LossConfig loss;                 // kind=ce reproduces the calibration loss
  Schedule schedule = Schedule::calibration_default();
  SamplerConfig sampler;
  int rand_hidden = 64;            // hidden width for the _rand head choices
  bool use_bilevel = true;         // loss-only variants run with this off
  int random_proposal_batch = 128; // batch size when bi-level sampling is off

  void validate() const;
};

/// Standard head training: plain cross-entropy over all proposals of
/// uniformly shuffled image batches. Returns the biased "original" head.
TrainResult train_standard(const SynthDataset& dataset, const std::vector<int>& head_dims,
                           const Schedule& schedule, int batch_images, Rng rng);

using SnapshotFn = std::function<void(std::int64_t step, const HeadParams& params)>;

/// Decoupled calibration: only the selected tail of layers is updated; the
/// per-batch loss is the arithmetic mean of per-proposal cross entropy over
/// the sampled classes plus background. `snapshot_steps` (sorted) invokes
/// `on_snapshot` when those step counts complete.
TrainResult calibrate(const SynthDataset& dataset, const HeadParams& original_head,
                      const CalibConfig& cfg, Rng rng,
                      const std::vector<std::int64_t>& snapshot_steps = {},
                      const SnapshotFn& on_snapshot = {});

/// Calibration with one of the adapted long-tail losses. Unless
/// cfg.use_bilevel is set, batches are plain uniform proposal draws so the
/// loss change is isolated from the sampling change.
TrainResult calibrate_with_alternative(const SynthDataset& dataset,
                                       const HeadParams& original_head, LossKind alt_loss,
                                       const CalibConfig& cfg, Rng rng);

/// Per-proposal probability vectors for a whole dataset, ids = indices.
PredictionSet predict_dataset(const HeadParams& params, const SynthDataset& dataset);

/// Ground-truth-label predictions: one-hot on each proposal's assigned label.
PredictionSet props_gt_predictions(const SynthDataset& dataset);

/// Upper bound of classification-driven performance: evaluation of the
/// ground-truth one-hot predictions.
EvalReport props_gt_oracle(const SynthDataset& eval_dataset, const ClassStats& train_stats,
                           const BinScheme& instance_bins, const BinScheme& image_sets);

/// Fraction of proposals whose argmax prediction equals the assigned label.
double accuracy(const HeadParams& params, const SynthDataset& dataset);

enum class SweepKind { kCalSteps, kLr, kBoundaryT, kLayers, kHeadInit };

std::string to_string(SweepKind k);
SweepKind sweep_kind_from_string(const std::string& s);

struct SweepContext {
  const SynthDataset* train = nullptr;
  const SynthDataset* val = nullptr;
  const HeadParams* original = nullptr;
  CalibConfig calib;
  CombineConfig combine;
  BinScheme instance_bins = BinScheme::instance_bins();
  BinScheme image_sets = BinScheme::image_sets();
  std::uint64_t seed = 0;
};

/// One CSV row of bin metrics per grid point; failing points are marked
/// failed and the sweep continues.
std::string sweep(SweepKind kind, const std::vector<std::string>& grid,
                  const SweepContext& ctx);

}  // namespace ltcal
