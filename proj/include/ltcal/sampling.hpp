#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ltcal/rng.hpp"
#include "ltcal/synth.hpp"

namespace ltcal {

struct SamplerConfig {
  int classes_per_batch = 16;   // classes sampled per calibration batch
  int images_per_class = 1;
  int fg_parts = 1;             // foreground share of the fg:bg ratio
  int bg_parts = 1;
  double repeat_threshold = 0.001;
  double repeat_exponent = 0.5;  // r(c) = max(1, (t/f(c))^exponent)
  int random_batch_images = 8;
  std::uint64_t seed = 0;
  bool sample_with_replacement = false;  // classes within one batch

  void validate() const;
};

/// One calibration batch: the sampled classes, one proposal-index group per
/// sampled class, and a background group sized by the fg:bg ratio. Indices
/// point into the dataset's proposal vector.
struct CalBatch {
  std::vector<int> sampled_classes;
  std::vector<std::vector<std::size_t>> class_groups;  // aligned with sampled_classes
  std::vector<std::size_t> background_group;

  std::size_t foreground_count() const;
  std::size_t total_count() const { return foreground_count() + background_group.size(); }
};

/// Epoch-at-a-time uniform image batching: every epoch is a fresh shuffle of
/// all image indices partitioned into batches of `batch_images` (last batch
/// may be short). Every image appears exactly once per epoch.
class RandomImageBatcher {
 public:
  RandomImageBatcher(std::size_t num_images, int batch_images, Rng rng);

  std::vector<std::size_t> next_batch();
  std::int64_t epochs_completed() const { return epochs_; }

  nlohmann::json state_to_json() const;

 private:
  void reshuffle();

  std::size_t num_images_;
  int batch_images_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::int64_t epochs_ = 0;
  std::int64_t batches_emitted_ = 0;
};

/// Per-class repeat factor r(c) = max(1, (t / f)^exponent) for a class seen in
/// fraction f of training images.
double repeat_factor(double class_image_frequency, double t, double exponent = 0.5);

/// r(I) = max over the image's classes of r(c); classes absent from every
/// image are skipped. Empty images get 1.
double image_repeat_factor(const ImageRecord& image, const std::vector<double>& class_freq,
                           double t, double exponent = 0.5);

/// Image-level repeat-factor oversampling: each epoch realizes every image
/// floor(r(I)) times plus one more with probability frac(r(I)), then shuffles
/// and partitions into batches.
class RepeatFactorBatcher {
 public:
  RepeatFactorBatcher(const SynthDataset& dataset, const SamplerConfig& cfg, Rng rng);

  std::vector<std::size_t> next_batch();

  /// Sum over images of (r(I) - 1); zero iff no class is below threshold.
  double expected_epoch_inflation() const { return expected_inflation_; }
  /// Realized repeats minus image count for the most recent epoch.
  std::int64_t last_epoch_inflation() const { return last_inflation_; }
  const std::vector<double>& image_factors() const { return factors_; }

 private:
  void new_epoch();

  const SynthDataset* dataset_;
  int batch_images_;
  Rng rng_;
  std::vector<double> factors_;
  double expected_inflation_ = 0.0;
  std::int64_t last_inflation_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Bi-level class-balanced sampling: classes drawn uniformly, then images per
/// class, then only proposals labeled with a sampled class are kept plus a
/// ratio-matched background draw from the same images.
class BilevelSampler {
 public:
  BilevelSampler(const SynthDataset& dataset, SamplerConfig cfg);

  CalBatch next_batch();

  const std::vector<int>& sampleable_classes() const { return sampleable_; }
  std::int64_t batches_emitted() const { return batches_emitted_; }

  nlohmann::json state_to_json() const;

 private:
  const SynthDataset* dataset_;
  SamplerConfig cfg_;
  Rng rng_;
  std::vector<int> sampleable_;
  std::vector<std::vector<std::size_t>> images_of_class_;  // image indices per class id
  std::vector<std::vector<std::size_t>> fg_by_image_;      // fg proposal indices per image
  std::vector<std::vector<std::size_t>> bg_by_image_;
  std::int64_t batches_emitted_ = 0;
};

}  // namespace ltcal
