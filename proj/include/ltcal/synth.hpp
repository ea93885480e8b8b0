#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ltcal/types.hpp"

namespace ltcal {

enum class FrequencyLaw { kPowerLaw, kExponential, kExplicit };

std::string to_string(FrequencyLaw law);
FrequencyLaw frequency_law_from_string(const std::string& s);

/// Generator settings for a synthetic long-tail dataset: per-class instance
/// counts follow the chosen law, every instance carries one feature-vector
/// proposal near its class prototype, and each image adds a band of
/// background proposals around the origin.
struct SynthConfig {
  int num_classes = 60;
  int feature_dim = 16;
  FrequencyLaw law = FrequencyLaw::kPowerLaw;
  double powerlaw_alpha = 1.6873;   // head/tail ratio = C^alpha
  double exponential_beta = 0.12;
  std::vector<std::int64_t> explicit_counts;
  std::int64_t max_instances_per_head_class = 4000;
  int instances_per_image_min = 1;
  int instances_per_image_max = 6;
  double prototype_spread = 1.0;    // pairwise prototype distance scale
  double within_class_noise = 0.5;  // per-coordinate feature noise
  double iou_beta_a = 5.0;          // Beta-shaped IoU draw for instance proposals
  double iou_beta_b = 2.0;
  int background_per_image_min = 8;
  int background_per_image_max = 16;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct ImageRecord {
  std::int64_t id = 0;
  std::vector<int> instances;  // foreground class ids, one entry per instance
};

/// Frozen-backbone surrogate: images with instances, IoU-annotated proposals
/// carrying fixed feature vectors, and the class prototypes that generated
/// them.
struct SynthDataset {
  SynthConfig config;
  ClassStats stats;
  std::vector<ImageRecord> images;
  std::vector<ProposalRecord> proposals;
  std::vector<std::vector<double>> prototypes;

  /// Internal-consistency invariants: stats match the images, every proposal
  /// points at an existing image, every foreground proposal's class appears
  /// among its image's instances. Throws on violation.
  void validate() const;

  nlohmann::json to_json() const;
  static SynthDataset from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SynthDataset load(const std::filesystem::path& path);
};

/// Closed-form per-class instance counts for the config's frequency law.
std::vector<std::int64_t> law_counts(const SynthConfig& config);

/// Deterministic generation; a pure function of the config including seed.
SynthDataset generate(const SynthConfig& config);

/// Dataset with the SAME prototypes and feature geometry as `base` but
/// explicit per-class counts and an independent seed. Used to draw held-out
/// evaluation sets for a training dataset.
SynthDataset generate_like(const SynthDataset& base,
                           const std::vector<std::int64_t>& counts,
                           std::uint64_t seed);

/// Long-tail subsample: classes split into `num_subsets` index-contiguous
/// groups; group 1 is untouched, group i keeps min(n_i, available) instances
/// with n_i drawn uniformly from the open interval
/// (8*10^(4-i), 8*10^(5-i)) scaled by max_class_count / 8e4.
SynthDataset subsample_coco_lt(const SynthDataset& dataset, int num_subsets,
                               std::uint64_t seed);

/// Per-class counts, bin populations and the sorted (non-increasing) count
/// curve, as JSON.
nlohmann::json summarize(const SynthDataset& dataset);

}  // namespace ltcal
