#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ltcal {

/// Background is class 0 everywhere; foreground classes are 1..C.
inline constexpr int kBackgroundClass = 0;

/// Proposal-to-ground-truth matching threshold used at dataset build time.
inline constexpr double kDefaultMatchIou = 0.5;

/// Per-class training statistics. instance_counts[j-1] is the number of
/// training instances of foreground class j; image_counts[j-1] the number of
/// training images containing at least one such instance.
struct ClassStats {
  std::vector<std::int64_t> instance_counts;
  std::vector<std::int64_t> image_counts;

  int num_classes() const { return static_cast<int>(instance_counts.size()); }
  std::int64_t instances(int class_id) const;
  std::int64_t images(int class_id) const;

  /// Throws std::invalid_argument on length mismatch, negative entries, or an
  /// instance-bearing class with zero images.
  void validate() const;

  nlohmann::json to_json() const;
  static ClassStats from_json(const nlohmann::json& j);
};

enum class BinBasis { kInstances, kImages };

/// Partition of classes by count. `edges` are strictly increasing thresholds;
/// bin b covers [edges[b-1], edges[b]) with the first bin starting at 0 and
/// the last bin unbounded.
struct BinScheme {
  std::vector<std::int64_t> edges;
  BinBasis basis = BinBasis::kInstances;

  int num_bins() const { return static_cast<int>(edges.size()) + 1; }
  void validate() const;

  /// Instance-count bins <10, 10-100, 100-1000, >=1000.
  static BinScheme instance_bins();
  /// Image-count sets rare (<10), common (10-100), frequent (>=100).
  static BinScheme image_sets();
};

/// Bin index in [0, num_bins) for the class's count under the scheme's basis.
/// Throws std::invalid_argument("unknown class ...") for an invalid class id.
int assign_bin(int class_id, const ClassStats& stats, const BinScheme& scheme);

/// (C+1)-dimensional per-proposal class scores, index 0 = background.
struct PredictionVector {
  std::vector<double> scores;

  int size() const { return static_cast<int>(scores.size()); }
  double operator[](int z) const { return scores[static_cast<std::size_t>(z)]; }

  /// All entries finite. If `softmax` also checks entries in [0,1] summing
  /// to 1 within 1e-9.
  void validate(bool softmax = false) const;

  static PredictionVector one_hot(int label, int num_classes);
};

/// A candidate region reduced to its classification payload: a fixed feature
/// vector plus a synthesized overlap with its best ground-truth instance.
struct ProposalRecord {
  std::int64_t image_id = 0;
  std::vector<double> features;
  double iou_with_gt = 0.0;
  int gt_class = 0;   // 0 = no overlapping instance, else 1..C
  int gt_slot = -1;   // index of the spawning instance within its image, -1 if none
  int assigned_label = 0;  // 0..C, set by match_proposal
};

/// Sets assigned_label = gt_class when iou_with_gt >= iou_threshold (inclusive
/// boundary), background otherwise. Total and idempotent. A high-IoU proposal
/// with no ground-truth class is labeled background with a warning.
ProposalRecord match_proposal(ProposalRecord proposal, double iou_threshold);

}  // namespace ltcal
