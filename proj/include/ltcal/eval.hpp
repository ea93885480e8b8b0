#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ltcal/synth.hpp"
#include "ltcal/types.hpp"

namespace ltcal {

/// Scored predictions for an evaluation set, keyed by proposal id (the
/// proposal's index in its dataset).
struct PredictionSet {
  std::vector<std::int64_t> proposal_ids;
  std::vector<PredictionVector> predictions;

  std::size_t size() const { return proposal_ids.size(); }

  nlohmann::json to_json() const;
  static PredictionSet from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static PredictionSet load(const std::filesystem::path& path);
};

/// Per-class average precision plus bin- and set-aggregated means.
/// A class is evaluable when it has at least one training instance and at
/// least one positive proposal in the evaluation set; only evaluable classes
/// enter the averages.
struct EvalReport {
  std::vector<double> per_class_ap;   // NaN for non-evaluable classes
  std::vector<bool> evaluable;
  std::vector<double> ap_bins;        // mean AP per instance-count bin
  std::vector<std::int64_t> bin_counts;
  std::vector<double> ap_sets;        // mean AP per image-count set (rare/common/frequent)
  std::vector<std::int64_t> set_counts;
  double overall_ap = 0.0;
  int evaluable_count = 0;
  int unseen_count = 0;               // classes with zero training instances
  std::vector<std::int64_t> bin_edges;
  std::vector<std::int64_t> set_edges;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static EvalReport load(const std::filesystem::path& path);

  /// Fixed columns: ap1..ap4, ap_r, ap_c, ap_f, ap (values on [0,1]).
  static std::string csv_header(const std::string& meta_columns = "run,seed");
  std::string csv_row(const std::string& meta_values) const;
};

/// Ranking AP for class c: proposals ordered by score[c] descending, ties
/// broken by ascending proposal id; a proposal is a true positive iff its
/// assigned label equals c; area under the precision-recall curve with the
/// precision envelope (all-point interpolation).
/// Returns NaN when the class has no positive proposals.
double per_class_ap(const PredictionSet& preds, const std::vector<int>& labels, int c);

/// Full evaluation: per-class AP on the eval dataset, aggregated into bins
/// and sets assigned from the TRAINING statistics.
EvalReport evaluate(const PredictionSet& preds, const SynthDataset& eval_dataset,
                    const ClassStats& train_stats, const BinScheme& instance_bins,
                    const BinScheme& image_sets);

/// Signed deltas (b - a) per bin/set/overall plus ordering verdicts.
nlohmann::json compare(const EvalReport& a, const EvalReport& b);

}  // namespace ltcal
