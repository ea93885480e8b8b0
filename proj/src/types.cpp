#include "ltcal/types.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ltcal/log.hpp"

namespace ltcal {

std::int64_t ClassStats::instances(int class_id) const {
  if (class_id < 1 || class_id > num_classes())
    throw std::invalid_argument("unknown class " + std::to_string(class_id));
  return instance_counts[static_cast<std::size_t>(class_id - 1)];
}

std::int64_t ClassStats::images(int class_id) const {
  if (class_id < 1 || class_id > num_classes())
    throw std::invalid_argument("unknown class " + std::to_string(class_id));
  return image_counts[static_cast<std::size_t>(class_id - 1)];
}

void ClassStats::validate() const {
  if (instance_counts.empty())
    throw std::invalid_argument("ClassStats: no classes");
  if (instance_counts.size() != image_counts.size())
    throw std::invalid_argument("ClassStats: count sequences differ in length");
  for (std::size_t i = 0; i < instance_counts.size(); ++i) {
    if (instance_counts[i] < 0 || image_counts[i] < 0)
      throw std::invalid_argument("ClassStats: negative count");
    if (instance_counts[i] >= 1 && image_counts[i] < 1)
      throw std::invalid_argument(
          "ClassStats: class " + std::to_string(i + 1) +
          " has instances but zero images");
  }
}

nlohmann::json ClassStats::to_json() const {
  return nlohmann::json{{"instance_counts", instance_counts},
                        {"image_counts", image_counts}};
}

ClassStats ClassStats::from_json(const nlohmann::json& j) {
  ClassStats s;
  s.instance_counts = j.at("instance_counts").get<std::vector<std::int64_t>>();
  s.image_counts = j.at("image_counts").get<std::vector<std::int64_t>>();
  s.validate();
  return s;
}

void BinScheme::validate() const {
  if (edges.empty()) throw std::invalid_argument("BinScheme: no edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (edges[i] >= edges[i + 1])
      throw std::invalid_argument("BinScheme: edges must be strictly increasing");
  if (edges.front() <= 0)
    throw std::invalid_argument("BinScheme: edges must be positive");
}

BinScheme BinScheme::instance_bins() {
  return BinScheme{{10, 100, 1000}, BinBasis::kInstances};
}

BinScheme BinScheme::image_sets() {
  return BinScheme{{10, 100}, BinBasis::kImages};
}

int assign_bin(int class_id, const ClassStats& stats, const BinScheme& scheme) {
  scheme.validate();
  const std::int64_t count = scheme.basis == BinBasis::kInstances
                                 ? stats.instances(class_id)
                                 : stats.images(class_id);
  int bin = 0;
  while (bin < static_cast<int>(scheme.edges.size()) &&
         count >= scheme.edges[static_cast<std::size_t>(bin)])
    ++bin;
  return bin;
}

void PredictionVector::validate(bool softmax) const {
  if (scores.empty()) throw std::invalid_argument("PredictionVector: empty");
  double sum = 0.0;
  for (const double s : scores) {
    if (!std::isfinite(s))
      throw std::invalid_argument("PredictionVector: non-finite score");
    sum += s;
  }
  if (softmax) {
    for (const double s : scores)
      if (s < -1e-12 || s > 1.0 + 1e-12)
        throw std::invalid_argument("PredictionVector: score outside [0,1]");
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("PredictionVector: softmax scores do not sum to 1");
  }
}

PredictionVector PredictionVector::one_hot(int label, int num_classes) {
  PredictionVector p;
  p.scores.assign(static_cast<std::size_t>(num_classes) + 1, 0.0);
  p.scores.at(static_cast<std::size_t>(label)) = 1.0;
  return p;
}

ProposalRecord match_proposal(ProposalRecord proposal, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    throw std::invalid_argument("match_proposal: iou_threshold must be in (0,1)");
  if (proposal.iou_with_gt >= iou_threshold) {
    if (proposal.gt_class > 0) {
      proposal.assigned_label = proposal.gt_class;
    } else {
      warn("match_proposal: proposal over threshold with no ground-truth class; labeling background");
      proposal.assigned_label = kBackgroundClass;
    }
  } else {
    proposal.assigned_label = kBackgroundClass;
  }
  return proposal;
}

}  // namespace ltcal
