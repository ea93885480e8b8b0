#include "doctest.h"

#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ltcal/rng.hpp"
#include "ltcal/types.hpp"

using namespace ltcal;

namespace {

ClassStats make_stats(std::vector<std::int64_t> instances,
                      std::vector<std::int64_t> images) {
  ClassStats s;
  s.instance_counts = std::move(instances);
  s.image_counts = std::move(images);
  s.validate();
  return s;
}

}  // namespace

TEST_CASE("ClassStats validation") {
  CHECK_NOTHROW(make_stats({0, 5}, {0, 3}));
  CHECK_THROWS_AS(make_stats({1, 2}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(make_stats({-1}, {0}), std::invalid_argument);
  // instances without any image is inconsistent
  CHECK_THROWS_AS(make_stats({3}, {0}), std::invalid_argument);
}

TEST_CASE("instance bins and image sets follow the published edges") {
  // class with 219 instances but few images: mid instance bin, rare image set
  const ClassStats s = make_stats({219, 117, 0}, {9, 150, 0});
  const BinScheme inst = BinScheme::instance_bins();
  const BinScheme sets = BinScheme::image_sets();

  CHECK(assign_bin(1, s, inst) == 2);  // [100,1000)
  CHECK(assign_bin(1, s, sets) == 0);  // rare (<10 images)
  CHECK(assign_bin(2, s, inst) == 2);  // 117 instances -> [100,1000)
  CHECK(assign_bin(2, s, sets) == 2);  // frequent (>=100 images)
  CHECK(assign_bin(3, s, inst) == 0);  // zero instances -> lowest bin
}

TEST_CASE("assign_bin rejects unknown classes") {
  const ClassStats s = make_stats({5}, {2});
  CHECK_THROWS_WITH_AS(assign_bin(0, s, BinScheme::instance_bins()),
                       "unknown class 0", std::invalid_argument);
  CHECK_THROWS_AS(assign_bin(2, s, BinScheme::instance_bins()), std::invalid_argument);
}

TEST_CASE("bin assignment partitions the classes and is monotone") {
  Rng rng(123);
  const BinScheme inst = BinScheme::instance_bins();
  for (int trial = 0; trial < 50; ++trial) {
    const int C = 1 + static_cast<int>(rng.below(40));
    std::vector<std::int64_t> counts;
    std::vector<std::int64_t> images;
    for (int j = 0; j < C; ++j) {
      const std::int64_t n = static_cast<std::int64_t>(rng.below(5000));
      counts.push_back(n);
      images.push_back(n > 0 ? 1 + static_cast<std::int64_t>(rng.below(200)) : 0);
    }
    const ClassStats s = make_stats(counts, images);
    std::vector<int> population(static_cast<std::size_t>(inst.num_bins()), 0);
    for (int c = 1; c <= C; ++c) {
      const int b = assign_bin(c, s, inst);
      REQUIRE(b >= 0);
      REQUIRE(b < inst.num_bins());
      ++population[static_cast<std::size_t>(b)];
    }
    int total = 0;
    for (const int p : population) total += p;
    CHECK(total == C);  // exactly one bin per class

    // monotone: growing a count never lowers the bin
    for (int c = 1; c <= C; ++c) {
      ClassStats grown = s;
      grown.instance_counts[static_cast<std::size_t>(c - 1)] += 1 + rng.below(2000);
      if (grown.image_counts[static_cast<std::size_t>(c - 1)] == 0)
        grown.image_counts[static_cast<std::size_t>(c - 1)] = 1;
      CHECK(assign_bin(c, grown, inst) >= assign_bin(c, s, inst));
    }
  }
}

TEST_CASE("match_proposal boundary is inclusive") {
  ProposalRecord p;
  p.features = {0.0, 0.0};
  p.gt_class = 7;
  p.gt_slot = 0;

  p.iou_with_gt = 0.5;
  CHECK(match_proposal(p, 0.5).assigned_label == 7);
  p.iou_with_gt = 0.49;
  CHECK(match_proposal(p, 0.5).assigned_label == 0);
}

TEST_CASE("match_proposal handles a high-IoU proposal without ground truth") {
  ProposalRecord p;
  p.features = {0.0};
  p.iou_with_gt = 1.0;
  p.gt_class = 0;
  p.gt_slot = -1;
  const ProposalRecord out = match_proposal(p, 0.5);
  CHECK(out.assigned_label == 0);
}

TEST_CASE("match_proposal is idempotent and total") {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    ProposalRecord p;
    p.features = {rng.normal()};
    p.iou_with_gt = rng.uniform01();
    p.gt_class = rng.bernoulli(0.7) ? 1 + static_cast<int>(rng.below(10)) : 0;
    p.gt_slot = p.gt_class > 0 ? 0 : -1;
    const ProposalRecord once = match_proposal(p, 0.5);
    const ProposalRecord twice = match_proposal(once, 0.5);
    CHECK(once.assigned_label == twice.assigned_label);
    if (once.assigned_label > 0) CHECK(once.assigned_label == once.gt_class);
  }
  CHECK_THROWS_AS(match_proposal(ProposalRecord{}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(match_proposal(ProposalRecord{}, 1.0), std::invalid_argument);
}

TEST_CASE("ClassStats JSON round-trip") {
  const ClassStats s = make_stats({10, 0, 3}, {4, 0, 3});
  const ClassStats back = ClassStats::from_json(s.to_json());
  CHECK(back.instance_counts == s.instance_counts);
  CHECK(back.image_counts == s.image_counts);
}

TEST_CASE("PredictionVector validation") {
  PredictionVector p;
  p.scores = {0.25, 0.25, 0.5};
  CHECK_NOTHROW(p.validate(true));
  p.scores = {0.5, 0.6};
  CHECK_THROWS_AS(p.validate(true), std::invalid_argument);
  p.scores = {0.5, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK(PredictionVector::one_hot(2, 3).scores == std::vector<double>{0, 0, 1, 0});
}
