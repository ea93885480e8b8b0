#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "ltcal/sampling.hpp"

using namespace ltcal;

namespace {

SynthDataset balanced_dataset(int num_classes, std::int64_t per_class, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_classes = num_classes;
  cfg.feature_dim = 4;
  cfg.law = FrequencyLaw::kExplicit;
  cfg.explicit_counts.assign(static_cast<std::size_t>(num_classes), per_class);
  cfg.background_per_image_min = 4;
  cfg.background_per_image_max = 8;
  cfg.seed = seed;
  return generate(cfg);
}

}  // namespace

TEST_CASE("epoch partition: 10 images in batches of 8 gives sizes [8,2]") {
  Rng rng(1);
  RandomImageBatcher batcher(10, 8, rng);
  CHECK(batcher.next_batch().size() == 8);
  CHECK(batcher.next_batch().size() == 2);
  CHECK(batcher.next_batch().size() == 8);  // next epoch starts
}

TEST_CASE("consecutive epochs use different permutations") {
  Rng rng(2);
  RandomImageBatcher batcher(32, 32, rng);
  const std::vector<std::size_t> e1 = batcher.next_batch();
  const std::vector<std::size_t> e2 = batcher.next_batch();
  CHECK(e1 != e2);
  std::vector<std::size_t> s1 = e1, s2 = e2;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  CHECK(s1 == s2);  // same multiset, each image once per epoch
}

TEST_CASE("every image appears exactly once per epoch over 100 epochs") {
  Rng rng(3);
  const std::size_t n = 10;
  RandomImageBatcher batcher(n, 3, rng);
  std::map<std::size_t, int> appearances;
  for (int epoch = 0; epoch < 100; ++epoch) {
    std::size_t seen = 0;
    while (seen < n) {
      for (const std::size_t i : batcher.next_batch()) {
        appearances[i] += 1;
        ++seen;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(appearances[i] == 100);
}

TEST_CASE("empty dataset is rejected") {
  Rng rng(4);
  CHECK_THROWS(RandomImageBatcher(0, 8, rng));
}

TEST_CASE("repeat factor boundary cases") {
  const double t = 0.001;
  CHECK(repeat_factor(t, t) == 1.0);
  CHECK(repeat_factor(t / 4.0, t) == 2.0);  // sqrt(4) exactly
  CHECK(repeat_factor(0.9, t) == 1.0);      // above threshold, never upweighted
  // exponent knob
  CHECK(repeat_factor(t / 4.0, t, 1.0) == doctest::Approx(4.0));
}

TEST_CASE("image repeat factor is the max over its classes") {
  ImageRecord img;
  img.instances = {1, 2};
  const std::vector<double> freq{0.5, 0.0025};
  CHECK(image_repeat_factor(img, freq, 0.01) == doctest::Approx(2.0));
  // an image with only frequent classes is never oversampled
  img.instances = {1};
  CHECK(image_repeat_factor(img, freq, 0.01) == 1.0);
}

TEST_CASE("repeat-factor batcher degenerates to plain epochs when t is small") {
  const SynthDataset ds = balanced_dataset(6, 30, 11);
  SamplerConfig cfg;
  cfg.repeat_threshold = 1e-6;  // below every class frequency
  RepeatFactorBatcher batcher(ds, cfg, Rng(5));
  CHECK(batcher.expected_epoch_inflation() == 0.0);
  CHECK(batcher.last_epoch_inflation() == 0);
  for (const double r : batcher.image_factors()) CHECK(r == 1.0);
}

TEST_CASE("repeat-factor batcher inflates epochs when tail classes exist") {
  SynthConfig cfg;
  cfg.num_classes = 10;
  cfg.feature_dim = 4;
  cfg.law = FrequencyLaw::kExplicit;
  cfg.explicit_counts = {400, 400, 400, 400, 400, 2, 2, 2, 2, 2};
  cfg.seed = 12;
  const SynthDataset ds = generate(cfg);
  SamplerConfig scfg;
  scfg.repeat_threshold = 0.05;  // tail classes fall below 5% image frequency
  RepeatFactorBatcher batcher(ds, scfg, Rng(6));
  CHECK(batcher.expected_epoch_inflation() > 0.0);
}

TEST_CASE("bilevel batches obey label membership and the fg:bg ratio") {
  const SynthDataset ds = balanced_dataset(12, 25, 13);
  SamplerConfig cfg;
  cfg.classes_per_batch = 4;
  cfg.seed = 99;
  BilevelSampler sampler(ds, cfg);
  for (int b = 0; b < 200; ++b) {
    const CalBatch batch = sampler.next_batch();
    REQUIRE(!batch.sampled_classes.empty());
    const std::set<int> sampled(batch.sampled_classes.begin(), batch.sampled_classes.end());
    for (std::size_t g = 0; g < batch.class_groups.size(); ++g)
      for (const std::size_t p : batch.class_groups[g]) {
        CHECK(ds.proposals[p].assigned_label == batch.sampled_classes[g]);
        CHECK(sampled.count(ds.proposals[p].assigned_label) == 1);
      }
    for (const std::size_t p : batch.background_group)
      CHECK(ds.proposals[p].assigned_label == 0);
    const auto fg = static_cast<std::int64_t>(batch.foreground_count());
    const auto bg = static_cast<std::int64_t>(batch.background_group.size());
    CHECK(std::llabs(fg - bg) <= 1);
  }
}

TEST_CASE("bilevel respects a 1:3 ratio") {
  const SynthDataset ds = balanced_dataset(8, 30, 14);
  SamplerConfig cfg;
  cfg.classes_per_batch = 3;
  cfg.bg_parts = 3;
  cfg.seed = 7;
  BilevelSampler sampler(ds, cfg);
  const CalBatch batch = sampler.next_batch();
  const double expect = std::llround(3.0 * static_cast<double>(batch.foreground_count()));
  CHECK(static_cast<double>(batch.background_group.size()) == expect);
}

TEST_CASE("a class living in one image is always drawn from that image") {
  SynthConfig cfg;
  cfg.num_classes = 5;
  cfg.feature_dim = 4;
  cfg.law = FrequencyLaw::kExplicit;
  cfg.explicit_counts = {40, 40, 40, 40, 1};
  cfg.iou_beta_a = 50.0;  // IoU mass near 1 so the single instance is matched
  cfg.iou_beta_b = 1.0;
  cfg.seed = 15;
  const SynthDataset ds = generate(cfg);
  REQUIRE(ds.stats.image_counts[4] == 1);

  SamplerConfig scfg;
  scfg.classes_per_batch = 5;
  scfg.seed = 16;
  BilevelSampler sampler(ds, scfg);
  for (int b = 0; b < 50; ++b) {
    const CalBatch batch = sampler.next_batch();
    for (std::size_t g = 0; g < batch.sampled_classes.size(); ++g)
      if (batch.sampled_classes[g] == 5) CHECK(!batch.class_groups[g].empty());
  }
}

TEST_CASE("bilevel class-selection marginal is uniform (chi-square)") {
  const SynthDataset ds = balanced_dataset(25, 20, 17);
  SamplerConfig cfg;
  cfg.classes_per_batch = 5;
  cfg.seed = 18;
  BilevelSampler sampler(ds, cfg);
  std::vector<int> hits(26, 0);
  const int batches = 4000;
  for (int b = 0; b < batches; ++b)
    for (const int c : sampler.next_batch().sampled_classes)
      hits[static_cast<std::size_t>(c)] += 1;
  const double expect = batches * 5.0 / 25.0;
  double chi2 = 0.0;
  for (int c = 1; c <= 25; ++c) {
    const double d = hits[static_cast<std::size_t>(c)] - expect;
    chi2 += d * d / expect;
  }
  // critical value of chi-square with 24 degrees of freedom at 0.01
  CHECK(chi2 < 42.9798);
}

TEST_CASE("sampler state serializes seed and position") {
  const SynthDataset ds = balanced_dataset(6, 20, 19);
  SamplerConfig cfg;
  cfg.classes_per_batch = 2;
  cfg.seed = 20;
  BilevelSampler sampler(ds, cfg);
  sampler.next_batch();
  sampler.next_batch();
  CHECK(sampler.state_to_json().at("batches_emitted").get<int>() == 2);
  CHECK(sampler.state_to_json().at("seed").get<std::uint64_t>() == 20);
}
