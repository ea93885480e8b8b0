#include "ltcal/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ltcal/log.hpp"

namespace ltcal {

void SamplerConfig::validate() const {
  if (classes_per_batch < 1 || images_per_class < 1 || random_batch_images < 1)
    throw std::invalid_argument("SamplerConfig: counts must be positive");
  if (fg_parts < 1 || bg_parts < 0)
    throw std::invalid_argument("SamplerConfig: bad fg:bg ratio");
  if (!(repeat_threshold > 0.0 && repeat_threshold < 1.0))
    throw std::invalid_argument("SamplerConfig: repeat_threshold must be in (0,1)");
  if (!(repeat_exponent > 0.0))
    throw std::invalid_argument("SamplerConfig: repeat_exponent must be > 0");
}

std::size_t CalBatch::foreground_count() const {
  std::size_t n = 0;
  for (const std::vector<std::size_t>& g : class_groups) n += g.size();
  return n;
}

RandomImageBatcher::RandomImageBatcher(std::size_t num_images, int batch_images, Rng rng)
    : num_images_(num_images), batch_images_(batch_images), rng_(rng) {
  if (num_images_ == 0)
    throw std::invalid_argument("RandomImageBatcher: empty dataset");
  if (batch_images_ < 1)
    throw std::invalid_argument("RandomImageBatcher: batch_images must be positive");
  order_.resize(num_images_);
  for (std::size_t i = 0; i < num_images_; ++i) order_[i] = i;
  reshuffle();
}

void RandomImageBatcher::reshuffle() {
  rng_.shuffle(order_);
  cursor_ = 0;
}

std::vector<std::size_t> RandomImageBatcher::next_batch() {
  if (cursor_ >= num_images_) {
    ++epochs_;
    reshuffle();
  }
  const std::size_t take = std::min(static_cast<std::size_t>(batch_images_),
                                    num_images_ - cursor_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
  cursor_ += take;
  ++batches_emitted_;
  return batch;
}

nlohmann::json RandomImageBatcher::state_to_json() const {
  return nlohmann::json{{"seed", rng_.seed()},
                        {"batches_emitted", batches_emitted_},
                        {"batch_images", batch_images_},
                        {"num_images", num_images_}};
}

double repeat_factor(double class_image_frequency, double t, double exponent) {
  if (!(class_image_frequency > 0.0 && class_image_frequency <= 1.0))
    throw std::invalid_argument("repeat_factor: frequency must be in (0,1]");
  if (!(t > 0.0 && t < 1.0))
    throw std::invalid_argument("repeat_factor: t must be in (0,1)");
  return std::max(1.0, std::pow(t / class_image_frequency, exponent));
}

double image_repeat_factor(const ImageRecord& image, const std::vector<double>& class_freq,
                           double t, double exponent) {
  double r = 1.0;
  for (const int c : image.instances) {
    const double f = class_freq.at(static_cast<std::size_t>(c - 1));
    if (f <= 0.0) continue;  // class appears in no image; excluded
    r = std::max(r, repeat_factor(f, t, exponent));
  }
  return r;
}

RepeatFactorBatcher::RepeatFactorBatcher(const SynthDataset& dataset,
                                         const SamplerConfig& cfg, Rng rng)
    : dataset_(&dataset), batch_images_(cfg.random_batch_images), rng_(rng) {
  cfg.validate();
  if (dataset.images.empty())
    throw std::invalid_argument("RepeatFactorBatcher: empty dataset");
  const double num_images = static_cast<double>(dataset.images.size());
  std::vector<double> freq(dataset.stats.instance_counts.size(), 0.0);
  for (std::size_t j = 0; j < freq.size(); ++j)
    freq[j] = static_cast<double>(dataset.stats.image_counts[j]) / num_images;
  factors_.reserve(dataset.images.size());
  for (const ImageRecord& img : dataset.images) {
    const double r = image_repeat_factor(img, freq, cfg.repeat_threshold, cfg.repeat_exponent);
    factors_.push_back(r);
    expected_inflation_ += r - 1.0;
  }
  new_epoch();
}

void RepeatFactorBatcher::new_epoch() {
  order_.clear();
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const double r = factors_[i];
    std::int64_t copies = static_cast<std::int64_t>(std::floor(r));
    const double frac = r - std::floor(r);
    if (frac > 0.0 && rng_.bernoulli(frac)) ++copies;
    for (std::int64_t k = 0; k < copies; ++k) order_.push_back(i);
  }
  last_inflation_ = static_cast<std::int64_t>(order_.size()) -
                    static_cast<std::int64_t>(factors_.size());
  rng_.shuffle(order_);
  cursor_ = 0;
}

std::vector<std::size_t> RepeatFactorBatcher::next_batch() {
  if (cursor_ >= order_.size()) new_epoch();
  const std::size_t take = std::min(static_cast<std::size_t>(batch_images_),
                                    order_.size() - cursor_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
  cursor_ += take;
  return batch;
}

BilevelSampler::BilevelSampler(const SynthDataset& dataset, SamplerConfig cfg)
    : dataset_(&dataset), cfg_(cfg), rng_(Rng::derive(cfg.seed, "bilevel")) {
  cfg_.validate();
  const int C = dataset.config.num_classes;
  images_of_class_.assign(static_cast<std::size_t>(C) + 1, {});
  fg_by_image_.assign(dataset.images.size(), {});
  bg_by_image_.assign(dataset.images.size(), {});

  // image ids may be sparse after subsampling; map id -> position
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) pos[dataset.images[i].id] = i;

  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    std::set<int> classes(dataset.images[i].instances.begin(),
                          dataset.images[i].instances.end());
    for (const int c : classes) images_of_class_[static_cast<std::size_t>(c)].push_back(i);
  }
  for (std::size_t p = 0; p < dataset.proposals.size(); ++p) {
    const ProposalRecord& pr = dataset.proposals[p];
    const std::size_t i = pos.at(pr.image_id);
    if (pr.assigned_label != kBackgroundClass)
      fg_by_image_[i].push_back(p);
    else
      bg_by_image_[i].push_back(p);
  }
  for (int c = 1; c <= C; ++c) {
    if (!images_of_class_[static_cast<std::size_t>(c)].empty()) {
      sampleable_.push_back(c);
    } else {
      warn("bilevel sampler: class " + std::to_string(c) +
           " appears in no image; excluded from sampling");
    }
  }
  if (static_cast<int>(sampleable_.size()) < cfg_.classes_per_batch &&
      !cfg_.sample_with_replacement)
    throw std::invalid_argument("BilevelSampler: fewer sampleable classes than classes_per_batch");
}

CalBatch BilevelSampler::next_batch() {
  CalBatch batch;
  // Uniform class draw, without replacement by default.
  if (cfg_.sample_with_replacement) {
    for (int k = 0; k < cfg_.classes_per_batch; ++k)
      batch.sampled_classes.push_back(
          sampleable_[static_cast<std::size_t>(rng_.below(sampleable_.size()))]);
  } else {
    const std::vector<std::size_t> pick =
        rng_.sample_without_replacement(sampleable_.size(),
                                        static_cast<std::size_t>(cfg_.classes_per_batch));
    for (const std::size_t i : pick) batch.sampled_classes.push_back(sampleable_[i]);
  }

  // Image draw per class, with a retry loop for classes whose drawn images
  // carry no matched proposal of that class.
  std::vector<std::size_t> batch_images;
  std::vector<int> kept_classes;
  for (const int c : batch.sampled_classes) {
    const std::vector<std::size_t>& support = images_of_class_[static_cast<std::size_t>(c)];
    bool found = false;
    std::vector<std::size_t> chosen;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
      chosen.clear();
      for (int k = 0; k < cfg_.images_per_class; ++k)
        chosen.push_back(support[static_cast<std::size_t>(rng_.below(support.size()))]);
      for (const std::size_t img : chosen)
        for (const std::size_t p : fg_by_image_[img])
          if (dataset_->proposals[p].assigned_label == c) {
            found = true;
            break;
          }
    }
    if (!found) {
      warn("bilevel sampler: class " + std::to_string(c) +
           " yielded no foreground proposals after 10 retries; skipped this batch");
      continue;
    }
    kept_classes.push_back(c);
    batch_images.insert(batch_images.end(), chosen.begin(), chosen.end());
  }
  batch.sampled_classes = kept_classes;

  // Dedupe images (an image may serve several sampled classes).
  std::sort(batch_images.begin(), batch_images.end());
  batch_images.erase(std::unique(batch_images.begin(), batch_images.end()),
                     batch_images.end());

  // Instance level: keep only proposals of sampled classes.
  std::vector<char> is_sampled(static_cast<std::size_t>(dataset_->config.num_classes) + 1, 0);
  for (const int c : batch.sampled_classes) is_sampled[static_cast<std::size_t>(c)] = 1;
  batch.class_groups.assign(batch.sampled_classes.size(), {});
  std::vector<std::size_t> group_of(static_cast<std::size_t>(dataset_->config.num_classes) + 1, 0);
  for (std::size_t g = 0; g < batch.sampled_classes.size(); ++g)
    group_of[static_cast<std::size_t>(batch.sampled_classes[g])] = g;

  std::vector<std::size_t> bg_pool;
  for (const std::size_t img : batch_images) {
    for (const std::size_t p : fg_by_image_[img]) {
      const int label = dataset_->proposals[p].assigned_label;
      if (is_sampled[static_cast<std::size_t>(label)])
        batch.class_groups[group_of[static_cast<std::size_t>(label)]].push_back(p);
    }
    bg_pool.insert(bg_pool.end(), bg_by_image_[img].begin(), bg_by_image_[img].end());
  }

  // Ratio-matched background from the same images.
  const std::size_t fg = batch.foreground_count();
  const std::size_t want_bg = static_cast<std::size_t>(std::llround(
      static_cast<double>(fg) * static_cast<double>(cfg_.bg_parts) /
      static_cast<double>(cfg_.fg_parts)));
  if (want_bg <= bg_pool.size()) {
    const std::vector<std::size_t> pick =
        rng_.sample_without_replacement(bg_pool.size(), want_bg);
    for (const std::size_t i : pick) batch.background_group.push_back(bg_pool[i]);
  } else {
    batch.background_group = bg_pool;
    while (batch.background_group.size() < want_bg && !bg_pool.empty())
      batch.background_group.push_back(
          bg_pool[static_cast<std::size_t>(rng_.below(bg_pool.size()))]);
    warn("bilevel sampler: background pool short of the fg:bg ratio; filled with replacement");
  }

  ++batches_emitted_;
  return batch;
}

nlohmann::json BilevelSampler::state_to_json() const {
  return nlohmann::json{{"seed", cfg_.seed}, {"batches_emitted", batches_emitted_}};
}

}  // namespace ltcal
