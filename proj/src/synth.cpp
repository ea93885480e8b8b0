#include "ltcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ltcal/log.hpp"
#include "ltcal/rng.hpp"

namespace ltcal {

std::string to_string(FrequencyLaw law) {
  switch (law) {
    case FrequencyLaw::kPowerLaw: return "powerlaw";
    case FrequencyLaw::kExponential: return "exponential";
    case FrequencyLaw::kExplicit: return "explicit";
  }
  throw std::logic_error("bad FrequencyLaw");
}

FrequencyLaw frequency_law_from_string(const std::string& s) {
  if (s == "powerlaw") return FrequencyLaw::kPowerLaw;
  if (s == "exponential") return FrequencyLaw::kExponential;
  if (s == "explicit") return FrequencyLaw::kExplicit;
  throw std::invalid_argument("unknown frequency law: " + s);
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("SynthConfig: num_classes must be >= 2");
  if (feature_dim < 2) throw std::invalid_argument("SynthConfig: feature_dim must be >= 2");
  if (!(within_class_noise > 0.0))
    throw std::invalid_argument("SynthConfig: within_class_noise must be > 0");
  if (!(prototype_spread > 0.0))
    throw std::invalid_argument("SynthConfig: prototype_spread must be > 0");
  if (instances_per_image_min < 1 || instances_per_image_max < instances_per_image_min)
    throw std::invalid_argument("SynthConfig: bad instances_per_image range");
  if (background_per_image_min < 0 || background_per_image_max < background_per_image_min)
    throw std::invalid_argument("SynthConfig: bad background_per_image range");
  if (!(iou_beta_a > 0.0 && iou_beta_b > 0.0))
    throw std::invalid_argument("SynthConfig: beta parameters must be > 0");
  if (law == FrequencyLaw::kExplicit &&
      explicit_counts.size() != static_cast<std::size_t>(num_classes))
    throw std::invalid_argument("SynthConfig: explicit_counts length must equal num_classes");
  if (law != FrequencyLaw::kExplicit && max_instances_per_head_class < 1)
    throw std::invalid_argument("SynthConfig: max_instances_per_head_class must be >= 1");
}

nlohmann::json SynthConfig::to_json() const {
  return nlohmann::json{
      {"num_classes", num_classes},
      {"feature_dim", feature_dim},
      {"law", to_string(law)},
      {"powerlaw_alpha", powerlaw_alpha},
      {"exponential_beta", exponential_beta},
      {"explicit_counts", explicit_counts},
      {"max_instances_per_head_class", max_instances_per_head_class},
      {"instances_per_image_min", instances_per_image_min},
      {"instances_per_image_max", instances_per_image_max},
      {"prototype_spread", prototype_spread},
      {"within_class_noise", within_class_noise},
      {"iou_beta_a", iou_beta_a},
      {"iou_beta_b", iou_beta_b},
      {"background_per_image_min", background_per_image_min},
      {"background_per_image_max", background_per_image_max},
      {"seed", seed},
  };
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.num_classes = j.at("num_classes").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.law = frequency_law_from_string(j.at("law").get<std::string>());
  c.powerlaw_alpha = j.at("powerlaw_alpha").get<double>();
  c.exponential_beta = j.at("exponential_beta").get<double>();
  c.explicit_counts = j.at("explicit_counts").get<std::vector<std::int64_t>>();
  c.max_instances_per_head_class = j.at("max_instances_per_head_class").get<std::int64_t>();
  c.instances_per_image_min = j.at("instances_per_image_min").get<int>();
  c.instances_per_image_max = j.at("instances_per_image_max").get<int>();
  c.prototype_spread = j.at("prototype_spread").get<double>();
  c.within_class_noise = j.at("within_class_noise").get<double>();
  c.iou_beta_a = j.at("iou_beta_a").get<double>();
  c.iou_beta_b = j.at("iou_beta_b").get<double>();
  c.background_per_image_min = j.at("background_per_image_min").get<int>();
  c.background_per_image_max = j.at("background_per_image_max").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

std::vector<std::int64_t> law_counts(const SynthConfig& config) {
  config.validate();
  std::vector<std::int64_t> counts(static_cast<std::size_t>(config.num_classes), 0);
  switch (config.law) {
    case FrequencyLaw::kExplicit:
      counts = config.explicit_counts;
      break;
    case FrequencyLaw::kPowerLaw:
      for (int j = 1; j <= config.num_classes; ++j)
        counts[static_cast<std::size_t>(j - 1)] = static_cast<std::int64_t>(std::floor(
            static_cast<double>(config.max_instances_per_head_class) *
            std::pow(static_cast<double>(j), -config.powerlaw_alpha)));
      break;
    case FrequencyLaw::kExponential:
      for (int j = 1; j <= config.num_classes; ++j)
        counts[static_cast<std::size_t>(j - 1)] = static_cast<std::int64_t>(std::floor(
            static_cast<double>(config.max_instances_per_head_class) *
            std::exp(-config.exponential_beta * static_cast<double>(j - 1))));
      break;
  }
  return counts;
}

namespace {

ClassStats stats_from_images(int num_classes, const std::vector<ImageRecord>& images) {
  ClassStats stats;
  stats.instance_counts.assign(static_cast<std::size_t>(num_classes), 0);
  stats.image_counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (const ImageRecord& img : images) {
    std::set<int> seen;
    for (const int c : img.instances) {
      stats.instance_counts[static_cast<std::size_t>(c - 1)] += 1;
      seen.insert(c);
    }
    for (const int c : seen) stats.image_counts[static_cast<std::size_t>(c - 1)] += 1;
  }
  return stats;
}

std::vector<std::vector<double>> make_prototypes(int num_classes, int dim,
                                                 double spread, Rng& rng) {
  // Random unit directions scaled so pairwise distances land near `spread`
  // (near-orthogonal directions of norm spread/sqrt(2)).
  std::vector<std::vector<double>> protos;
  protos.reserve(static_cast<std::size_t>(num_classes));
  const double scale = spread / std::sqrt(2.0);
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
    const double inv = scale / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    protos.push_back(std::move(v));
  }
  return protos;
}

/// Builds images and proposals for the given per-class counts on top of fixed
/// prototypes. Consumes `rng` for layout, features and IoU draws.
SynthDataset assemble(const SynthConfig& config,
                      const std::vector<std::int64_t>& counts,
                      std::vector<std::vector<double>> prototypes, Rng& rng) {
  SynthDataset ds;
  ds.config = config;
  ds.prototypes = std::move(prototypes);

  // Pool of instance class ids, shuffled, then cut into images.
  std::vector<int> pool;
  for (int j = 1; j <= config.num_classes; ++j) {
    const std::int64_t n = counts[static_cast<std::size_t>(j - 1)];
    for (std::int64_t k = 0; k < n; ++k) pool.push_back(j);
  }
  rng.shuffle(pool);

  std::size_t cursor = 0;
  std::int64_t next_id = 0;
  while (cursor < pool.size()) {
    const std::int64_t want = rng.uniform_int(config.instances_per_image_min,
                                              config.instances_per_image_max);
    const std::size_t take = std::min(static_cast<std::size_t>(want), pool.size() - cursor);
    ImageRecord img;
    img.id = next_id++;
    img.instances.assign(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                         pool.begin() + static_cast<std::ptrdiff_t>(cursor + take));
    cursor += take;
    ds.images.push_back(std::move(img));
  }

  const int d = config.feature_dim;
  for (const ImageRecord& img : ds.images) {
    for (std::size_t slot = 0; slot < img.instances.size(); ++slot) {
      const int c = img.instances[slot];
      ProposalRecord p;
      p.image_id = img.id;
      p.features.resize(static_cast<std::size_t>(d));
      const std::vector<double>& proto = ds.prototypes[static_cast<std::size_t>(c - 1)];
      for (int k = 0; k < d; ++k)
        p.features[static_cast<std::size_t>(k)] =
            proto[static_cast<std::size_t>(k)] + rng.normal(0.0, config.within_class_noise);
      p.iou_with_gt = rng.beta(config.iou_beta_a, config.iou_beta_b);
      p.gt_class = c;
      p.gt_slot = static_cast<int>(slot);
      ds.proposals.push_back(match_proposal(std::move(p), kDefaultMatchIou));
    }
    const std::int64_t nb = rng.uniform_int(config.background_per_image_min,
                                            config.background_per_image_max);
    for (std::int64_t b = 0; b < nb; ++b) {
      ProposalRecord p;
      p.image_id = img.id;
      p.features.resize(static_cast<std::size_t>(d));
      // Broad background cloud centered at the origin.
      for (int k = 0; k < d; ++k)
        p.features[static_cast<std::size_t>(k)] = rng.normal(0.0, config.prototype_spread);
      p.iou_with_gt = 0.0;
      p.gt_class = 0;
      p.gt_slot = -1;
      ds.proposals.push_back(match_proposal(std::move(p), kDefaultMatchIou));
    }
  }

  ds.stats = stats_from_images(config.num_classes, ds.images);
  for (int j = 1; j <= config.num_classes; ++j)
    if (ds.stats.instances(j) == 0)
      warn("generate: class " + std::to_string(j) + " has zero instances");
  ds.validate();
  return ds;
}

}  // namespace

void SynthDataset::validate() const {
  config.validate();
  stats.validate();
  if (stats.num_classes() != config.num_classes)
    throw std::invalid_argument("SynthDataset: stats class count mismatch");
  const ClassStats recomputed = stats_from_images(config.num_classes, images);
  if (recomputed.instance_counts != stats.instance_counts ||
      recomputed.image_counts != stats.image_counts)
    throw std::invalid_argument("SynthDataset: stats do not match images");
  if (prototypes.size() != static_cast<std::size_t>(config.num_classes))
    throw std::invalid_argument("SynthDataset: prototype count mismatch");

  std::map<std::int64_t, const ImageRecord*> by_id;
  for (const ImageRecord& img : images) {
    if (!by_id.emplace(img.id, &img).second)
      throw std::invalid_argument("SynthDataset: duplicate image id");
  }
  for (const ProposalRecord& p : proposals) {
    const auto it = by_id.find(p.image_id);
    if (it == by_id.end())
      throw std::invalid_argument("SynthDataset: proposal references missing image");
    if (p.gt_class != 0) {
      const std::vector<int>& inst = it->second->instances;
      if (p.gt_slot < 0 || p.gt_slot >= static_cast<int>(inst.size()) ||
          inst[static_cast<std::size_t>(p.gt_slot)] != p.gt_class)
        throw std::invalid_argument(
            "SynthDataset: foreground proposal does not match its image's instances");
    }
    if (p.features.size() != static_cast<std::size_t>(config.feature_dim))
      throw std::invalid_argument("SynthDataset: feature dim mismatch");
    if (p.iou_with_gt < 0.0 || p.iou_with_gt > 1.0)
      throw std::invalid_argument("SynthDataset: iou outside [0,1]");
  }
}

nlohmann::json SynthDataset::to_json() const {
  nlohmann::json imgs = nlohmann::json::array();
  for (const ImageRecord& img : images)
    imgs.push_back({{"id", img.id}, {"instances", img.instances}});
  nlohmann::json props = nlohmann::json::array();
  for (const ProposalRecord& p : proposals)
    props.push_back({{"image_id", p.image_id},
                     {"features", p.features},
                     {"iou", p.iou_with_gt},
                     {"gt_class", p.gt_class},
                     {"gt_slot", p.gt_slot}});
  return nlohmann::json{{"config", config.to_json()},
                        {"stats", stats.to_json()},
                        {"prototypes", prototypes},
                        {"images", std::move(imgs)},
                        {"proposals", std::move(props)}};
}

SynthDataset SynthDataset::from_json(const nlohmann::json& j) {
  SynthDataset ds;
  ds.config = SynthConfig::from_json(j.at("config"));
  ds.stats = ClassStats::from_json(j.at("stats"));
  ds.prototypes = j.at("prototypes").get<std::vector<std::vector<double>>>();
  for (const nlohmann::json& ij : j.at("images")) {
    ImageRecord img;
    img.id = ij.at("id").get<std::int64_t>();
    img.instances = ij.at("instances").get<std::vector<int>>();
    ds.images.push_back(std::move(img));
  }
  for (const nlohmann::json& pj : j.at("proposals")) {
    ProposalRecord p;
    p.image_id = pj.at("image_id").get<std::int64_t>();
    p.features = pj.at("features").get<std::vector<double>>();
    p.iou_with_gt = pj.at("iou").get<double>();
    p.gt_class = pj.at("gt_class").get<int>();
    p.gt_slot = pj.at("gt_slot").get<int>();
    ds.proposals.push_back(match_proposal(std::move(p), kDefaultMatchIou));
  }
  ds.validate();
  return ds;
}

void SynthDataset::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

SynthDataset SynthDataset::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  Rng proto_rng(Rng::derive(config.seed, "prototypes"));
  std::vector<std::vector<double>> protos = make_prototypes(
      config.num_classes, config.feature_dim, config.prototype_spread, proto_rng);
  Rng body_rng(Rng::derive(config.seed, "body"));
  return assemble(config, law_counts(config), std::move(protos), body_rng);
}

SynthDataset generate_like(const SynthDataset& base,
                           const std::vector<std::int64_t>& counts,
                           std::uint64_t seed) {
  if (counts.size() != static_cast<std::size_t>(base.config.num_classes))
    throw std::invalid_argument("generate_like: counts length must equal num_classes");
  SynthConfig cfg = base.config;
  cfg.law = FrequencyLaw::kExplicit;
  cfg.explicit_counts = counts;
  cfg.seed = seed;
  Rng body_rng(Rng::derive(seed, "body"));
  return assemble(cfg, counts, base.prototypes, body_rng);
}

SynthDataset subsample_coco_lt(const SynthDataset& dataset, int num_subsets,
                               std::uint64_t seed) {
  if (num_subsets < 2)
    throw std::invalid_argument("subsample_coco_lt: num_subsets must be >= 2");
  const int C = dataset.config.num_classes;
  if (num_subsets > C)
    throw std::invalid_argument("subsample_coco_lt: more subsets than classes");

  // Index-contiguous groups, as equal as possible; earlier groups take the
  // remainder.
  std::vector<int> subset_of(static_cast<std::size_t>(C + 1), 0);
  {
    const int base = C / num_subsets;
    const int extra = C % num_subsets;
    int cls = 1;
    for (int i = 1; i <= num_subsets; ++i) {
      const int size = base + (i <= extra ? 1 : 0);
      for (int k = 0; k < size; ++k) subset_of[static_cast<std::size_t>(cls++)] = i;
    }
  }

  std::int64_t max_count = 0;
  for (const std::int64_t n : dataset.stats.instance_counts)
    max_count = std::max(max_count, n);
  const double scale = static_cast<double>(max_count) / 8.0e4;

  // Instance identity: (image index, slot).
  struct Slot {
    std::size_t image;
    int slot;
  };
  std::vector<std::vector<Slot>> subset_slots(static_cast<std::size_t>(num_subsets) + 1);
  for (std::size_t ii = 0; ii < dataset.images.size(); ++ii) {
    const ImageRecord& img = dataset.images[ii];
    for (int s = 0; s < static_cast<int>(img.instances.size()); ++s) {
      const int subset = subset_of[static_cast<std::size_t>(img.instances[static_cast<std::size_t>(s)])];
      subset_slots[static_cast<std::size_t>(subset)].push_back(Slot{ii, s});
    }
  }

  Rng rng(Rng::derive(seed, "coco_lt"));
  // kept[image][slot]
  std::vector<std::vector<char>> kept(dataset.images.size());
  for (std::size_t ii = 0; ii < dataset.images.size(); ++ii)
    kept[ii].assign(dataset.images[ii].instances.size(), 0);

  for (int i = 1; i <= num_subsets; ++i) {
    const std::vector<Slot>& slots = subset_slots[static_cast<std::size_t>(i)];
    if (i == 1) {
      for (const Slot& s : slots) kept[s.image][static_cast<std::size_t>(s.slot)] = 1;
      continue;
    }
    const double lo = 8.0 * std::pow(10.0, 4 - i) * scale;
    const double hi = 8.0 * std::pow(10.0, 5 - i) * scale;
    // Uniform integer strictly inside the open interval.
    std::int64_t lo_int = static_cast<std::int64_t>(std::floor(lo)) + 1;
    std::int64_t hi_int = static_cast<std::int64_t>(std::ceil(hi)) - 1;
    if (hi_int < lo_int) {
      warn("subsample_coco_lt: degenerate interval for subset " + std::to_string(i));
      lo_int = hi_int = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor((lo + hi) / 2.0)));
    }
    const std::int64_t target = rng.uniform_int(lo_int, hi_int);
    const std::size_t keep_n =
        std::min(static_cast<std::size_t>(target), slots.size());
    const std::vector<std::size_t> pick = rng.sample_without_replacement(slots.size(), keep_n);
    for (const std::size_t k : pick)
      kept[slots[k].image][static_cast<std::size_t>(slots[k].slot)] = 1;
  }

  // Rebuild images, remapping surviving slots.
  SynthDataset out;
  out.config = dataset.config;
  out.prototypes = dataset.prototypes;
  std::vector<char> image_alive(dataset.images.size(), 0);
  std::vector<std::vector<int>> slot_remap(dataset.images.size());
  for (std::size_t ii = 0; ii < dataset.images.size(); ++ii) {
    const ImageRecord& img = dataset.images[ii];
    slot_remap[ii].assign(img.instances.size(), -1);
    ImageRecord copy;
    copy.id = img.id;
    for (std::size_t s = 0; s < img.instances.size(); ++s) {
      if (kept[ii][s]) {
        slot_remap[ii][s] = static_cast<int>(copy.instances.size());
        copy.instances.push_back(img.instances[s]);
      }
    }
    if (!copy.instances.empty()) {
      image_alive[ii] = 1;
      out.images.push_back(std::move(copy));
    }
  }

  std::map<std::int64_t, std::size_t> index_of_image;
  for (std::size_t ii = 0; ii < dataset.images.size(); ++ii)
    index_of_image[dataset.images[ii].id] = ii;

  for (const ProposalRecord& p : dataset.proposals) {
    const std::size_t ii = index_of_image.at(p.image_id);
    if (!image_alive[ii]) continue;
    if (p.gt_class == 0) {
      out.proposals.push_back(p);
      continue;
    }
    const int remapped = slot_remap[ii][static_cast<std::size_t>(p.gt_slot)];
    if (remapped < 0) continue;  // instance was dropped
    ProposalRecord copy = p;
    copy.gt_slot = remapped;
    out.proposals.push_back(std::move(copy));
  }

  out.stats = stats_from_images(dataset.config.num_classes, out.images);
  out.validate();
  return out;
}

nlohmann::json summarize(const SynthDataset& dataset) {
  std::vector<std::int64_t> sorted = dataset.stats.instance_counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<std::int64_t>());

  std::vector<int> zero_classes;
  for (int j = 1; j <= dataset.stats.num_classes(); ++j)
    if (dataset.stats.instances(j) == 0) zero_classes.push_back(j);

  const BinScheme inst = BinScheme::instance_bins();
  const BinScheme sets = BinScheme::image_sets();
  std::vector<std::int64_t> inst_pop(static_cast<std::size_t>(inst.num_bins()), 0);
  std::vector<std::int64_t> set_pop(static_cast<std::size_t>(sets.num_bins()), 0);
  for (int j = 1; j <= dataset.stats.num_classes(); ++j) {
    inst_pop[static_cast<std::size_t>(assign_bin(j, dataset.stats, inst))] += 1;
    set_pop[static_cast<std::size_t>(assign_bin(j, dataset.stats, sets))] += 1;
  }

  std::size_t fg = 0;
  for (const ProposalRecord& p : dataset.proposals)
    if (p.gt_class != 0) ++fg;

  return nlohmann::json{
      {"num_classes", dataset.stats.num_classes()},
      {"num_images", dataset.images.size()},
      {"num_proposals", dataset.proposals.size()},
      {"num_foreground_proposals", fg},
      {"instance_counts", dataset.stats.instance_counts},
      {"image_counts", dataset.stats.image_counts},
      {"sorted_counts", sorted},
      {"zero_instance_classes", zero_classes},
      {"instance_bin_populations", inst_pop},
      {"image_set_populations", set_pop},
  };
}

}  // namespace ltcal
