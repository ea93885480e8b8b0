#include "ltcal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "ltcal/log.hpp"

namespace ltcal {

void Schedule::validate() const {
  if (total_steps < 0) throw std::invalid_argument("Schedule: negative step count");
  if (!(lr_init > 0.0)) throw std::invalid_argument("Schedule: lr must be > 0");
  for (std::size_t i = 0; i < decay_steps.size(); ++i) {
    if (i > 0 && decay_steps[i] <= decay_steps[i - 1])
      throw std::invalid_argument("Schedule: decay steps must be strictly increasing");
    if (decay_steps[i] >= total_steps)
      throw std::invalid_argument("Schedule: decay step beyond total_steps");
  }
}

double Schedule::lr_at(std::int64_t step) const {
  double lr = lr_init;
  for (const std::int64_t d : decay_steps)
    if (step >= d) lr *= decay_factor;
  return lr;
}

Schedule Schedule::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("Schedule: scale factor must be > 0");
  Schedule s = *this;
  s.total_steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                                std::floor(static_cast<double>(total_steps) * factor)));
  s.decay_steps.clear();
  for (const std::int64_t d : decay_steps) {
    const std::int64_t scaled_d =
        static_cast<std::int64_t>(std::floor(static_cast<double>(d) * factor));
    if (scaled_d >= 1 && scaled_d < s.total_steps) s.decay_steps.push_back(scaled_d);
  }
  return s;
}

Schedule Schedule::standard_default() {
  Schedule s;
  s.total_steps = 4000;
  s.lr_init = 0.01;
  s.decay_steps = {2666, 3666};
  s.decay_factor = 0.1;
  return s;
}

Schedule Schedule::calibration_default() {
  Schedule s;
  s.total_steps = 12000;
  s.lr_init = 0.01;
  s.decay_steps = {8000, 11000};
  s.decay_factor = 0.1;
  return s;
}

void save_train_log(const std::vector<TrainLogEntry>& log,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const TrainLogEntry& e : log) {
    nlohmann::json j{{"step", e.step}, {"lr", e.lr}, {"loss", e.loss}};
    out << j.dump() << '\n';
  }
}

std::string to_string(HeadInit h) {
  switch (h) {
    case HeadInit::k2fcRand: return "2fc_rand";
    case HeadInit::k3fcRand: return "3fc_rand";
    case HeadInit::k3fcFt: return "3fc_ft";
  }
  throw std::logic_error("bad HeadInit");
}

HeadInit head_init_from_string(const std::string& s) {
  if (s == "2fc_rand") return HeadInit::k2fcRand;
  if (s == "3fc_rand") return HeadInit::k3fcRand;
  if (s == "3fc_ft") return HeadInit::k3fcFt;
  throw std::invalid_argument("unknown head init: " + s);
}

std::string to_string(CalibLayers l) {
  switch (l) {
    case CalibLayers::kLast: return "last";
    case CalibLayers::kLast2: return "last2";
    case CalibLayers::kAll: return "all";
  }
  throw std::logic_error("bad CalibLayers");
}

CalibLayers calib_layers_from_string(const std::string& s) {
  if (s == "last") return CalibLayers::kLast;
  if (s == "last2") return CalibLayers::kLast2;
  if (s == "all") return CalibLayers::kAll;
  throw std::invalid_argument("unknown calibration layer set: " + s);
}

void CalibConfig::validate() const {
  schedule.validate();
  sampler.validate();
  loss.validate();
  if (rand_hidden < 1) throw std::invalid_argument("CalibConfig: rand_hidden must be >= 1");
  if (random_proposal_batch < 1)
    throw std::invalid_argument("CalibConfig: random_proposal_batch must be >= 1");
}

namespace {

SampleBatch batch_from_proposals(const SynthDataset& ds,
                                 const std::vector<std::size_t>& proposal_idx) {
  SampleBatch b;
  b.feature_dim = ds.config.feature_dim;
  b.features.reserve(proposal_idx.size() * static_cast<std::size_t>(b.feature_dim));
  b.labels.reserve(proposal_idx.size());
  for (const std::size_t p : proposal_idx) {
    const ProposalRecord& pr = ds.proposals[p];
    b.features.insert(b.features.end(), pr.features.begin(), pr.features.end());
    b.labels.push_back(pr.assigned_label);
  }
  return b;
}

std::vector<std::vector<std::size_t>> proposals_by_image(const SynthDataset& ds) {
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < ds.images.size(); ++i) pos[ds.images[i].id] = i;
  std::vector<std::vector<std::size_t>> out(ds.images.size());
  for (std::size_t p = 0; p < ds.proposals.size(); ++p)
    out[pos.at(ds.proposals[p].image_id)].push_back(p);
  return out;
}

int first_trainable_layer(const HeadParams& head, CalibLayers layers) {
  switch (layers) {
    case CalibLayers::kAll: return 0;
    case CalibLayers::kLast2: return std::max(0, head.num_layers() - 2);
    case CalibLayers::kLast: return head.num_layers() - 1;
  }
  throw std::logic_error("bad CalibLayers");
}

void zero_frozen(Gradients& grads, int first_trainable) {
  for (int l = 0; l < first_trainable; ++l) {
    std::fill(grads.weights[static_cast<std::size_t>(l)].begin(),
              grads.weights[static_cast<std::size_t>(l)].end(), 0.0);
    std::fill(grads.biases[static_cast<std::size_t>(l)].begin(),
              grads.biases[static_cast<std::size_t>(l)].end(), 0.0);
  }
}

HeadParams init_calibration_head(const SynthDataset& ds, const HeadParams& original,
                                 const CalibConfig& cfg, Rng& init_rng) {
  const int d = ds.config.feature_dim;
  const int out = ds.config.num_classes + 1;
  switch (cfg.head_init) {
    case HeadInit::k3fcFt: {
      if (original.num_layers() != 3)
        throw std::invalid_argument("calibrate: 3fc_ft requires a trained 3-layer original head");
      return original;
    }
    case HeadInit::k2fcRand:
      return HeadParams::random_init({d, cfg.rand_hidden, out}, init_rng);
    case HeadInit::k3fcRand:
      return HeadParams::random_init({d, cfg.rand_hidden, cfg.rand_hidden, out}, init_rng);
  }
  throw std::logic_error("bad HeadInit");
}

/// Shared calibration loop. Batches come from `next_batch`; only layers from
/// `first_trainable` on receive updates.
TrainResult run_calibration(const SynthDataset& ds, HeadParams head,
                            const CalibConfig& cfg, const LossConfig& loss_cfg,
                            const std::function<std::vector<std::size_t>()>& next_batch,
                            const std::vector<std::int64_t>& snapshot_steps,
                            const SnapshotFn& on_snapshot) {
  const int first = first_trainable_layer(head, cfg.layers);
  OptState opt = OptState::init(head, cfg.schedule.lr_init);
  TrainResult result;
  std::size_t snap = 0;
  while (snap < snapshot_steps.size() && snapshot_steps[snap] == 0) {
    if (on_snapshot) on_snapshot(0, head);
    ++snap;
  }
  for (std::int64_t step = 1; step <= cfg.schedule.total_steps; ++step) {
    const std::vector<std::size_t> idx = next_batch();
    if (idx.empty()) {
      warn("calibration step " + std::to_string(step) + ": empty batch, skipped");
      continue;
    }
    const SampleBatch batch = batch_from_proposals(ds, idx);
    const double loss = batch_loss(head, batch, loss_cfg, &ds.stats);
    if (!std::isfinite(loss))
      throw std::runtime_error("calibration diverged at step " + std::to_string(step));
    Gradients grads = backward(head, batch, loss_cfg, &ds.stats);
    zero_frozen(grads, first);
    opt.lr = cfg.schedule.lr_at(step);
    sgd_step(head, grads, opt);
    result.log.push_back({step, opt.lr, loss});
    while (snap < snapshot_steps.size() && snapshot_steps[snap] == step) {
      if (on_snapshot) on_snapshot(step, head);
      ++snap;
    }
  }
  result.params = std::move(head);
  return result;
}

}  // namespace

TrainResult train_standard(const SynthDataset& dataset, const std::vector<int>& head_dims,
                           const Schedule& schedule, int batch_images, Rng rng) {
  schedule.validate();
  if (dataset.proposals.empty())
    throw std::invalid_argument("train_standard: dataset has no proposals");
  Rng init_rng = rng.stream("init");
  HeadParams head = HeadParams::random_init(head_dims, init_rng);
  if (head.input_dim() != dataset.config.feature_dim ||
      head.output_dim() != dataset.config.num_classes + 1)
    throw std::invalid_argument("train_standard: head dims do not match dataset");

  TrainResult result;
  if (schedule.total_steps == 0) {
    result.params = std::move(head);
    return result;
  }

  const std::vector<std::vector<std::size_t>> by_image = proposals_by_image(dataset);
  RandomImageBatcher batcher(dataset.images.size(), batch_images, rng.stream("batches"));
  OptState opt = OptState::init(head, schedule.lr_init);
  const LossConfig ce;

  for (std::int64_t step = 1; step <= schedule.total_steps; ++step) {
    const std::vector<std::size_t> images = batcher.next_batch();
    std::vector<std::size_t> idx;
    for (const std::size_t i : images)
      idx.insert(idx.end(), by_image[i].begin(), by_image[i].end());
    if (idx.empty()) continue;  // images can be proposal-free only in degenerate configs
    const SampleBatch batch = batch_from_proposals(dataset, idx);
    const double loss = batch_loss(head, batch, ce, nullptr);
    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged at step " + std::to_string(step));
    const Gradients grads = backward(head, batch, ce, nullptr);
    opt.lr = schedule.lr_at(step);
    sgd_step(head, grads, opt);
    result.log.push_back({step, opt.lr, loss});
  }
  result.params = std::move(head);
  return result;
}

TrainResult calibrate(const SynthDataset& dataset, const HeadParams& original_head,
                      const CalibConfig& cfg, Rng rng,
                      const std::vector<std::int64_t>& snapshot_steps,
                      const SnapshotFn& on_snapshot) {
  cfg.validate();
  Rng init_rng = rng.stream("init");
  HeadParams head = init_calibration_head(dataset, original_head, cfg, init_rng);

  SamplerConfig sampler_cfg = cfg.sampler;
  sampler_cfg.seed = rng.stream("sampler").seed();
  auto sampler = std::make_shared<BilevelSampler>(dataset, sampler_cfg);
  const auto next = [sampler]() {
    const CalBatch b = sampler->next_batch();
    std::vector<std::size_t> idx;
    for (const std::vector<std::size_t>& g : b.class_groups)
      idx.insert(idx.end(), g.begin(), g.end());
    idx.insert(idx.end(), b.background_group.begin(), b.background_group.end());
    return idx;
  };
  return run_calibration(dataset, std::move(head), cfg, cfg.loss, next,
                         snapshot_steps, on_snapshot);
}

TrainResult calibrate_with_alternative(const SynthDataset& dataset,
                                       const HeadParams& original_head, LossKind alt_loss,
                                       const CalibConfig& cfg, Rng rng) {
  CalibConfig alt_cfg = cfg;
  alt_cfg.loss.kind = alt_loss;
  if (cfg.use_bilevel) {
    CalibConfig run = alt_cfg;
    return calibrate(dataset, original_head, run, rng);
  }
  alt_cfg.validate();
  Rng init_rng = rng.stream("init");
  HeadParams head = init_calibration_head(dataset, original_head, alt_cfg, init_rng);

  auto batch_rng = std::make_shared<Rng>(rng.stream("proposal_batches"));
  const std::size_t n = dataset.proposals.size();
  const std::size_t batch = std::min(static_cast<std::size_t>(alt_cfg.random_proposal_batch), n);
  const auto next = [batch_rng, n, batch]() {
    return batch_rng->sample_without_replacement(n, batch);
  };
  return run_calibration(dataset, std::move(head), alt_cfg, alt_cfg.loss, next, {}, {});
}

PredictionSet predict_dataset(const HeadParams& params, const SynthDataset& dataset) {
  PredictionSet out;
  out.proposal_ids.reserve(dataset.proposals.size());
  out.predictions.reserve(dataset.proposals.size());
  for (std::size_t p = 0; p < dataset.proposals.size(); ++p) {
    out.proposal_ids.push_back(static_cast<std::int64_t>(p));
    out.predictions.push_back(predict(params, dataset.proposals[p].features));
  }
  return out;
}

PredictionSet props_gt_predictions(const SynthDataset& dataset) {
  PredictionSet out;
  const int C = dataset.config.num_classes;
  for (std::size_t p = 0; p < dataset.proposals.size(); ++p) {
    out.proposal_ids.push_back(static_cast<std::int64_t>(p));
    out.predictions.push_back(
        PredictionVector::one_hot(dataset.proposals[p].assigned_label, C));
  }
  return out;
}

EvalReport props_gt_oracle(const SynthDataset& eval_dataset, const ClassStats& train_stats,
                           const BinScheme& instance_bins, const BinScheme& image_sets) {
  return evaluate(props_gt_predictions(eval_dataset), eval_dataset, train_stats,
                  instance_bins, image_sets);
}

double accuracy(const HeadParams& params, const SynthDataset& dataset) {
  if (dataset.proposals.empty()) return 0.0;
  std::size_t hits = 0;
  for (const ProposalRecord& pr : dataset.proposals) {
    const PredictionVector p = predict(params, pr.features);
    const std::size_t arg = static_cast<std::size_t>(
        std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin());
    if (static_cast<int>(arg) == pr.assigned_label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.proposals.size());
}

std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::kCalSteps: return "cal_steps";
    case SweepKind::kLr: return "lr";
    case SweepKind::kBoundaryT: return "T";
    case SweepKind::kLayers: return "layers";
    case SweepKind::kHeadInit: return "head_init";
  }
  throw std::logic_error("bad SweepKind");
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "cal_steps") return SweepKind::kCalSteps;
  if (s == "lr") return SweepKind::kLr;
  if (s == "T") return SweepKind::kBoundaryT;
  if (s == "layers") return SweepKind::kLayers;
  if (s == "head_init") return SweepKind::kHeadInit;
  throw std::invalid_argument("unknown sweep kind: " + s);
}

namespace {

EvalReport eval_with_scheme(const SweepContext& ctx, const HeadParams& cal_head,
                            const CombineConfig& combine_cfg,
                            const PredictionSet& orig_preds) {
  const PredictionSet cal_preds = predict_dataset(cal_head, *ctx.val);
  PredictionSet combined;
  combined.proposal_ids = cal_preds.proposal_ids;
  std::vector<PredictionVector> merged = batch_combine(
      cal_preds.predictions, orig_preds.predictions, ctx.train->stats, combine_cfg);
  combined.predictions = std::move(merged);
  return evaluate(combined, *ctx.val, ctx.train->stats, ctx.instance_bins, ctx.image_sets);
}

}  // namespace

std::string sweep(SweepKind kind, const std::vector<std::string>& grid,
                  const SweepContext& ctx) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  if (!ctx.train || !ctx.val || !ctx.original)
    throw std::invalid_argument("sweep: context incomplete");

  std::ostringstream csv;
  csv << "kind,knob,status,seed," << "ap1,ap2,ap3,ap4,ap_r,ap_c,ap_f,ap" << '\n';
  const PredictionSet orig_preds = predict_dataset(*ctx.original, *ctx.val);

  const auto emit = [&](const std::string& knob, const std::uint64_t seed,
                        const EvalReport* rep) {
    std::ostringstream meta;
    meta << to_string(kind) << ',' << knob << ',' << (rep ? "ok" : "failed") << ','
         << seed;
    if (rep) {
      csv << rep->csv_row(meta.str()) << '\n';
    } else {
      csv << meta.str() << ",,,,,,,," << '\n';
    }
  };

  if (kind == SweepKind::kCalSteps) {
    // One trajectory, evaluated at the requested checkpoints.
    std::vector<std::int64_t> steps;
    for (const std::string& g : grid) steps.push_back(std::stoll(g));
    std::sort(steps.begin(), steps.end());
    CalibConfig cfg = ctx.calib;
    cfg.schedule.total_steps = std::max(cfg.schedule.total_steps, steps.back());
    const std::uint64_t seed = Rng::derive(ctx.seed, "cal_steps");
    std::vector<std::pair<std::int64_t, EvalReport>> rows;
    calibrate(*ctx.train, *ctx.original, cfg, Rng(seed), steps,
              [&](std::int64_t step, const HeadParams& head) {
                rows.emplace_back(step, eval_with_scheme(ctx, head, ctx.combine, orig_preds));
              });
    for (const auto& [step, rep] : rows) emit(std::to_string(step), seed, &rep);
    return csv.str();
  }

  if (kind == SweepKind::kBoundaryT) {
    // Calibrate once; vary the routing boundary at evaluation time.
    const std::uint64_t seed = Rng::derive(ctx.seed, "T_sweep");
    const TrainResult cal = calibrate(*ctx.train, *ctx.original, ctx.calib, Rng(seed));
    for (const std::string& g : grid) {
      try {
        CombineConfig cc = ctx.combine;
        cc.boundary_t = std::stoll(g);
        const EvalReport rep = eval_with_scheme(ctx, cal.params, cc, orig_preds);
        emit(g, seed, &rep);
      } catch (const std::exception& e) {
        warn("sweep point " + g + " failed: " + e.what());
        emit(g, seed, nullptr);
      }
    }
    return csv.str();
  }

  for (const std::string& g : grid) {
    const std::uint64_t seed = Rng::derive(ctx.seed, to_string(kind) + ":" + g);
    try {
      CalibConfig cfg = ctx.calib;
      switch (kind) {
        case SweepKind::kLr:
          cfg.schedule.lr_init = std::stod(g);
          break;
        case SweepKind::kLayers:
          cfg.layers = calib_layers_from_string(g);
          break;
        case SweepKind::kHeadInit:
          cfg.head_init = head_init_from_string(g);
          break;
        default:
          throw std::logic_error("unreachable");
      }
      const TrainResult cal = calibrate(*ctx.train, *ctx.original, cfg, Rng(seed));
      const EvalReport rep = eval_with_scheme(ctx, cal.params, ctx.combine, orig_preds);
      emit(g, seed, &rep);
    } catch (const std::exception& e) {
      warn("sweep point " + g + " failed: " + e.what());
      emit(g, seed, nullptr);
    }
  }
  return csv.str();
}

}  // namespace ltcal
