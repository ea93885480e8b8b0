#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ltcal/combine.hpp"
#include "ltcal/head.hpp"
#include "ltcal/sampling.hpp"
#include "ltcal/synth.hpp"
#include "ltcal/trainer.hpp"
#include "ltcal/types.hpp"

namespace ltcal {

/// Flat "key = value" configuration with [section] headers covering every
/// knob of the pipeline. Unknown sections or keys are rejected; every run
/// writes its fully-resolved configuration next to its outputs.
struct RunConfig {
  // [run]
  std::uint64_t seed = 1;

  // [synth]
  SynthConfig synth;  // synth.seed is assigned from the run seed at use time
  bool coco_lt = false;
  int coco_lt_subsets = 4;

  // [eval]
  int val_instances_per_class = 30;
  std::vector<std::int64_t> instance_bin_edges = {10, 100, 1000};
  std::vector<std::int64_t> image_set_edges = {10, 100};

  // [train]
  Schedule train_schedule = Schedule::standard_default();
  int batch_images = 8;
  int hidden = 64;
  int depth = 3;  // number of linear layers in the head

  // [sampler]
  SamplerConfig sampler;

  // [loss]
  LossConfig loss;

  // [calib]
  HeadInit head_init = HeadInit::k3fcFt;
  CalibLayers calib_layers = CalibLayers::kAll;
  LossKind calib_loss_kind = LossKind::kCrossEntropy;
  Schedule calib_schedule = Schedule::calibration_default();
  double calib_schedule_scale = 1.0;
  bool use_bilevel = true;
  int random_proposal_batch = 128;

  // [combine]
  CombineConfig combine;

  static RunConfig parse_file(const std::filesystem::path& path);
  static RunConfig parse_string(const std::string& text);

  /// Canonical INI rendering of every key with its resolved value.
  std::string resolved_text() const;
  void save_resolved(const std::filesystem::path& path) const;

  void validate() const;

  // Assembled module configs.
  std::vector<int> head_dims() const;
  SynthConfig synth_config(std::uint64_t dataset_seed) const;
  BinScheme instance_bins() const;
  BinScheme image_sets() const;
  CalibConfig calib_config() const;
};

}  // namespace ltcal
