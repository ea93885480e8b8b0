#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "ltcal/combine.hpp"
#include "ltcal/eval.hpp"
#include "ltcal/head.hpp"
#include "ltcal/log.hpp"
#include "ltcal/repro.hpp"
#include "ltcal/runconfig.hpp"
#include "ltcal/sampling.hpp"
#include "ltcal/synth.hpp"
#include "ltcal/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace ltcal;

namespace {

// JSON-heavy structures cross the boundary as dicts via dumps/loads.
py::object json_to_py(const nlohmann::json& j) {
  py::module_ pyjson = py::module_::import("json");
  return pyjson.attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Long-tail classifier calibration laboratory";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>())
      .def_static("derive", &Rng::derive)
      .def("uniform01", &Rng::uniform01)
      .def("normal", &Rng::normal, py::arg("mean") = 0.0, py::arg("stddev") = 1.0)
      .def("beta", &Rng::beta);

  py::class_<ClassStats>(m, "ClassStats")
      .def(py::init<>())
      .def_readwrite("instance_counts", &ClassStats::instance_counts)
      .def_readwrite("image_counts", &ClassStats::image_counts)
      .def("validate", &ClassStats::validate)
      .def("num_classes", &ClassStats::num_classes);

  py::enum_<BinBasis>(m, "BinBasis")
      .value("instances", BinBasis::kInstances)
      .value("images", BinBasis::kImages);

  py::class_<BinScheme>(m, "BinScheme")
      .def(py::init<>())
      .def_readwrite("edges", &BinScheme::edges)
      .def_readwrite("basis", &BinScheme::basis)
      .def_static("instance_bins", &BinScheme::instance_bins)
      .def_static("image_sets", &BinScheme::image_sets);

  m.def("assign_bin", &assign_bin);

  py::class_<ProposalRecord>(m, "ProposalRecord")
      .def(py::init<>())
      .def_readwrite("image_id", &ProposalRecord::image_id)
      .def_readwrite("features", &ProposalRecord::features)
      .def_readwrite("iou_with_gt", &ProposalRecord::iou_with_gt)
      .def_readwrite("gt_class", &ProposalRecord::gt_class)
      .def_readwrite("gt_slot", &ProposalRecord::gt_slot)
      .def_readwrite("assigned_label", &ProposalRecord::assigned_label);

  m.def("match_proposal", &match_proposal);

  py::enum_<FrequencyLaw>(m, "FrequencyLaw")
      .value("powerlaw", FrequencyLaw::kPowerLaw)
      .value("exponential", FrequencyLaw::kExponential)
      .value("explicit", FrequencyLaw::kExplicit);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("num_classes", &SynthConfig::num_classes)
      .def_readwrite("feature_dim", &SynthConfig::feature_dim)
      .def_readwrite("law", &SynthConfig::law)
      .def_readwrite("powerlaw_alpha", &SynthConfig::powerlaw_alpha)
      .def_readwrite("exponential_beta", &SynthConfig::exponential_beta)
      .def_readwrite("explicit_counts", &SynthConfig::explicit_counts)
      .def_readwrite("max_instances_per_head_class", &SynthConfig::max_instances_per_head_class)
      .def_readwrite("prototype_spread", &SynthConfig::prototype_spread)
      .def_readwrite("within_class_noise", &SynthConfig::within_class_noise)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<ImageRecord>(m, "ImageRecord")
      .def_readonly("id", &ImageRecord::id)
      .def_readonly("instances", &ImageRecord::instances);

  py::class_<SynthDataset>(m, "SynthDataset")
      .def_readonly("config", &SynthDataset::config)
      .def_readonly("stats", &SynthDataset::stats)
      .def_readonly("images", &SynthDataset::images)
      .def_readonly("proposals", &SynthDataset::proposals)
      .def_readonly("prototypes", &SynthDataset::prototypes)
      .def("validate", &SynthDataset::validate)
      .def("save", &SynthDataset::save)
      .def_static("load", &SynthDataset::load);

  m.def("generate", &generate);
  m.def("generate_like", &generate_like);
  m.def("subsample_coco_lt", &subsample_coco_lt);
  m.def("law_counts", &law_counts);
  m.def("summarize", [](const SynthDataset& ds) { return json_to_py(summarize(ds)); });

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("classes_per_batch", &SamplerConfig::classes_per_batch)
      .def_readwrite("images_per_class", &SamplerConfig::images_per_class)
      .def_readwrite("fg_parts", &SamplerConfig::fg_parts)
      .def_readwrite("bg_parts", &SamplerConfig::bg_parts)
      .def_readwrite("repeat_threshold", &SamplerConfig::repeat_threshold)
      .def_readwrite("repeat_exponent", &SamplerConfig::repeat_exponent)
      .def_readwrite("seed", &SamplerConfig::seed);

  py::class_<CalBatch>(m, "CalBatch")
      .def_readonly("sampled_classes", &CalBatch::sampled_classes)
      .def_readonly("class_groups", &CalBatch::class_groups)
      .def_readonly("background_group", &CalBatch::background_group)
      .def("foreground_count", &CalBatch::foreground_count);

  py::class_<BilevelSampler>(m, "BilevelSampler")
      .def(py::init<const SynthDataset&, SamplerConfig>(), py::keep_alive<1, 2>())
      .def("next_batch", &BilevelSampler::next_batch)
      .def("sampleable_classes", &BilevelSampler::sampleable_classes);

  m.def("repeat_factor", &repeat_factor, py::arg("class_image_frequency"), py::arg("t"),
        py::arg("exponent") = 0.5);

  py::enum_<LossKind>(m, "LossKind")
      .value("ce", LossKind::kCrossEntropy)
      .value("reweight", LossKind::kReweight)
      .value("focal", LossKind::kFocal)
      .value("margin", LossKind::kMargin);

  py::class_<LossConfig>(m, "LossConfig")
      .def(py::init<>())
      .def_readwrite("kind", &LossConfig::kind)
      .def_readwrite("reweight_numerator", &LossConfig::reweight_numerator)
      .def_readwrite("background_weight", &LossConfig::background_weight)
      .def_readwrite("gamma", &LossConfig::gamma)
      .def_readwrite("focal_alpha", &LossConfig::focal_alpha)
      .def_readwrite("margin_c", &LossConfig::margin_c);

  py::class_<HeadParams>(m, "HeadParams")
      .def_readonly("dims", &HeadParams::dims)
      .def("param_count", &HeadParams::param_count)
      .def("save", &HeadParams::save)
      .def_static("load", &HeadParams::load)
      .def_static("random_init", [](const std::vector<int>& dims, std::uint64_t seed) {
        Rng rng(seed);
        return HeadParams::random_init(dims, rng);
      });

  py::class_<PredictionVector>(m, "PredictionVector")
      .def_readonly("scores", &PredictionVector::scores);

  m.def("predict", [](const HeadParams& params, const std::vector<double>& features) {
    return predict(params, features);
  });
  m.def("loss_ce", &loss_ce);
  m.def("loss_focal", &loss_focal);
  m.def("loss_margin", &loss_margin);
  m.def("loss_reweight", &loss_reweight);
  m.def("grad_check",
        [](const HeadParams& params, const std::vector<std::vector<double>>& features,
           const std::vector<int>& labels, LossKind kind, const ClassStats& stats) {
          SampleBatch batch;
          for (std::size_t i = 0; i < features.size(); ++i)
            batch.add(features[i], labels[i]);
          LossConfig cfg;
          cfg.kind = kind;
          return grad_check(params, batch, cfg, &stats);
        });

  py::class_<Schedule>(m, "Schedule")
      .def(py::init<>())
      .def_readwrite("total_steps", &Schedule::total_steps)
      .def_readwrite("lr_init", &Schedule::lr_init)
      .def_readwrite("decay_steps", &Schedule::decay_steps)
      .def_readwrite("decay_factor", &Schedule::decay_factor)
      .def_static("standard_default", &Schedule::standard_default)
      .def_static("calibration_default", &Schedule::calibration_default);

  py::enum_<HeadInit>(m, "HeadInit")
      .value("two_fc_rand", HeadInit::k2fcRand)
      .value("three_fc_rand", HeadInit::k3fcRand)
      .value("three_fc_ft", HeadInit::k3fcFt);

  py::enum_<CalibLayers>(m, "CalibLayers")
      .value("last", CalibLayers::kLast)
      .value("last2", CalibLayers::kLast2)
      .value("all", CalibLayers::kAll);

  py::class_<CalibConfig>(m, "CalibConfig")
      .def(py::init<>())
      .def_readwrite("head_init", &CalibConfig::head_init)
      .def_readwrite("layers", &CalibConfig::layers)
      .def_readwrite("loss", &CalibConfig::loss)
      .def_readwrite("schedule", &CalibConfig::schedule)
      .def_readwrite("sampler", &CalibConfig::sampler)
      .def_readwrite("use_bilevel", &CalibConfig::use_bilevel);

  py::class_<TrainLogEntry>(m, "TrainLogEntry")
      .def_readonly("step", &TrainLogEntry::step)
      .def_readonly("lr", &TrainLogEntry::lr)
      .def_readonly("loss", &TrainLogEntry::loss);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log);

  m.def("train_standard",
        [](const SynthDataset& ds, const std::vector<int>& dims, const Schedule& sched,
           int batch_images, std::uint64_t seed) {
          return train_standard(ds, dims, sched, batch_images, Rng(seed));
        });
  m.def("calibrate",
        [](const SynthDataset& ds, const HeadParams& original, const CalibConfig& cfg,
           std::uint64_t seed) { return calibrate(ds, original, cfg, Rng(seed)); });
  m.def("calibrate_with_alternative",
        [](const SynthDataset& ds, const HeadParams& original, LossKind kind,
           const CalibConfig& cfg, std::uint64_t seed) {
          return calibrate_with_alternative(ds, original, kind, cfg, Rng(seed));
        });
  m.def("predict_dataset", &predict_dataset);
  m.def("props_gt_predictions", &props_gt_predictions);
  m.def("accuracy", &accuracy);

  py::class_<PredictionSet>(m, "PredictionSet")
      .def(py::init<>())
      .def_readwrite("proposal_ids", &PredictionSet::proposal_ids)
      .def_readwrite("predictions", &PredictionSet::predictions)
      .def("save", &PredictionSet::save)
      .def_static("load", &PredictionSet::load);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("per_class_ap", &EvalReport::per_class_ap)
      .def_readonly("ap_bins", &EvalReport::ap_bins)
      .def_readonly("bin_counts", &EvalReport::bin_counts)
      .def_readonly("ap_sets", &EvalReport::ap_sets)
      .def_readonly("set_counts", &EvalReport::set_counts)
      .def_readonly("overall_ap", &EvalReport::overall_ap)
      .def_readonly("evaluable_count", &EvalReport::evaluable_count)
      .def_readonly("unseen_count", &EvalReport::unseen_count)
      .def("to_dict", [](const EvalReport& r) { return json_to_py(r.to_json()); })
      .def("save", &EvalReport::save)
      .def_static("load", &EvalReport::load);

  m.def("per_class_ap", &per_class_ap);
  m.def("evaluate", &evaluate);
  m.def("props_gt_oracle", &props_gt_oracle);
  m.def("compare", [](const EvalReport& a, const EvalReport& b) {
    return json_to_py(compare(a, b));
  });

  py::enum_<CombineScheme>(m, "CombineScheme")
      .value("orig_only", CombineScheme::kOrigOnly)
      .value("cal_only", CombineScheme::kCalOnly)
      .value("avg", CombineScheme::kAvg)
      .value("det", CombineScheme::kDet)
      .value("sel", CombineScheme::kSel)
      .value("sel_thr", CombineScheme::kSelThr)
      .value("sel_scale", CombineScheme::kSelScale)
      .value("sel_norm", CombineScheme::kSelNorm);

  py::class_<CombineConfig>(m, "CombineConfig")
      .def(py::init<>())
      .def_readwrite("scheme", &CombineConfig::scheme)
      .def_readwrite("boundary_t", &CombineConfig::boundary_t)
      .def_readwrite("thr", &CombineConfig::thr);

  m.def("combine", &combine, py::arg("p_cal"), py::arg("p_orig"), py::arg("stats"),
        py::arg("cfg"), py::arg("cal_scale") = 1.0);
  m.def("batch_combine", &batch_combine);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse_file", &RunConfig::parse_file)
      .def_static("parse_string", &RunConfig::parse_string)
      .def("resolved_text", &RunConfig::resolved_text)
      .def_readwrite("seed", &RunConfig::seed);

  m.def("repro_experiment_names", &repro_experiment_names);
  m.def(
      "run_repro",
      [](const std::string& experiment, const fs::path& out, const RunConfig& cfg,
         std::optional<std::uint64_t> seed) {
        ReproResult r = run_repro(experiment, cfg, out, seed);
        py::dict d;
        d["experiment"] = r.experiment;
        d["seed"] = r.seed;
        d["all_pass"] = r.all_pass;
        d["dir"] = r.dir.string();
        py::list verdicts;
        for (const auto& [name, pass] : r.verdict_list) {
          py::dict v;
          v["name"] = name;
          v["pass"] = pass;
          verdicts.append(v);
        }
        d["verdicts"] = verdicts;
        return d;
      },
      py::arg("experiment"), py::arg("out"), py::arg("cfg") = RunConfig{},
      py::arg("seed") = std::nullopt);

  m.def("set_quiet", &set_quiet);
}
