#include "ltcal/runconfig.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ltcal {

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::int64_t> parse_i64_list(const std::string& v) {
  std::vector<std::int64_t> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoll(tok));
  }
  return out;
}

std::string render_i64_list(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("bad boolean value: " + v);
}

std::string render_double(double v) { return nlohmann::json(v).dump(); }

/// One configurable key: parse from text and render back.
struct KeyDef {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::vector<KeyDef> key_table() {
  std::vector<KeyDef> t;
  const auto add = [&t](std::string section, std::string key,
                        std::function<void(RunConfig&, const std::string&)> set,
                        std::function<std::string(const RunConfig&)> get) {
    t.push_back(KeyDef{std::move(section), std::move(key), std::move(set), std::move(get)});
  };

  add("run", "seed",
      [](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); },
      [](const RunConfig& c) { return std::to_string(c.seed); });

  add("synth", "num_classes",
      [](RunConfig& c, const std::string& v) { c.synth.num_classes = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.num_classes); });
  add("synth", "feature_dim",
      [](RunConfig& c, const std::string& v) { c.synth.feature_dim = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.feature_dim); });
  add("synth", "law",
      [](RunConfig& c, const std::string& v) { c.synth.law = frequency_law_from_string(v); },
      [](const RunConfig& c) { return to_string(c.synth.law); });
  add("synth", "powerlaw_alpha",
      [](RunConfig& c, const std::string& v) { c.synth.powerlaw_alpha = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.synth.powerlaw_alpha); });
  add("synth", "exponential_beta",
      [](RunConfig& c, const std::string& v) { c.synth.exponential_beta = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.synth.exponential_beta); });
  add("synth", "explicit_counts",
      [](RunConfig& c, const std::string& v) { c.synth.explicit_counts = parse_i64_list(v); },
      [](const RunConfig& c) { return render_i64_list(c.synth.explicit_counts); });
  add("synth", "max_head_instances",
      [](RunConfig& c, const std::string& v) { c.synth.max_instances_per_head_class = std::stoll(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.max_instances_per_head_class); });
  add("synth", "instances_per_image_min",
      [](RunConfig& c, const std::string& v) { c.synth.instances_per_image_min = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.instances_per_image_min); });
  add("synth", "instances_per_image_max",
      [](RunConfig& c, const std::string& v) { c.synth.instances_per_image_max = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.instances_per_image_max); });
  add("synth", "prototype_spread",
      [](RunConfig& c, const std::string& v) { c.synth.prototype_spread = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.synth.prototype_spread); });
  add("synth", "within_class_noise",
      [](RunConfig& c, const std::string& v) { c.synth.within_class_noise = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.synth.within_class_noise); });
  add("synth", "iou_beta_a",
      [](RunConfig& c, const std::string& v) { c.synth.iou_beta_a = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.synth.iou_beta_a); });
  add("synth", "iou_beta_b",
      [](RunConfig& c, const std::string& v) { c.synth.iou_beta_b = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.synth.iou_beta_b); });
  add("synth", "background_per_image_min",
      [](RunConfig& c, const std::string& v) { c.synth.background_per_image_min = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.background_per_image_min); });
  add("synth", "background_per_image_max",
      [](RunConfig& c, const std::string& v) { c.synth.background_per_image_max = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.synth.background_per_image_max); });
  add("synth", "coco_lt",
      [](RunConfig& c, const std::string& v) { c.coco_lt = parse_bool(v); },
      [](const RunConfig& c) { return c.coco_lt ? "true" : "false"; });
  add("synth", "coco_lt_subsets",
      [](RunConfig& c, const std::string& v) { c.coco_lt_subsets = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.coco_lt_subsets); });

  add("eval", "val_instances_per_class",
      [](RunConfig& c, const std::string& v) { c.val_instances_per_class = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.val_instances_per_class); });
  add("eval", "instance_bin_edges",
      [](RunConfig& c, const std::string& v) { c.instance_bin_edges = parse_i64_list(v); },
      [](const RunConfig& c) { return render_i64_list(c.instance_bin_edges); });
  add("eval", "image_set_edges",
      [](RunConfig& c, const std::string& v) { c.image_set_edges = parse_i64_list(v); },
      [](const RunConfig& c) { return render_i64_list(c.image_set_edges); });

  add("train", "total_steps",
      [](RunConfig& c, const std::string& v) { c.train_schedule.total_steps = std::stoll(v); },
      [](const RunConfig& c) { return std::to_string(c.train_schedule.total_steps); });
  add("train", "lr",
      [](RunConfig& c, const std::string& v) { c.train_schedule.lr_init = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.train_schedule.lr_init); });
  add("train", "decay_steps",
      [](RunConfig& c, const std::string& v) { c.train_schedule.decay_steps = parse_i64_list(v); },
      [](const RunConfig& c) { return render_i64_list(c.train_schedule.decay_steps); });
  add("train", "decay_factor",
      [](RunConfig& c, const std::string& v) { c.train_schedule.decay_factor = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.train_schedule.decay_factor); });
  add("train", "batch_images",
      [](RunConfig& c, const std::string& v) { c.batch_images = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.batch_images); });
  add("train", "hidden",
      [](RunConfig& c, const std::string& v) { c.hidden = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.hidden); });
  add("train", "depth",
      [](RunConfig& c, const std::string& v) { c.depth = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.depth); });

  add("sampler", "classes_per_batch",
      [](RunConfig& c, const std::string& v) { c.sampler.classes_per_batch = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.sampler.classes_per_batch); });
  add("sampler", "images_per_class",
      [](RunConfig& c, const std::string& v) { c.sampler.images_per_class = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.sampler.images_per_class); });
  add("sampler", "fg_parts",
      [](RunConfig& c, const std::string& v) { c.sampler.fg_parts = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.sampler.fg_parts); });
  add("sampler", "bg_parts",
      [](RunConfig& c, const std::string& v) { c.sampler.bg_parts = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.sampler.bg_parts); });
  add("sampler", "repeat_threshold",
      [](RunConfig& c, const std::string& v) { c.sampler.repeat_threshold = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.sampler.repeat_threshold); });
  add("sampler", "repeat_exponent",
      [](RunConfig& c, const std::string& v) { c.sampler.repeat_exponent = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.sampler.repeat_exponent); });
  add("sampler", "random_batch_images",
      [](RunConfig& c, const std::string& v) { c.sampler.random_batch_images = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.sampler.random_batch_images); });
  add("sampler", "sample_with_replacement",
      [](RunConfig& c, const std::string& v) { c.sampler.sample_with_replacement = parse_bool(v); },
      [](const RunConfig& c) { return c.sampler.sample_with_replacement ? "true" : "false"; });

  add("loss", "reweight_numerator",
      [](RunConfig& c, const std::string& v) { c.loss.reweight_numerator = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.reweight_numerator); });
  add("loss", "clamp_lo",
      [](RunConfig& c, const std::string& v) { c.loss.weight_clamp_lo = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.weight_clamp_lo); });
  add("loss", "clamp_hi",
      [](RunConfig& c, const std::string& v) { c.loss.weight_clamp_hi = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.weight_clamp_hi); });
  add("loss", "background_weight",
      [](RunConfig& c, const std::string& v) { c.loss.background_weight = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.background_weight); });
  add("loss", "gamma",
      [](RunConfig& c, const std::string& v) { c.loss.gamma = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.gamma); });
  add("loss", "focal_alpha",
      [](RunConfig& c, const std::string& v) { c.loss.focal_alpha = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.focal_alpha); });
  add("loss", "margin_c",
      [](RunConfig& c, const std::string& v) { c.loss.margin_c = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.loss.margin_c); });

  add("calib", "head_init",
      [](RunConfig& c, const std::string& v) { c.head_init = head_init_from_string(v); },
      [](const RunConfig& c) { return to_string(c.head_init); });
  add("calib", "layers",
      [](RunConfig& c, const std::string& v) { c.calib_layers = calib_layers_from_string(v); },
      [](const RunConfig& c) { return to_string(c.calib_layers); });
  add("calib", "loss",
      [](RunConfig& c, const std::string& v) { c.calib_loss_kind = loss_kind_from_string(v); },
      [](const RunConfig& c) { return to_string(c.calib_loss_kind); });
  add("calib", "total_steps",
      [](RunConfig& c, const std::string& v) { c.calib_schedule.total_steps = std::stoll(v); },
      [](const RunConfig& c) { return std::to_string(c.calib_schedule.total_steps); });
  add("calib", "lr",
      [](RunConfig& c, const std::string& v) { c.calib_schedule.lr_init = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.calib_schedule.lr_init); });
  add("calib", "decay_steps",
      [](RunConfig& c, const std::string& v) { c.calib_schedule.decay_steps = parse_i64_list(v); },
      [](const RunConfig& c) { return render_i64_list(c.calib_schedule.decay_steps); });
  add("calib", "decay_factor",
      [](RunConfig& c, const std::string& v) { c.calib_schedule.decay_factor = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.calib_schedule.decay_factor); });
  add("calib", "schedule_scale",
      [](RunConfig& c, const std::string& v) { c.calib_schedule_scale = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.calib_schedule_scale); });
  add("calib", "use_bilevel",
      [](RunConfig& c, const std::string& v) { c.use_bilevel = parse_bool(v); },
      [](const RunConfig& c) { return c.use_bilevel ? "true" : "false"; });
  add("calib", "random_proposal_batch",
      [](RunConfig& c, const std::string& v) { c.random_proposal_batch = std::stoi(v); },
      [](const RunConfig& c) { return std::to_string(c.random_proposal_batch); });

  add("combine", "scheme",
      [](RunConfig& c, const std::string& v) { c.combine.scheme = combine_scheme_from_string(v); },
      [](const RunConfig& c) { return to_string(c.combine.scheme); });
  add("combine", "boundary_t",
      [](RunConfig& c, const std::string& v) { c.combine.boundary_t = std::stoll(v); },
      [](const RunConfig& c) { return std::to_string(c.combine.boundary_t); });
  add("combine", "thr",
      [](RunConfig& c, const std::string& v) { c.combine.thr = std::stod(v); },
      [](const RunConfig& c) { return render_double(c.combine.thr); });
  add("combine", "sel_bg",
      [](RunConfig& c, const std::string& v) {
        if (v == "orig") c.combine.sel_bg = SelBackground::kOrig;
        else if (v == "cal") c.combine.sel_bg = SelBackground::kCal;
        else throw std::invalid_argument("bad sel_bg value: " + v);
      },
      [](const RunConfig& c) {
        return c.combine.sel_bg == SelBackground::kOrig ? "orig" : "cal";
      });

  return t;
}

}  // namespace

RunConfig RunConfig::parse_string(const std::string& text) {
  RunConfig cfg;
  const std::vector<KeyDef> table = key_table();
  std::map<std::string, const KeyDef*> lookup;
  for (const KeyDef& k : table) lookup[k.section + "." + k.key] = &k;

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = lookup.find(section + "." + key);
    if (it == lookup.end())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + section + "." + key + "'");
    try {
      it->second->set(cfg, value);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad value for '" +
                                  section + "." + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

std::string RunConfig::resolved_text() const {
  const std::vector<KeyDef> table = key_table();
  std::string out;
  std::string section;
  for (const KeyDef& k : table) {
    if (k.section != section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.key + " = " + k.get(*this) + "\n";
  }
  return out;
}

void RunConfig::save_resolved(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << resolved_text();
}

void RunConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("RunConfig: depth must be >= 1");
  if (hidden < 1) throw std::invalid_argument("RunConfig: hidden must be >= 1");
  if (val_instances_per_class < 1)
    throw std::invalid_argument("RunConfig: val_instances_per_class must be >= 1");
  if (batch_images < 1) throw std::invalid_argument("RunConfig: batch_images must be >= 1");
  train_schedule.validate();
  calib_schedule.validate();
  sampler.validate();
  loss.validate();
  combine.validate();
  instance_bins().validate();
  image_sets().validate();
  if (!(calib_schedule_scale > 0.0))
    throw std::invalid_argument("RunConfig: schedule_scale must be > 0");
}

std::vector<int> RunConfig::head_dims() const {
  std::vector<int> dims;
  dims.push_back(synth.feature_dim);
  for (int l = 0; l < depth - 1; ++l) dims.push_back(hidden);
  dims.push_back(synth.num_classes + 1);
  return dims;
}

SynthConfig RunConfig::synth_config(std::uint64_t dataset_seed) const {
  SynthConfig c = synth;
  c.seed = dataset_seed;
  return c;
}

BinScheme RunConfig::instance_bins() const {
  return BinScheme{instance_bin_edges, BinBasis::kInstances};
}

BinScheme RunConfig::image_sets() const {
  return BinScheme{image_set_edges, BinBasis::kImages};
}

CalibConfig RunConfig::calib_config() const {
  CalibConfig c;
  c.head_init = head_init;
  c.layers = calib_layers;
  c.loss = loss;
  c.loss.kind = calib_loss_kind;
  c.schedule = calib_schedule.scaled(calib_schedule_scale);
  c.sampler = sampler;
  c.rand_hidden = hidden;
  c.use_bilevel = use_bilevel;
  c.random_proposal_batch = random_proposal_batch;
  return c;
}

}  // namespace ltcal
