#include "ltcal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ltcal {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

nlohmann::json PredictionSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < proposal_ids.size(); ++i)
    arr.push_back({{"proposal_id", proposal_ids[i]},
                   {"scores", predictions[i].scores}});
  return arr;
}

PredictionSet PredictionSet::from_json(const nlohmann::json& j) {
  PredictionSet s;
  for (const nlohmann::json& e : j) {
    s.proposal_ids.push_back(e.at("proposal_id").get<std::int64_t>());
    PredictionVector p;
    p.scores = e.at("scores").get<std::vector<double>>();
    s.predictions.push_back(std::move(p));
  }
  return s;
}

void PredictionSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

PredictionSet PredictionSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

double per_class_ap(const PredictionSet& preds, const std::vector<int>& labels, int c) {
  const std::size_t n = preds.size();
  if (labels.size() != n)
    throw std::invalid_argument("per_class_ap: labels/predictions size mismatch");

  std::size_t positives = 0;
  for (const int l : labels)
    if (l == c) ++positives;
  if (positives == 0) return kNaN;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = preds.predictions[a][c];
    const double sb = preds.predictions[b][c];
    if (sa != sb) return sa > sb;
    return preds.proposal_ids[a] < preds.proposal_ids[b];
  });

  // Precision at every rank, then the envelope from the bottom up; the AP is
  // the sum of envelope precisions at true-positive ranks divided by the
  // number of positives.
  std::vector<double> precision(n);
  std::vector<char> is_tp(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    is_tp[k] = labels[order[k]] == c;
    if (is_tp[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  double running_max = 0.0;
  double ap = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    running_max = std::max(running_max, precision[k]);
    if (is_tp[k]) ap += running_max;
  }
  return ap / static_cast<double>(positives);
}

EvalReport evaluate(const PredictionSet& preds, const SynthDataset& eval_dataset,
                    const ClassStats& train_stats, const BinScheme& instance_bins,
                    const BinScheme& image_sets) {
  instance_bins.validate();
  image_sets.validate();
  if (instance_bins.basis != BinBasis::kInstances)
    throw std::invalid_argument("evaluate: instance_bins must use the instance basis");
  if (image_sets.basis != BinBasis::kImages)
    throw std::invalid_argument("evaluate: image_sets must use the image basis");

  const std::size_t n = eval_dataset.proposals.size();
  // Coverage check; report the missing ids.
  std::vector<char> seen(n, 0);
  for (const std::int64_t id : preds.proposal_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= n)
      throw std::invalid_argument("evaluate: prediction for unknown proposal id " +
                                  std::to_string(id));
    seen[static_cast<std::size_t>(id)] = 1;
  }
  if (preds.size() != n || std::count(seen.begin(), seen.end(), char{1}) != static_cast<std::ptrdiff_t>(n)) {
    std::string missing;
    int shown = 0;
    for (std::size_t i = 0; i < n && shown < 10; ++i)
      if (!seen[i]) {
        missing += (shown ? "," : "") + std::to_string(i);
        ++shown;
      }
    throw std::invalid_argument("evaluate: missing predictions for proposal ids [" +
                                missing + (shown == 10 ? ",..." : "") + "]");
  }

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < preds.size(); ++i)
    labels[i] = eval_dataset.proposals[static_cast<std::size_t>(preds.proposal_ids[i])]
                    .assigned_label;

  const int C = train_stats.num_classes();
  EvalReport rep;
  rep.per_class_ap.assign(static_cast<std::size_t>(C), kNaN);
  rep.evaluable.assign(static_cast<std::size_t>(C), false);
  rep.bin_edges = instance_bins.edges;
  rep.set_edges = image_sets.edges;
  rep.ap_bins.assign(static_cast<std::size_t>(instance_bins.num_bins()), kNaN);
  rep.bin_counts.assign(static_cast<std::size_t>(instance_bins.num_bins()), 0);
  rep.ap_sets.assign(static_cast<std::size_t>(image_sets.num_bins()), kNaN);
  rep.set_counts.assign(static_cast<std::size_t>(image_sets.num_bins()), 0);

  std::vector<double> bin_sum(static_cast<std::size_t>(instance_bins.num_bins()), 0.0);
  std::vector<double> set_sum(static_cast<std::size_t>(image_sets.num_bins()), 0.0);
  double total = 0.0;

  for (int c = 1; c <= C; ++c) {
    if (train_stats.instances(c) == 0) {
      ++rep.unseen_count;  // never trained; kept out of every average
      continue;
    }
    const double ap = per_class_ap(preds, labels, c);
    if (std::isnan(ap)) continue;  // no positives in the eval set
    rep.per_class_ap[static_cast<std::size_t>(c - 1)] = ap;
    rep.evaluable[static_cast<std::size_t>(c - 1)] = true;
    ++rep.evaluable_count;
    total += ap;
    const std::size_t b = static_cast<std::size_t>(assign_bin(c, train_stats, instance_bins));
    bin_sum[b] += ap;
    rep.bin_counts[b] += 1;
    const std::size_t s = static_cast<std::size_t>(assign_bin(c, train_stats, image_sets));
    set_sum[s] += ap;
    rep.set_counts[s] += 1;
  }

  if (rep.evaluable_count > 0)
    rep.overall_ap = total / static_cast<double>(rep.evaluable_count);
  for (std::size_t b = 0; b < rep.ap_bins.size(); ++b)
    if (rep.bin_counts[b] > 0)
      rep.ap_bins[b] = bin_sum[b] / static_cast<double>(rep.bin_counts[b]);
  for (std::size_t s = 0; s < rep.ap_sets.size(); ++s)
    if (rep.set_counts[s] > 0)
      rep.ap_sets[s] = set_sum[s] / static_cast<double>(rep.set_counts[s]);
  return rep;
}

namespace {
nlohmann::json nullable(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}
double from_nullable(const nlohmann::json& j) {
  if (j.is_null()) return kNaN;
  return j.get<double>();
}
}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t i = 0; i < per_class_ap.size(); ++i)
    per_class.push_back(evaluable[i] ? nlohmann::json(per_class_ap[i])
                                     : nlohmann::json(nullptr));
  nlohmann::json bins = nlohmann::json::array();
  for (const double v : ap_bins) bins.push_back(nullable(v));
  nlohmann::json sets = nlohmann::json::array();
  for (const double v : ap_sets) sets.push_back(nullable(v));
  return nlohmann::json{{"per_class_ap", std::move(per_class)},
                        {"ap_bins", std::move(bins)},
                        {"bin_counts", bin_counts},
                        {"ap_sets", std::move(sets)},
                        {"set_counts", set_counts},
                        {"overall_ap", overall_ap},
                        {"evaluable_count", evaluable_count},
                        {"unseen_count", unseen_count},
                        {"bin_edges", bin_edges},
                        {"set_edges", set_edges}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const nlohmann::json& e : j.at("per_class_ap")) {
    r.per_class_ap.push_back(from_nullable(e));
    r.evaluable.push_back(!e.is_null());
  }
  for (const nlohmann::json& e : j.at("ap_bins")) r.ap_bins.push_back(from_nullable(e));
  r.bin_counts = j.at("bin_counts").get<std::vector<std::int64_t>>();
  for (const nlohmann::json& e : j.at("ap_sets")) r.ap_sets.push_back(from_nullable(e));
  r.set_counts = j.at("set_counts").get<std::vector<std::int64_t>>();
  r.overall_ap = j.at("overall_ap").get<double>();
  r.evaluable_count = j.at("evaluable_count").get<int>();
  r.unseen_count = j.at("unseen_count").get<int>();
  r.bin_edges = j.at("bin_edges").get<std::vector<std::int64_t>>();
  r.set_edges = j.at("set_edges").get<std::vector<std::int64_t>>();
  return r;
}

void EvalReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

std::string EvalReport::csv_header(const std::string& meta_columns) {
  return meta_columns + ",ap1,ap2,ap3,ap4,ap_r,ap_c,ap_f,ap";
}

std::string EvalReport::csv_row(const std::string& meta_values) const {
  std::ostringstream os;
  os << meta_values;
  for (std::size_t b = 0; b < 4; ++b)
    os << ',' << (b < ap_bins.size() && !std::isnan(ap_bins[b]) ? fmt6(ap_bins[b]) : "");
  for (std::size_t s = 0; s < 3; ++s)
    os << ',' << (s < ap_sets.size() && !std::isnan(ap_sets[s]) ? fmt6(ap_sets[s]) : "");
  os << ',' << fmt6(overall_ap);
  return os.str();
}

nlohmann::json compare(const EvalReport& a, const EvalReport& b) {
  if (a.bin_edges != b.bin_edges || a.set_edges != b.set_edges)
    throw std::invalid_argument("compare: reports use different bin schemes");

  const auto delta = [](double x, double y) -> nlohmann::json {
    if (std::isnan(x) || std::isnan(y)) return nullptr;
    return y - x;
  };
  nlohmann::json bin_deltas = nlohmann::json::array();
  for (std::size_t i = 0; i < a.ap_bins.size(); ++i)
    bin_deltas.push_back(delta(a.ap_bins[i], b.ap_bins[i]));
  nlohmann::json set_deltas = nlohmann::json::array();
  for (std::size_t i = 0; i < a.ap_sets.size(); ++i)
    set_deltas.push_back(delta(a.ap_sets[i], b.ap_sets[i]));

  const bool tail_known = !std::isnan(a.ap_bins.front()) && !std::isnan(b.ap_bins.front());
  const bool head_known = !std::isnan(a.ap_bins.back()) && !std::isnan(b.ap_bins.back());
  const double head_delta = head_known ? b.ap_bins.back() - a.ap_bins.back() : kNaN;
  return nlohmann::json{
      {"bin_deltas", std::move(bin_deltas)},
      {"set_deltas", std::move(set_deltas)},
      {"overall_delta", b.overall_ap - a.overall_ap},
      {"verdicts",
       {{"tail_improved", tail_known && b.ap_bins.front() > a.ap_bins.front()},
        {"head_dropped", head_known && head_delta < 0.0},
        {"head_preserved_within_0.02", head_known && std::abs(head_delta) <= 0.02},
        {"overall_improved", b.overall_ap > a.overall_ap}}}};
}

}  // namespace ltcal
