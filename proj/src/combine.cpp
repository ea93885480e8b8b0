#include "ltcal/combine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ltcal {

std::string to_string(CombineScheme scheme) {
  switch (scheme) {
    case CombineScheme::kOrigOnly: return "orig_only";
    case CombineScheme::kCalOnly: return "cal_only";
    case CombineScheme::kAvg: return "avg";
    case CombineScheme::kDet: return "det";
    case CombineScheme::kSel: return "sel";
    case CombineScheme::kSelThr: return "sel_thr";
    case CombineScheme::kSelScale: return "sel_scale";
    case CombineScheme::kSelNorm: return "sel_norm";
  }
  throw std::logic_error("bad CombineScheme");
}

CombineScheme combine_scheme_from_string(const std::string& s) {
  if (s == "orig_only" || s == "orig") return CombineScheme::kOrigOnly;
  if (s == "cal_only" || s == "cal") return CombineScheme::kCalOnly;
  if (s == "avg") return CombineScheme::kAvg;
  if (s == "det") return CombineScheme::kDet;
  if (s == "sel") return CombineScheme::kSel;
  if (s == "sel_thr" || s == "sel-thr") return CombineScheme::kSelThr;
  if (s == "sel_scale" || s == "sel-scale") return CombineScheme::kSelScale;
  if (s == "sel_norm" || s == "sel-norm") return CombineScheme::kSelNorm;
  throw std::invalid_argument("unknown combine scheme: " + s);
}

void CombineConfig::validate() const {
  if (boundary_t < 0) throw std::invalid_argument("CombineConfig: T must be >= 0");
  if (!(thr >= 0.0 && thr < 1.0))
    throw std::invalid_argument("CombineConfig: thr must be in [0,1)");
}

namespace {

/// Routed selection: calibrated entry when N_z <= T, original otherwise;
/// background follows cfg.sel_bg.
PredictionVector select(const std::vector<double>& cal, const PredictionVector& p_orig,
                        const ClassStats& stats, const CombineConfig& cfg) {
  PredictionVector out;
  out.scores.resize(cal.size());
  out.scores[0] = cfg.sel_bg == SelBackground::kOrig ? p_orig[0] : cal[0];
  for (int z = 1; z < static_cast<int>(cal.size()); ++z)
    out.scores[static_cast<std::size_t>(z)] =
        stats.instances(z) <= cfg.boundary_t ? cal[static_cast<std::size_t>(z)]
                                             : p_orig[z];
  return out;
}

}  // namespace

PredictionVector combine(const PredictionVector& p_cal, const PredictionVector& p_orig,
                         const ClassStats& stats, const CombineConfig& cfg,
                         double cal_scale) {
  cfg.validate();
  if (p_cal.size() != p_orig.size())
    throw std::invalid_argument("combine: prediction lengths differ");
  if (p_cal.size() != stats.num_classes() + 1)
    throw std::invalid_argument("combine: prediction length does not match class count");
  p_cal.validate();
  p_orig.validate();

  switch (cfg.scheme) {
    case CombineScheme::kOrigOnly:
      return p_orig;
    case CombineScheme::kCalOnly:
      return p_cal;
    case CombineScheme::kAvg: {
      PredictionVector out;
      out.scores.resize(p_cal.scores.size());
      for (std::size_t z = 0; z < out.scores.size(); ++z)
        out.scores[z] = 0.5 * (p_cal.scores[z] + p_orig.scores[z]);
      return out;
    }
    case CombineScheme::kDet: {
      // Boxless stand-in for merging per-head detection lists: per class the
      // union of both heads' ranked candidates, deduped by keeping the higher
      // score.
      PredictionVector out;
      out.scores.resize(p_cal.scores.size());
      out.scores[0] = cfg.sel_bg == SelBackground::kOrig ? p_orig[0] : p_cal[0];
      for (std::size_t z = 1; z < out.scores.size(); ++z)
        out.scores[z] = std::max(p_cal.scores[z], p_orig.scores[z]);
      return out;
    }
    case CombineScheme::kSel:
      return select(p_cal.scores, p_orig, stats, cfg);
    case CombineScheme::kSelThr: {
      std::vector<double> filtered = p_cal.scores;
      for (double& s : filtered)
        if (s < cfg.thr) s = 0.0;
      return select(filtered, p_orig, stats, cfg);
    }
    case CombineScheme::kSelScale: {
      std::vector<double> scaled = p_cal.scores;
      for (double& s : scaled) s *= cal_scale;
      return select(scaled, p_orig, stats, cfg);
    }
    case CombineScheme::kSelNorm: {
      PredictionVector sel = select(p_cal.scores, p_orig, stats, cfg);
      double sum = 0.0;
      for (const double s : sel.scores) sum += s;
      if (sum == 0.0) throw std::invalid_argument("combine: degenerate prediction");
      for (double& s : sel.scores) s /= sum;
      return sel;
    }
  }
  throw std::logic_error("bad CombineScheme");
}

std::vector<PredictionVector> batch_combine(const std::vector<PredictionVector>& cal,
                                            const std::vector<PredictionVector>& orig,
                                            const ClassStats& stats,
                                            const CombineConfig& cfg) {
  cfg.validate();
  if (cal.size() != orig.size())
    throw std::invalid_argument("batch_combine: misaligned prediction sets");

  double cal_scale = 1.0;
  if (cfg.scheme == CombineScheme::kSelScale && !cal.empty()) {
    // Ratio of mean background scores, original over calibrated, once per set.
    double bg_cal = 0.0;
    double bg_orig = 0.0;
    for (std::size_t i = 0; i < cal.size(); ++i) {
      bg_cal += cal[i][0];
      bg_orig += orig[i][0];
    }
    if (bg_cal > 0.0) cal_scale = bg_orig / bg_cal;
  }

  std::vector<PredictionVector> out;
  out.reserve(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i)
    out.push_back(combine(cal[i], orig[i], stats, cfg, cal_scale));
  return out;
}

}  // namespace ltcal
