#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltcal/types.hpp"

namespace ltcal {

enum class CombineScheme {
  kOrigOnly,
  kCalOnly,
  kAvg,
  kDet,      // rank-level union of the two heads (boxless approximation)
  kSel,      // route by training count: calibrated head when N_z <= T
  kSelThr,   // zero small calibrated scores, then sel
  kSelScale, // rescale calibrated scores by the background-score ratio, then sel
  kSelNorm,  // sel, then normalize by the summed score
};

std::string to_string(CombineScheme scheme);
CombineScheme combine_scheme_from_string(const std::string& s);

enum class SelBackground { kOrig, kCal };

struct CombineConfig {
  CombineScheme scheme = CombineScheme::kSel;
  std::int64_t boundary_t = 300;  // head/tail boundary on training instances
  double thr = 0.05;              // sel_thr filter
  SelBackground sel_bg = SelBackground::kOrig;

  void validate() const;
};

/// Combines one proposal's predictions from the calibrated and original
/// heads. `cal_scale` is the evaluation-set background-score ratio used by
/// sel_scale (1.0 elsewhere); batch_combine computes it.
///
/// sel routing is exact: for z >= 1 the output entry is bitwise the
/// designated head's entry. The combined vector is generally unnormalized.
PredictionVector combine(const PredictionVector& p_cal, const PredictionVector& p_orig,
                         const ClassStats& stats, const CombineConfig& cfg,
                         double cal_scale = 1.0);

/// Applies combine() across an aligned pair of prediction sets. sel_scale's
/// background ratio is computed once over the whole set.
std::vector<PredictionVector> batch_combine(const std::vector<PredictionVector>& cal,
                                            const std::vector<PredictionVector>& orig,
                                            const ClassStats& stats,
                                            const CombineConfig& cfg);

}  // namespace ltcal
