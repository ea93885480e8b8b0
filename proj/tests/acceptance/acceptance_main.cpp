// Acceptance suite: one criterion per check, one PASS/FAIL line each.
// Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

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

namespace fs = std::filesystem;
using namespace ltcal;
using Clock = std::chrono::steady_clock;

namespace {

struct Harness {
  int failures = 0;
  void run(const std::string& name, const std::function<bool(std::string&)>& fn) {
    std::string detail;
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "PASS " : "FAIL ") << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << '\n';
    if (!ok) ++failures;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

bool bitwise_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

double bin_ap(const EvalReport& r, std::size_t b) {
  return b < r.ap_bins.size() && !std::isnan(r.ap_bins[b]) ? r.ap_bins[b] : 0.0;
}

// Independent all-point-interpolation AP: O(n^2) prefix enumeration with an
// explicit suffix max. Deliberately separate from the library implementation.
double brute_force_ap(const std::vector<double>& scores, const std::vector<char>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::size_t total = 0;
  for (const char p : positive) total += p;
  std::vector<double> prec(n);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    hits += positive[order[k]];
    prec[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!positive[order[k]]) continue;
    double best = 0.0;
    for (std::size_t j = k; j < n; ++j) best = std::max(best, prec[j]);
    ap += best;
  }
  return ap / static_cast<double>(total);
}

SynthDataset balanced_dataset(int num_classes, std::int64_t per_class, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_classes = num_classes;
  cfg.feature_dim = 6;
  cfg.law = FrequencyLaw::kExplicit;
  cfg.explicit_counts.assign(static_cast<std::size_t>(num_classes), per_class);
  cfg.seed = seed;
  return generate(cfg);
}

const std::vector<std::string>& experiments() {
  static const std::vector<std::string> names = repro_experiment_names();
  return names;
}

}  // namespace

int main() {
  set_quiet(true);
  Harness h;

  // ---- criterion 1: gradient correctness ----------------------------------
  h.run("criterion 1: gradient check < 1e-4 across losses (20 seeds)", [](std::string& d) {
    const Clock::time_point t0 = Clock::now();
    double worst = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng(1000 + seed);
      const HeadParams params = HeadParams::random_init({8, 24, 24, 7}, rng);
      SampleBatch batch;
      for (int i = 0; i < 12; ++i) {
        std::vector<double> f(8);
        for (double& x : f) x = rng.normal();
        batch.add(f, static_cast<int>(rng.below(7)));
      }
      ClassStats stats;
      stats.instance_counts = {2, 20, 200, 2000, 16, 1};
      stats.image_counts = {2, 15, 80, 400, 10, 1};
      for (const LossKind kind : {LossKind::kCrossEntropy, LossKind::kReweight,
                                  LossKind::kFocal, LossKind::kMargin}) {
        LossConfig cfg;
        cfg.kind = kind;
        worst = std::max(worst, grad_check(params, batch, cfg, &stats));
      }
    }
    const double secs = seconds_since(t0);
    d = "max rel err " + fmt(worst) + ", " + fmt(secs) + " s";
    return worst < 1e-4 && secs < 60.0;
  });

  // ---- criterion 2: loss reductions ----------------------------------------
  h.run("criterion 2: focal(0), margin(0), reweight(equal) match CE to 1e-12",
        [](std::string& d) {
          Rng rng(2024);
          ClassStats stats;
          stats.instance_counts.assign(9, 77);
          stats.image_counts.assign(9, 30);
          LossConfig focal_cfg;
          focal_cfg.kind = LossKind::kFocal;
          focal_cfg.gamma = 0.0;
          LossConfig margin_cfg;
          margin_cfg.kind = LossKind::kMargin;
          margin_cfg.margin_c = 0.0;
          LossConfig rw_cfg;
          rw_cfg.kind = LossKind::kReweight;
          rw_cfg.reweight_numerator = 77.0;
          double worst = 0.0;
          for (int i = 0; i < 1000; ++i) {
            std::vector<double> logits(10);
            for (double& y : logits) y = rng.normal(0.0, 3.0);
            std::vector<double> probs(10);
            softmax(logits, probs);
            const int label = static_cast<int>(rng.below(10));
            const double ce = loss_ce(probs, label);
            worst = std::max(worst,
                             std::abs(sample_loss(focal_cfg, probs, logits, label, &stats) - ce));
            worst = std::max(worst,
                             std::abs(sample_loss(margin_cfg, probs, logits, label, &stats) - ce));
            worst = std::max(worst,
                             std::abs(sample_loss(rw_cfg, probs, logits, label, &stats) - ce));
          }
          d = "max deviation " + fmt(worst * 1e12) + "e-12";
          return worst < 1e-12;
        });

  // ---- criterion 3: calibration loss is the mean per-proposal CE -----------
  h.run("criterion 3: batch loss equals the arithmetic mean of CE terms",
        [](std::string& d) {
          Rng rng(3);
          double worst = 0.0;
          for (int trial = 0; trial < 20; ++trial) {
            const HeadParams head = HeadParams::random_init({5, 9, 6}, rng);
            SampleBatch batch;
            // hand-built groups: sizes 2 and 1 plus 3 background
            const std::vector<int> labels{2, 2, 4, 0, 0, 0};
            for (const int label : labels) {
              std::vector<double> f(5);
              for (double& x : f) x = rng.normal();
              batch.add(f, label);
            }
            double mean = 0.0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
              std::vector<double> logits, probs;
              forward(head, batch.row(i), logits, probs);
              mean += loss_ce(probs, batch.labels[i]);
            }
            mean /= static_cast<double>(batch.size());
            const LossConfig ce;
            worst = std::max(worst, std::abs(batch_loss(head, batch, ce, nullptr) - mean));
          }
          d = "max deviation " + fmt(worst * 1e12) + "e-12";
          return worst < 1e-12;
        });

  // ---- criterion 4: routing exactness and monotonicity ---------------------
  h.run("criterion 4: dual-head routing is bitwise and monotone in T",
        [](std::string& d) {
          Rng rng(4);
          for (int trial = 0; trial < 50; ++trial) {
            const int C = 2 + static_cast<int>(rng.below(20));
            ClassStats stats;
            for (int j = 0; j < C; ++j) {
              const std::int64_t n = static_cast<std::int64_t>(rng.below(2000));
              stats.instance_counts.push_back(n);
              stats.image_counts.push_back(n > 0 ? 1 : 0);
            }
            PredictionVector cal;
            PredictionVector orig;
            for (int z = 0; z <= C; ++z) {
              cal.scores.push_back(rng.uniform01());
              orig.scores.push_back(rng.uniform01());
            }
            std::vector<char> was_cal(static_cast<std::size_t>(C) + 1, 0);
            for (std::int64_t t = 0; t <= 2000; t += 40) {
              CombineConfig cfg;
              cfg.boundary_t = t;
              const PredictionVector out = combine(cal, orig, stats, cfg);
              for (int z = 1; z <= C; ++z) {
                const bool from_cal = stats.instance_counts[static_cast<std::size_t>(z - 1)] <= t;
                if (!bitwise_equal(out[z], from_cal ? cal[z] : orig[z])) {
                  d = "routing mismatch at z=" + std::to_string(z);
                  return false;
                }
                if (was_cal[static_cast<std::size_t>(z)] && !from_cal) {
                  d = "monotonicity violated at z=" + std::to_string(z);
                  return false;
                }
                was_cal[static_cast<std::size_t>(z)] = from_cal;
              }
            }
          }
          return true;
        });

  // ---- criterion 5: bi-level sampler uniformity ----------------------------
  h.run("criterion 5: bi-level class marginal uniform over 1e4 batches",
        [](std::string& d) {
          const SynthDataset ds = balanced_dataset(100, 40, 555);
          SamplerConfig cfg;
          cfg.classes_per_batch = 16;
          cfg.seed = 556;
          BilevelSampler sampler(ds, cfg);
          std::vector<double> hits(101, 0.0);
          const int batches = 10000;
          for (int b = 0; b < batches; ++b) {
            const CalBatch batch = sampler.next_batch();
            if (batch.sampled_classes.size() != 16) {
              d = "batch dropped a class";
              return false;
            }
            for (std::size_t g = 0; g < batch.class_groups.size(); ++g) {
              for (const std::size_t p : batch.class_groups[g])
                if (ds.proposals[p].assigned_label != batch.sampled_classes[g]) {
                  d = "label membership violated";
                  return false;
                }
              hits[static_cast<std::size_t>(batch.sampled_classes[g])] += 1.0;
            }
            const std::int64_t fg = static_cast<std::int64_t>(batch.foreground_count());
            const std::int64_t bg = static_cast<std::int64_t>(batch.background_group.size());
            if (std::llabs(fg - bg) > 1) {
              d = "fg:bg ratio violated (" + std::to_string(fg) + ":" + std::to_string(bg) + ")";
              return false;
            }
          }
          const double expect = batches * 16.0 / 100.0;
          double chi2 = 0.0;
          for (int c = 1; c <= 100; ++c) {
            const double diff = hits[static_cast<std::size_t>(c)] - expect;
            chi2 += diff * diff / expect;
          }
          d = "chi2 " + fmt(chi2) + " < 134.6416 (df=99, p=0.01)";
          return chi2 < 134.64161685578915;
        });

  // ---- criterion 6: repeat-factor semantics --------------------------------
  h.run("criterion 6: repeat factors exact; inflation iff a class is rare",
        [](std::string& d) {
          const double t = 0.001;
          if (repeat_factor(t, t) != 1.0) {
            d = "r(t) != 1";
            return false;
          }
          if (repeat_factor(t / 4.0, t) != 2.0) {
            d = "r(t/4) != 2";
            return false;
          }
          const SynthDataset balanced = balanced_dataset(6, 40, 600);
          SamplerConfig above;
          above.repeat_threshold = 1e-9;  // every f(c) >= t
          RepeatFactorBatcher no_inflation(balanced, above, Rng(601));
          if (no_inflation.expected_epoch_inflation() != 0.0 ||
              no_inflation.last_epoch_inflation() != 0) {
            d = "inflation with all f >= t";
            return false;
          }
          SynthConfig tail_cfg;
          tail_cfg.num_classes = 10;
          tail_cfg.feature_dim = 4;
          tail_cfg.law = FrequencyLaw::kExplicit;
          tail_cfg.explicit_counts = {500, 500, 500, 500, 500, 3, 3, 3, 3, 3};
          tail_cfg.seed = 602;
          const SynthDataset tail = generate(tail_cfg);
          SamplerConfig below;
          below.repeat_threshold = 0.05;
          RepeatFactorBatcher inflated(tail, below, Rng(603));
          d = "expected inflation " + fmt(inflated.expected_epoch_inflation());
          return inflated.expected_epoch_inflation() > 0.0;
        });

  // ---- criterion 7: evaluation oracle --------------------------------------
  h.run("criterion 7: props-gt AP exactly 1; AP matches brute force to 1e-12",
        [](std::string& d) {
          const SynthDataset train = balanced_dataset(8, 25, 700);
          const EvalReport oracle = props_gt_oracle(train, train.stats,
                                                    BinScheme::instance_bins(),
                                                    BinScheme::image_sets());
          for (int c = 1; c <= 8; ++c)
            if (oracle.per_class_ap[static_cast<std::size_t>(c - 1)] != 1.0) {
              d = "oracle AP != 1";
              return false;
            }
          Rng rng(701);
          double worst = 0.0;
          for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + static_cast<int>(rng.below(49));
            PredictionSet preds;
            std::vector<int> labels;
            std::vector<double> scores;
            std::vector<char> positive;
            bool any_pos = false;
            for (int i = 0; i < n; ++i) {
              const double s = static_cast<double>(rng.below(6)) / 6.0;
              PredictionVector p;
              p.scores = {1.0 - s, s};
              preds.proposal_ids.push_back(i);
              preds.predictions.push_back(std::move(p));
              const bool pos = rng.bernoulli(0.35);
              any_pos |= pos;
              labels.push_back(pos ? 1 : 0);
              scores.push_back(s);
              positive.push_back(pos);
            }
            if (!any_pos) {
              labels[0] = 1;
              positive[0] = 1;
            }
            const double got = per_class_ap(preds, labels, 1);
            const double want = brute_force_ap(scores, positive);
            worst = std::max(worst, std::abs(got - want));
          }
          d = "max deviation " + fmt(worst * 1e12) + "e-12";
          return worst < 1e-12;
        });

  // ---- criteria 8-13: end-to-end experiments -------------------------------
  const fs::path root = fs::temp_directory_path() / "ltcal_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path dir_a = root / "run_a";
  const fs::path dir_b = root / "run_b";

  std::map<std::string, ReproResult> runs;
  std::map<std::string, double> run_secs;
  for (const std::string& name : experiments()) {
    const Clock::time_point t0 = Clock::now();
    runs[name] = run_repro(name, RunConfig{}, dir_a);
    run_secs[name] = seconds_since(t0);
  }

  const auto verdict = [&](const std::string& exp, const std::string& name) {
    for (const auto& [vname, pass] : runs.at(exp).verdict_list)
      if (vname == name) return pass;
    throw std::runtime_error("missing verdict " + name + " in " + exp);
  };

  h.run("criterion 8: fig1c oracle dominance and head bias, under 5 min",
        [&](std::string& d) {
          d = fmt(run_secs["fig1c"]) + " s";
          return verdict("fig1c", "oracle_dominates_trained_on_every_bin") &&
                 verdict("fig1c", "classification_bias_present_ap1_below_ap4") &&
                 run_secs["fig1c"] < 300.0;
        });

  h.run("criterion 9: table3 calibration orderings, under 10 min",
        [&](std::string& d) {
          d = fmt(run_secs["table3"]) + " s";
          return verdict("table3", "tail_ap1_gain_at_least_5_points") &&
                 verdict("table3", "head_ap4_drops_after_calibration") &&
                 verdict("table3", "dual_recovers_head_ap4") &&
                 verdict("table3", "dual_overall_at_least_original") &&
                 run_secs["table3"] < 600.0;
        });

  h.run("criterion 10: table7 combining-scheme orderings", [&](std::string& d) {
    d = fmt(run_secs["table7"]) + " s";
    return verdict("table7", "sel_at_least_avg") &&
           verdict("table7", "avg_at_least_orig") &&
           verdict("table7", "sel_at_least_cal_only");
  });

  h.run("criterion 11: fig4c boundary plateau and best-T dominance",
        [&](std::string& d) {
          d = fmt(run_secs["fig4c"]) + " s";
          return verdict("fig4c", "plateau_middle_half_within_2_points") &&
                 verdict("fig4c", "best_T_beats_both_single_heads");
        });

  // ---- criterion 12: COCO-LT subsampler ------------------------------------
  h.run("criterion 12: long-tail subsampler intervals and invariants",
        [](std::string& d) {
          SynthConfig cfg;
          cfg.num_classes = 20;
          cfg.feature_dim = 4;
          cfg.law = FrequencyLaw::kExplicit;
          cfg.explicit_counts.assign(20, 800);
          cfg.seed = 1200;
          const SynthDataset ds = generate(cfg);
          const SynthDataset sub = subsample_coco_lt(ds, 4, 1201);
          sub.validate();
          if (sub.to_json().dump() != subsample_coco_lt(ds, 4, 1201).to_json().dump()) {
            d = "not deterministic";
            return false;
          }
          const double scale = 800.0 / 8.0e4;
          std::int64_t totals[5] = {0, 0, 0, 0, 0};
          for (int j = 1; j <= 20; ++j) {
            const int subset = (j - 1) / 5 + 1;
            totals[subset] += sub.stats.instance_counts[static_cast<std::size_t>(j - 1)];
            if (sub.stats.instance_counts[static_cast<std::size_t>(j - 1)] >
                ds.stats.instance_counts[static_cast<std::size_t>(j - 1)]) {
              d = "count increased";
              return false;
            }
          }
          if (totals[1] != 5 * 800) {
            d = "subset 1 touched";
            return false;
          }
          for (int i = 2; i <= 4; ++i) {
            const double lo = 8.0 * std::pow(10.0, 4 - i) * scale;
            const double hi = 8.0 * std::pow(10.0, 5 - i) * scale;
            const double avail = 5.0 * 800.0;
            const double kept = static_cast<double>(totals[i]);
            if (kept >= avail) continue;  // clamped to availability
            if (!(kept > lo && kept < hi)) {
              d = "subset " + std::to_string(i) + " total " + fmt(kept) +
                  " outside (" + fmt(lo) + "," + fmt(hi) + ")";
              return false;
            }
          }
          return true;
        });

  // ---- criterion 13: byte-identical reruns ----------------------------------
  h.run("criterion 13: every experiment reruns byte-identically", [&](std::string& d) {
    for (const std::string& name : experiments()) run_repro(name, RunConfig{}, dir_b);
    for (const std::string& name : experiments()) {
      const fs::path a = dir_a / name;
      const fs::path b = dir_b / name;
      std::vector<std::string> files;
      for (const fs::directory_entry& e : fs::directory_iterator(a))
        if (e.is_regular_file()) files.push_back(e.path().filename().string());
      std::sort(files.begin(), files.end());
      for (const std::string& f : files) {
        if (!fs::exists(b / f)) {
          d = name + "/" + f + " missing in rerun";
          return false;
        }
        if (hash_file(a / f) != hash_file(b / f)) {
          d = name + "/" + f + " differs between runs";
          return false;
        }
      }
    }
    d = std::to_string(experiments().size()) + " experiments compared";
    return true;
  });

  std::cout << (h.failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(h.failures))
            << '\n';
  return h.failures;
}
