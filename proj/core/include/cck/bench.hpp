#pragma once

#include <map>
#include <string>
#include <vector>

#include "cck/config.hpp"
#include "cck/koopman_fit.hpp"
#include "cck/mpc.hpp"

namespace cck {

// One revolution sampled at the plant dt; joint references by IK per sample,
// joint velocities by central differences (periodic).
ReferenceTrajectory make_circle_reference(const Vec2& center, double radius,
                                          double period, double dt, Elbow elbow,
                                          const ArmParams& arm);

// Alternating autonomous / forced episodes from random initial states;
// deterministic under seed.
DataSet generate_training_data(const PlantParams& plant, const DataGenConfig& cfg,
                               std::uint64_t seed);

// Episode-based train/holdout split (last `holdout_fraction` of episodes).
struct SplitDataSet {
  DataSet train;
  DataSet holdout;
};
SplitDataSet split_dataset(const DataSet& data, double holdout_fraction);

// Dictionary from a deterministic without-replacement subsample of the
// training states, so independent fit invocations share the same lifting.
Dictionary make_dictionary(const DataSet& train, const DictConfig& dict_cfg,
                           std::uint64_t seed);

struct FittedModels {
  LinearLiftedModel cck;
  LinearLiftedModel dmdc;
  BilinearLiftedModel bilinear;
  double ridge = 0.0;  // shared absolute ridge used by all fits
};

// Dictionary construction + the three fits on the training split, sharing one
// absolute ridge value derived from the lifted-state Gram trace.
FittedModels fit_all(const DataSet& train, const PlantParams& plant,
                     const DictConfig& dict_cfg, double ridge_scale,
                     std::uint64_t dict_seed, FitDiagnostics* diag = nullptr);

struct ComparisonRow {
  std::string variant;
  double radius_cm = 0.0;
  double mean_err_cm = 0.0;
  bool diverged = false;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::vector<TrackingReport> tracking;  // same order as rows
};

// The Table-1 style grid: each variant at each radius. Runs are independent
// and are fanned out over `workers` threads in a fixed result order.
ComparisonReport run_comparison(const RunConfig& cfg, const FittedModels& models);

// DMDc versus the hybrid (A from DMDc, B/structure from CCK) at one radius.
ComparisonReport run_hybrid(const RunConfig& cfg, const LinearLiftedModel& dmdc,
                            const LinearLiftedModel& cck);

LinearLiftedModel make_hybrid(const LinearLiftedModel& dmdc,
                              const LinearLiftedModel& cck);

struct HistogramSet {
  std::vector<std::string> variants;
  std::vector<Histogram> hists;  // shared edges
  std::vector<double> medians;   // per-variant median one-step error
};

HistogramSet prediction_histograms(const FittedModels& models, const DataSet& holdout,
                                   int nbins);

// CSV artifacts; exact column orders are part of the interface.
void write_tracking_csv(const std::string& path, const TrackingReport& report);
void write_summary_csv(const std::string& path, const std::vector<ComparisonRow>& rows);
void write_hist_csv(const std::string& path, const HistogramSet& hists);

// Standalone SVG overlay: reference circles plus achieved paths per variant.
void write_overlay_svg(const std::string& path,
                       const std::vector<ReferenceTrajectory>& refs,
                       const std::vector<TrackingReport>& reports);

}  // namespace cck
