#pragma once

#include <cstdint>
#include <string>

#include "cck/arm_dynamics.hpp"
#include "cck/mpc.hpp"

namespace cck {

struct DictConfig {
  int num_rbf = 200;
  double width_frac = 0.6;
  int knn = 8;
  int kmeans_subsample = 20000;  // states subsampled for k-means
};

struct DataGenConfig {
  int episodes = 200;  // alternating autonomous / forced
  int steps = 500;
  double excite_mag = 20.0;      // N*m, zero-order-hold uniform torques
  int hold_steps = 50;           // plant steps per held excitation sample
  Vec2 theta_lo{0.189, -2.562};  // initial joint-angle box
  Vec2 theta_hi{1.816, -0.385};
  double theta_dot_mag = 2.0;    // rad/s
  double deflection_mag = 0.05;  // initial gear deflection, rad
  double holdout_fraction = 0.2; // episode-based holdout share
};

struct FitConfig {
  // Absolute ridge = ridge_scale * trace(Z' Z) of the lifted training Gram;
  // the same absolute value is shared by all model variants.
  double ridge_scale = 1e-8;
};

struct BenchConfig {
  Vec2 center{1.2, 0.4};
  std::vector<double> radii_cm{5.0, 25.0, 40.0};
  double period = 5.0;  // s per revolution
  Elbow elbow = Elbow::Down;
  double settle = 0.25;  // s excluded from the mean error
  double hybrid_radius_cm = 25.0;
  int hist_bins = 60;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int workers = 1;
  PlantParams plant;
  DictConfig dict;
  DataGenConfig data;
  FitConfig fit;
  MpcConfig mpc;
  BenchConfig bench;
};

// Loads JSON, applying defaults for missing keys; throws ConfigInvalid naming
// the offending field, ParseError on malformed JSON, IoError on read failure.
RunConfig load_config(const std::string& path);
RunConfig config_from_json_text(const std::string& text);

// Effective config echoed back (defaults filled in), canonical form.
std::string config_to_json_text(const RunConfig& cfg);

// FNV-1a hash of the canonical JSON text; embedded in artifact provenance.
std::uint64_t config_hash(const RunConfig& cfg);

void validate(const RunConfig& cfg);  // throws ConfigInvalid

}  // namespace cck
