#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "cck/arm_dynamics.hpp"
#include "cck/lifting.hpp"

namespace cck {

// Training triples (x_t, u_t, x_{t+1}); rows grouped by episode, never
// crossing episode boundaries.
struct DataSet {
  Eigen::MatrixXd X;   // n x 8
  Eigen::MatrixXd U;   // n x 2
  Eigen::MatrixXd Xp;  // n x 8
  std::vector<int> episode;  // episode id per triple
  std::uint64_t seed = 0;
  double dt = 1e-3;

  Eigen::Index size() const { return X.rows(); }
  int num_episodes() const;
  // Rows whose episode id satisfies keep(episode).
  DataSet filter_episodes(const std::function<bool(int)>& keep) const;
};

enum class Variant { CCK, DMDc, Hybrid, Bilinear };
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct LinearLiftedModel {
  Eigen::MatrixXd A;  // d x d
  Eigen::MatrixXd B;  // d x 2
  Dictionary dict;
  Variant variant = Variant::DMDc;
  double dt = 1e-3;
};

// z+ = A z + B u + sum_i u_i N[i] z
struct BilinearLiftedModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  std::array<Eigen::MatrixXd, 2> N;
  Dictionary dict;
  double dt = 1e-3;
};

struct FitDiagnostics {
  double gram_cond = 0.0;
  bool ill_conditioned = false;  // warning only; the fit is still returned
};

// Subtracts the exact Euler input contribution dt * I^-1 tau_m from the
// phi_dot components of x_{t+1}, turning forced triples into samples of the
// associated autonomous system.
DataSet shift_to_autonomous(const DataSet& data, const ActuatorParams& act);

// Ridge least squares A = argmin sum |z' - A z|^2 + ridge |A|_F^2
// via normal equations; ridge is an absolute value here.
Eigen::MatrixXd fit_autonomous_A(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Zp,
                                 double ridge, FitDiagnostics* diag = nullptr);

// Joint (A, B) least squares over the stacked regressor [z; u].
LinearLiftedModel fit_dmdc(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                           const Eigen::MatrixXd& Zp, const Dictionary& dict, double dt,
                           double ridge, FitDiagnostics* diag = nullptr);

// (A, B, N_i) least squares over [z; u; u (x) z].
BilinearLiftedModel fit_bilinear(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& Zp, const Dictionary& dict,
                                 double dt, double ridge, FitDiagnostics* diag = nullptr);

// Control-Coherent model: A from the autonomous-equivalent fit with the phi
// and phi_dot rows replaced by the exact Euler actuator coefficients; B is
// the exact input block dt * I^-1 on the phi_dot rows, zero elsewhere.
LinearLiftedModel assemble_cck(const Eigen::MatrixXd& A_auto, const ActuatorParams& act,
                               const Dictionary& dict);

// Koopman direct encoding A = Q R^-1 with Monte-Carlo quadrature over a box;
// generic in the lifting map so low-dimensional analytic cases are testable.
// Throws SingularGram when R is numerically singular after regularization.
Eigen::MatrixXd direct_encoding(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& lift_fn,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n_samples,
    std::uint64_t seed, double ridge = 0.0);

// Direct encoding under the empirical measure of explicit sample points
// (algebraically identical to EDMD on the same pairs when ridge = 0).
Eigen::MatrixXd direct_encoding_samples(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& lift_fn,
    const Eigen::MatrixXd& samples, double ridge = 0.0);

// Per-sample state-space one-step prediction errors |unlift(predict) - x'|.
Eigen::VectorXd one_step_errors(const LinearLiftedModel& model, const DataSet& data);
Eigen::VectorXd one_step_errors(const BilinearLiftedModel& model, const DataSet& data);

struct Histogram {
  Eigen::VectorXd edges;   // nbins + 1, partitioning [0, max]
  Eigen::VectorXi counts;  // nbins
};

// Fixed shared edges so histograms are comparable across models.
Histogram make_histogram(const Eigen::VectorXd& errors, const Eigen::VectorXd& edges);
Eigen::VectorXd histogram_edges(double max_value, int nbins);

double median(Eigen::VectorXd v);

}  // namespace cck
