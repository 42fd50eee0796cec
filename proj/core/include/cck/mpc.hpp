#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cck/arm_dynamics.hpp"
#include "cck/koopman_fit.hpp"

namespace cck {

struct MpcConfig {
  int horizon = 50;        // control intervals in the preview window
  int stride = 10;         // plant steps per control interval (zero-order hold)
  double q_theta = 100.0;  // tracking weight on theta observables
  double q_theta_dot = 0.0;
  double r_weight = 1e-3;  // input weight
  double u_max = 20.0;     // N*m box bound
  double qp_tol = 1e-8;
  int qp_max_iter = 2000;
};

struct QpProblem {
  Eigen::MatrixXd H;  // symmetric PSD
  Eigen::VectorXd g;
  Eigen::VectorXd lb, ub;
};

struct QpResult {
  Eigen::VectorXd u;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;  // false = MaxIterExceeded, best iterate returned
};

// Accelerated projected gradient on 1/2 u'Hu + g'u over the box; KKT residual
// is the projected-gradient fixpoint norm |u - clip(u - grad J)|.
QpResult solve_qp_box(const QpProblem& qp, double tol = 1e-8, int max_iter = 2000,
                      const Eigen::VectorXd* warm_start = nullptr);

// Condensed strided MPC for a lifted linear model z+ = A z + B u. The
// reference enters through the selector S picking selected observables of z;
// weights w apply per selected output.
class LinearMpc {
 public:
  LinearMpc(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& S,
            const Eigen::VectorXd& w, const MpcConfig& cfg);

  // ref_window: horizon x ny, selected-output reference at the end of each
  // control interval.
  QpProblem build_condensed_qp(const Eigen::VectorXd& z0,
                               const Eigen::MatrixXd& ref_window) const;

  // Solves the QP (warm started from the previous solution) and returns the
  // first input, clipped to the box.
  Eigen::VectorXd step(const Eigen::VectorXd& z0, const Eigen::MatrixXd& ref_window);

  void reset_warm_start() { have_warm_ = false; }

  int num_inputs() const { return static_cast<int>(B_.cols()); }
  const Eigen::MatrixXd& strided_A() const { return As_; }
  const Eigen::MatrixXd& strided_B() const { return Bs_; }

 private:
  Eigen::MatrixXd B_;
  Eigen::MatrixXd S_;
  Eigen::VectorXd w_;
  MpcConfig cfg_;
  Eigen::MatrixXd As_, Bs_;                // stride-compressed dynamics
  std::vector<Eigen::MatrixXd> SA_;        // S As^k, k = 1..horizon
  std::vector<Eigen::MatrixXd> impulse_;   // S As^j Bs, j = 0..horizon-1
  Eigen::MatrixXd G_;                      // stacked impulse-response map u -> outputs
  Eigen::MatrixXd H_;                      // constant condensed Hessian
  Eigen::VectorXd warm_;
  bool have_warm_ = false;
};

// Successive linearization around the nominal trajectory predicted with the
// previous input plan: per interval k the effective input matrix is
// B + [N_1 z_k | N_2 z_k].
class BilinearMpc {
 public:
  BilinearMpc(const BilinearLiftedModel& model, const Eigen::MatrixXd& S,
              const Eigen::VectorXd& w, const MpcConfig& cfg);

  Eigen::VectorXd step(const Eigen::VectorXd& z0, const Eigen::MatrixXd& ref_window);
  void reset_warm_start() { have_warm_ = false; }

 private:
  Eigen::MatrixXd A_, B_;
  std::array<Eigen::MatrixXd, 2> N_;
  Eigen::MatrixXd S_;
  Eigen::VectorXd w_;
  MpcConfig cfg_;
  Eigen::MatrixXd As_, Bs_accum_;        // A^stride and sum_{i<stride} A^i
  std::vector<Eigen::MatrixXd> SA_;      // S As^k
  Eigen::VectorXd warm_;
  bool have_warm_ = false;
};

// Default joint-space tracking selector: outputs [theta; theta_dot] of z.
Eigen::MatrixXd joint_selector(int lifted_dim);
Eigen::VectorXd joint_weights(const MpcConfig& cfg);

// Spec-level wrappers on lifted models.
QpProblem build_condensed_qp(const LinearLiftedModel& model, const Eigen::VectorXd& z0,
                             const Eigen::MatrixXd& ref_window, const MpcConfig& cfg);
Eigen::VectorXd mpc_step(const LinearLiftedModel& model, const PlantState& x_measured,
                         const Eigen::MatrixXd& ref_window, const MpcConfig& cfg);
Eigen::VectorXd bilinear_mpc_step(const BilinearLiftedModel& model,
                                  const PlantState& x_measured,
                                  const Eigen::MatrixXd& ref_window,
                                  const MpcConfig& cfg);

struct ReferenceTrajectory {
  Eigen::VectorXd t;           // n samples at plant dt
  Eigen::MatrixXd xy;          // n x 2, end-effector reference
  Eigen::MatrixXd theta;       // n x 2, IK joint reference (unwrapped)
  Eigen::MatrixXd theta_dot;   // n x 2
  Vec2 center{0, 0};
  double radius = 0.0;
  double period = 0.0;
  Elbow elbow = Elbow::Down;
  double dt = 1e-3;

  Eigen::Index size() const { return t.size(); }
};

struct TrackingReport {
  std::string variant;
  Eigen::VectorXd t;
  Eigen::MatrixXd ref_xy;   // n x 2
  Eigen::MatrixXd xy;       // n x 2 achieved
  Eigen::VectorXd err;      // n, end-effector error (m)
  Eigen::MatrixXd u;        // n x 2 applied torque
  double mean_err = 0.0;    // mean over samples with t >= settle
  bool diverged = false;
};

// Closed loop against the true plant: re-lift measured state each control
// interval, hold the first input over `stride` plant steps. The mean error
// excludes an initial settle window. The reference is treated as periodic
// for preview beyond its end.
TrackingReport run_closed_loop(const PlantParams& plant, const LinearLiftedModel& model,
                               const ReferenceTrajectory& ref, const MpcConfig& cfg,
                               double settle_s = 0.25);
TrackingReport run_closed_loop(const PlantParams& plant, const BilinearLiftedModel& model,
                               const ReferenceTrajectory& ref, const MpcConfig& cfg,
                               double settle_s = 0.25);

}  // namespace cck
