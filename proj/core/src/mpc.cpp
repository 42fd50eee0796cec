#include "cck/mpc.hpp"

#include <cmath>

namespace cck {

namespace {

Eigen::VectorXd clip_box(const Eigen::VectorXd& u, const Eigen::VectorXd& lb,
                         const Eigen::VectorXd& ub) {
  return u.cwiseMax(lb).cwiseMin(ub);
}

double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& u) {
  const Eigen::VectorXd grad = qp.H * u + qp.g;
  return (u - clip_box(u - grad, qp.lb, qp.ub)).norm();
}

}  // namespace

QpResult solve_qp_box(const QpProblem& qp, double tol, int max_iter,
                      const Eigen::VectorXd* warm_start) {
  const Eigen::Index n = qp.g.size();
  QpResult res;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qp.H, Eigen::EigenvaluesOnly);
  const double L = std::max(es.eigenvalues().maxCoeff(), 1e-300);

  Eigen::VectorXd u = warm_start ? clip_box(*warm_start, qp.lb, qp.ub)
                                 : clip_box(Eigen::VectorXd::Zero(n), qp.lb, qp.ub);
  Eigen::VectorXd y = u;
  double tk = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd grad_y = qp.H * y + qp.g;
    const Eigen::VectorXd un = clip_box(y - grad_y / L, qp.lb, qp.ub);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = un + (tk - 1.0) / tn * (un - u);
    u = un;
    tk = tn;
    res.iterations = it + 1;
    res.kkt_residual = kkt_residual(qp, u);
    if (res.kkt_residual <= tol) {
      res.converged = true;
      break;
    }
  }
  res.u = u;
  if (!res.converged) res.kkt_residual = kkt_residual(qp, u);
  return res;
}

Eigen::MatrixXd joint_selector(int lifted_dim) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(4, lifted_dim);
  for (int i = 0; i < 4; ++i) S(i, 4 + i) = 1.0;
  return S;
}

Eigen::VectorXd joint_weights(const MpcConfig& cfg) {
  Eigen::VectorXd w(4);
  w << cfg.q_theta, cfg.q_theta, cfg.q_theta_dot, cfg.q_theta_dot;
  return w;
}

LinearMpc::LinearMpc(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& S, const Eigen::VectorXd& w,
                     const MpcConfig& cfg)
    : B_(B), S_(S), w_(w), cfg_(cfg) {
  const Eigen::Index d = A.rows();
  if (S.cols() != d || w.size() != S.rows())
    throw DimensionMismatch("LinearMpc: selector/weight dimensions inconsistent");
  // Stride-compressed dynamics: one control interval = `stride` model steps
  // under zero-order hold.
  As_ = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < cfg.stride; ++i) {
    accum += As_;
    As_ = A * As_;
  }
  Bs_ = accum * B;

  const int H = cfg.horizon;
  SA_.resize(H);
  Eigen::MatrixXd SAk = S;
  for (int k = 0; k < H; ++k) {
    SAk = SAk * As_;
    SA_[k] = SAk;  // S As^(k+1)
  }
  impulse_.resize(H);
  impulse_[0] = S * Bs_;
  for (int j = 1; j < H; ++j) impulse_[j] = SA_[j - 1] * Bs_;

  const int ny = static_cast<int>(S.rows());
  const int m = static_cast<int>(B.cols());
  const int nu = H * m;
  Eigen::MatrixXd G(H * ny, nu);
  G.setZero();
  for (int k = 0; k < H; ++k)
    for (int j = 0; j <= k; ++j)
      G.block(k * ny, j * m, ny, m) = impulse_[k - j];
  H_ = G.transpose() * w.replicate(H, 1).asDiagonal() * G;
  H_.diagonal().array() += cfg.r_weight;
  G_ = std::move(G);
}

QpProblem LinearMpc::build_condensed_qp(const Eigen::VectorXd& z0,
                                        const Eigen::MatrixXd& ref_window) const {
  const int H = cfg_.horizon;
  const int ny = static_cast<int>(S_.rows());
  if (ref_window.rows() != H || ref_window.cols() != ny)
    throw DimensionMismatch("build_condensed_qp: ref_window must be horizon x ny");
  Eigen::VectorXd dev(H * ny);
  for (int k = 0; k < H; ++k)
    dev.segment(k * ny, ny) = SA_[k] * z0 - ref_window.row(k).transpose();
  QpProblem qp;
  qp.H = H_;
  qp.g = G_.transpose() * (w_.replicate(H, 1).cwiseProduct(dev));
  const int nu = H * num_inputs();
  qp.lb = Eigen::VectorXd::Constant(nu, -cfg_.u_max);
  qp.ub = Eigen::VectorXd::Constant(nu, cfg_.u_max);
  return qp;
}

Eigen::VectorXd LinearMpc::step(const Eigen::VectorXd& z0,
                                const Eigen::MatrixXd& ref_window) {
  const QpProblem qp = build_condensed_qp(z0, ref_window);
  const QpResult res =
      solve_qp_box(qp, cfg_.qp_tol, cfg_.qp_max_iter, have_warm_ ? &warm_ : nullptr);
  const int m = num_inputs();
  // Shift the plan one interval for the next warm start.
  warm_ = res.u;
  warm_.head(warm_.size() - m) = res.u.tail(res.u.size() - m);
  have_warm_ = true;
  return res.u.head(m).cwiseMax(-cfg_.u_max).cwiseMin(cfg_.u_max);
}

BilinearMpc::BilinearMpc(const BilinearLiftedModel& model, const Eigen::MatrixXd& S,
                         const Eigen::VectorXd& w, const MpcConfig& cfg)
    : A_(model.A), B_(model.B), N_(model.N), S_(S), w_(w), cfg_(cfg) {
  const Eigen::Index d = A_.rows();
  As_ = Eigen::MatrixXd::Identity(d, d);
  Bs_accum_ = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < cfg.stride; ++i) {
    Bs_accum_ += As_;
    As_ = A_ * As_;
  }
  const int H = cfg.horizon;
  SA_.resize(H + 1);
  SA_[0] = S;  // S As^0
  for (int k = 1; k <= H; ++k) SA_[k] = SA_[k - 1] * As_;
}

Eigen::VectorXd BilinearMpc::step(const Eigen::VectorXd& z0,
                                  const Eigen::MatrixXd& ref_window) {
  const int H = cfg_.horizon;
  const int ny = static_cast<int>(S_.rows());
  const int m = static_cast<int>(B_.cols());
  const int nu = H * m;
  if (ref_window.rows() != H || ref_window.cols() != ny)
    throw DimensionMismatch("BilinearMpc::step: ref_window must be horizon x ny");
  if (!have_warm_) warm_ = Eigen::VectorXd::Zero(nu);

  // Nominal trajectory under the previous plan; linearize the bilinear input
  // effect at the interval-start state.
  std::vector<Eigen::VectorXd> znom(H);
  std::vector<Eigen::MatrixXd> Beff(H);
  Eigen::VectorXd z = z0;
  for (int k = 0; k < H; ++k) {
    znom[k] = z;
    Eigen::MatrixXd Bk = B_;
    for (int i = 0; i < m; ++i) Bk.col(i) += N_[i] * z;
    Beff[k] = Bs_accum_ * Bk;
    z = As_ * z + Beff[k] * warm_.segment(k * m, m);
  }

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(H * ny, nu);
  for (int j = 0; j < H; ++j) {
    const Eigen::MatrixXd SB0 = S_ * Beff[j];
    for (int k = j; k < H; ++k)
      G.block(k * ny, j * m, ny, m) = k == j ? SB0 : SA_[k - j] * Beff[j];
  }
  Eigen::VectorXd dev(H * ny);
  for (int k = 0; k < H; ++k)
    dev.segment(k * ny, ny) = SA_[k + 1] * z0 - ref_window.row(k).transpose();

  QpProblem qp;
  qp.H = G.transpose() * w_.replicate(H, 1).asDiagonal() * G;
  qp.H.diagonal().array() += cfg_.r_weight;
  qp.g = G.transpose() * (w_.replicate(H, 1).cwiseProduct(dev));
  qp.lb = Eigen::VectorXd::Constant(nu, -cfg_.u_max);
  qp.ub = Eigen::VectorXd::Constant(nu, cfg_.u_max);
  const QpResult res = solve_qp_box(qp, cfg_.qp_tol, cfg_.qp_max_iter, &warm_);

  warm_ = res.u;
  warm_.head(nu - m) = res.u.tail(nu - m);
  have_warm_ = true;
  return res.u.head(m).cwiseMax(-cfg_.u_max).cwiseMin(cfg_.u_max);
}

QpProblem build_condensed_qp(const LinearLiftedModel& model, const Eigen::VectorXd& z0,
                             const Eigen::MatrixXd& ref_window, const MpcConfig& cfg) {
  LinearMpc mpc(model.A, model.B, joint_selector(model.dict.lifted_dim()),
                joint_weights(cfg), cfg);
  return mpc.build_condensed_qp(z0, ref_window);
}

Eigen::VectorXd mpc_step(const LinearLiftedModel& model, const PlantState& x_measured,
                         const Eigen::MatrixXd& ref_window, const MpcConfig& cfg) {
  LinearMpc mpc(model.A, model.B, joint_selector(model.dict.lifted_dim()),
                joint_weights(cfg), cfg);
  return mpc.step(lift(x_measured.to_vec(), model.dict), ref_window);
}

Eigen::VectorXd bilinear_mpc_step(const BilinearLiftedModel& model,
                                  const PlantState& x_measured,
                                  const Eigen::MatrixXd& ref_window,
                                  const MpcConfig& cfg) {
  BilinearMpc mpc(model, joint_selector(model.dict.lifted_dim()), joint_weights(cfg),
                  cfg);
  return mpc.step(lift(x_measured.to_vec(), model.dict), ref_window);
}

namespace {

// Shared closed-loop runner; `control` maps (lifted state, ref window) -> u0.
template <typename Controller>
TrackingReport run_loop(const PlantParams& plant, const Dictionary& dict,
                        const std::string& variant, Controller&& control,
                        const ReferenceTrajectory& ref, const MpcConfig& cfg,
                        double settle_s) {
  const Eigen::Index n = ref.size();
  const Eigen::Index steps = n - 1;
  const int H = cfg.horizon, stride = cfg.stride;
  // One period of the reference; preview wraps periodically.
  const Eigen::Index period_steps = steps;

  TrackingReport rep;
  rep.variant = variant;
  rep.t.resize(n);
  rep.ref_xy.resize(n, 2);
  rep.xy.resize(n, 2);
  rep.err.resize(n);
  rep.u.resize(n, 2);

  StateVec x;
  const Vec2 th0 = ref.theta.row(0), thd0 = ref.theta_dot.row(0);
  x << plant.act.gear_ratio.cwiseProduct(th0), plant.act.gear_ratio.cwiseProduct(thd0),
      th0, thd0;

  Eigen::MatrixXd ref_window(H, 4);
  Eigen::Index recorded = 0;
  bool diverged = false;
  for (Eigen::Index i = 0; i < steps && !diverged; i += stride) {
    for (int k = 1; k <= H; ++k) {
      const Eigen::Index idx = (i + static_cast<Eigen::Index>(stride) * k) % period_steps;
      ref_window.row(k - 1) << ref.theta(idx, 0), ref.theta(idx, 1),
          ref.theta_dot(idx, 0), ref.theta_dot(idx, 1);
    }
    const Eigen::VectorXd z0 = lift(x, dict);
    const Eigen::VectorXd u0 = control(z0, ref_window);
    const Vec2 u(u0[0], u0[1]);

    if (i == 0) {
      // initial sample, before any input is applied
      const Vec2 ee0 = forward_kinematics(x.segment<2>(4), plant.arm);
      rep.t[0] = ref.t[0];
      rep.ref_xy.row(0) = ref.xy.row(0);
      rep.xy.row(0) = ee0.transpose();
      rep.err[0] = (ee0.transpose() - ref.xy.row(0)).norm();
      rep.u.row(0) = u.transpose();
      ++recorded;
    }

    const Eigen::Index apply = std::min<Eigen::Index>(stride, steps - i);
    for (Eigen::Index ss = 0; ss < apply; ++ss) {
      const Eigen::Index j = i + ss + 1;
      try {
        x = plant_step(x, u, plant);
      } catch (const NonFiniteState&) {
        diverged = true;
        break;
      }
      if (x.cwiseAbs().maxCoeff() > 1e5) diverged = true;
      const Vec2 ee = forward_kinematics(x.segment<2>(4), plant.arm);
      rep.t[recorded] = ref.t[j];
      rep.ref_xy.row(recorded) = ref.xy.row(j);
      rep.xy.row(recorded) = ee.transpose();
      rep.err[recorded] = (ee.transpose() - ref.xy.row(j)).norm();
      rep.u.row(recorded) = u.transpose();
      ++recorded;
      if (diverged) break;
    }
  }

  rep.t.conservativeResize(recorded);
  rep.ref_xy.conservativeResize(recorded, 2);
  rep.xy.conservativeResize(recorded, 2);
  rep.err.conservativeResize(recorded);
  rep.u.conservativeResize(recorded, 2);
  rep.diverged = diverged;

  double sum = 0.0;
  Eigen::Index cnt = 0;
  for (Eigen::Index j = 0; j < recorded; ++j)
    if (rep.t[j] >= settle_s) {
      sum += rep.err[j];
      ++cnt;
    }
  rep.mean_err = cnt > 0 ? sum / cnt : std::numeric_limits<double>::infinity();
  return rep;
}

}  // namespace

TrackingReport run_closed_loop(const PlantParams& plant, const LinearLiftedModel& model,
                               const ReferenceTrajectory& ref, const MpcConfig& cfg,
                               double settle_s) {
  LinearMpc mpc(model.A, model.B, joint_selector(model.dict.lifted_dim()),
                joint_weights(cfg), cfg);
  return run_loop(
      plant, model.dict, variant_name(model.variant),
      [&](const Eigen::VectorXd& z0, const Eigen::MatrixXd& rw) {
        return mpc.step(z0, rw);
      },
      ref, cfg, settle_s);
}

TrackingReport run_closed_loop(const PlantParams& plant, const BilinearLiftedModel& model,
                               const ReferenceTrajectory& ref, const MpcConfig& cfg,
                               double settle_s) {
  BilinearMpc mpc(model, joint_selector(model.dict.lifted_dim()), joint_weights(cfg),
                  cfg);
  return run_loop(
      plant, model.dict, "bilinear",
      [&](const Eigen::VectorXd& z0, const Eigen::MatrixXd& rw) {
        return mpc.step(z0, rw);
      },
      ref, cfg, settle_s);
}

}  // namespace cck
