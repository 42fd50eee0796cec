#include "cck/arm_dynamics.hpp"

#include <cmath>

namespace cck {

StateVec PlantState::to_vec() const {
  StateVec x;
  x << p.phi, p.phi_dot, q.theta, q.theta_dot;
  return x;
}

PlantState PlantState::from_vec(const StateVec& x) {
  PlantState s;
  s.p.phi = x.segment<2>(0);
  s.p.phi_dot = x.segment<2>(2);
  s.q.theta = x.segment<2>(4);
  s.q.theta_dot = x.segment<2>(6);
  return s;
}

Mat2 inertia_matrix(const Vec2& theta, const ArmParams& arm) {
  const double l1 = arm.lengths[0], l2 = arm.lengths[1];
  const double m1 = arm.masses[0], m2 = arm.masses[1];
  const double c2 = std::cos(theta[1]);
  Mat2 H;
  H(0, 0) = m1 / 3.0 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 / 3.0 + l1 * l2 * c2);
  H(0, 1) = m2 * (l2 * l2 / 3.0 + 0.5 * l1 * l2 * c2);
  H(1, 0) = H(0, 1);
  H(1, 1) = m2 * l2 * l2 / 3.0;
  return H;
}

namespace {

// dH/dtheta2 (H depends on theta only through cos(theta2)).
Mat2 inertia_matrix_d2(const Vec2& theta, const ArmParams& arm) {
  const double l1 = arm.lengths[0], l2 = arm.lengths[1];
  const double m2 = arm.masses[1];
  const double s2 = std::sin(theta[1]);
  Mat2 dH;
  dH(0, 0) = -m2 * l1 * l2 * s2;
  dH(0, 1) = -0.5 * m2 * l1 * l2 * s2;
  dH(1, 0) = dH(0, 1);
  dH(1, 1) = 0.0;
  return dH;
}

}  // namespace

Mat2 coriolis_matrix(const Vec2& theta, const Vec2& theta_dot, const ArmParams& arm) {
  // C_ij = sum_k c_ijk thd_k with Christoffel symbols
  // c_ijk = 1/2 (dH_ij/dq_k + dH_ik/dq_j - dH_jk/dq_i).
  // Only d/dtheta2 is nonzero for the two-link arm.
  Mat2 dH[2];
  dH[0].setZero();
  dH[1] = inertia_matrix_d2(theta, arm);
  Mat2 C;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double cij = 0.0;
      for (int k = 0; k < 2; ++k)
        cij += 0.5 * (dH[k](i, j) + dH[j](i, k) - dH[i](j, k)) * theta_dot[k];
      C(i, j) = cij;
    }
  return C;
}

Vec2 coriolis_term(const Vec2& theta, const Vec2& theta_dot, const ArmParams& arm) {
  return coriolis_matrix(theta, theta_dot, arm) * theta_dot;
}

Vec2 joint_torque(const ActuatorState& p, const JointState& q, const ActuatorParams& act) {
  const Vec2 deflection = p.phi - act.gear_ratio.cwiseProduct(q.theta);
  return act.gear_ratio.cwiseProduct(act.stiffness.cwiseProduct(deflection));
}

StateVec plant_step(const StateVec& x, const Vec2& tau_m, const PlantParams& params) {
  const ActuatorParams& act = params.act;
  const double dt = act.dt;
  const Vec2 phi = x.segment<2>(0);
  const Vec2 phi_dot = x.segment<2>(2);
  const Vec2 theta = x.segment<2>(4);
  const Vec2 theta_dot = x.segment<2>(6);

  const Vec2 spring = act.stiffness.cwiseProduct(phi - act.gear_ratio.cwiseProduct(theta));
  const Vec2 tau_j = act.gear_ratio.cwiseProduct(spring);
  const Vec2 theta_dd = inertia_matrix(theta, params.arm)
                            .ldlt()
                            .solve(tau_j - coriolis_term(theta, theta_dot, params.arm));
  const Vec2 phi_dd =
      (tau_m - act.damping.cwiseProduct(phi_dot) - spring).cwiseQuotient(act.rotor_inertia);

  StateVec xn;
  xn << phi + dt * phi_dot, phi_dot + dt * phi_dd, theta + dt * theta_dot,
      theta_dot + dt * theta_dd;
  if (!xn.allFinite()) throw NonFiniteState("plant_step produced non-finite state");
  return xn;
}

PlantState plant_step(const PlantState& x, const Vec2& tau_m, const PlantParams& params) {
  return PlantState::from_vec(plant_step(x.to_vec(), tau_m, params));
}

double total_energy(const StateVec& x, const PlantParams& params) {
  const Vec2 phi = x.segment<2>(0);
  const Vec2 phi_dot = x.segment<2>(2);
  const Vec2 theta = x.segment<2>(4);
  const Vec2 theta_dot = x.segment<2>(6);
  const double t_links =
      0.5 * theta_dot.dot(inertia_matrix(theta, params.arm) * theta_dot);
  const double t_rotors = 0.5 * params.act.rotor_inertia.dot(phi_dot.cwiseAbs2());
  const Vec2 deflection = phi - params.act.gear_ratio.cwiseProduct(theta);
  const double v_spring = 0.5 * params.act.stiffness.dot(deflection.cwiseAbs2());
  return t_links + t_rotors + v_spring;
}

double total_energy(const PlantState& x, const PlantParams& params) {
  return total_energy(x.to_vec(), params);
}

Vec2 forward_kinematics(const Vec2& theta, const ArmParams& arm) {
  const double l1 = arm.lengths[0], l2 = arm.lengths[1];
  return Vec2(l1 * std::cos(theta[0]) + l2 * std::cos(theta[0] + theta[1]),
              l1 * std::sin(theta[0]) + l2 * std::sin(theta[0] + theta[1]));
}

Vec2 inverse_kinematics(double x, double y, Elbow elbow, const ArmParams& arm) {
  const double l1 = arm.lengths[0], l2 = arm.lengths[1];
  const double rr = std::hypot(x, y);
  const double r_min = std::abs(l1 - l2), r_max = l1 + l2;
  if (rr > r_max || rr < r_min) {
    const double excess = rr > r_max ? rr - r_max : r_min - rr;
    throw Unreachable("inverse_kinematics: target outside reachable annulus by " +
                          std::to_string(excess) + " m",
                      excess);
  }
  double c2 = (rr * rr - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  c2 = std::clamp(c2, -1.0, 1.0);
  const double sign = elbow == Elbow::Up ? 1.0 : -1.0;
  const double t2 = sign * std::acos(c2);
  const double t1 =
      std::atan2(y, x) - std::atan2(l2 * std::sin(t2), l1 + l2 * std::cos(t2));
  return Vec2(t1, t2);
}

std::vector<StateVec> simulate(const StateVec& x0, const std::vector<Vec2>& u_sequence,
                               const PlantParams& params) {
  std::vector<StateVec> traj;
  traj.reserve(u_sequence.size() + 1);
  traj.push_back(x0);
  for (std::size_t t = 0; t < u_sequence.size(); ++t) {
    try {
      traj.push_back(plant_step(traj.back(), u_sequence[t], params));
    } catch (const NonFiniteState&) {
      throw NonFiniteState("simulate: non-finite state at step " + std::to_string(t),
                           static_cast<long>(t));
    }
  }
  return traj;
}

}  // namespace cck
