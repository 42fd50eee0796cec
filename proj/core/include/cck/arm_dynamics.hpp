#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cck/errors.hpp"

namespace cck {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Full plant state as a flat vector, ordering [phi(2); phi_dot(2); theta(2); theta_dot(2)].
using StateVec = Eigen::Matrix<double, 8, 1>;

struct JointState {
  Vec2 theta{0, 0};
  Vec2 theta_dot{0, 0};
};

struct ActuatorState {
  Vec2 phi{0, 0};
  Vec2 phi_dot{0, 0};
};

struct PlantState {
  ActuatorState p;
  JointState q;

  StateVec to_vec() const;
  static PlantState from_vec(const StateVec& x);
};

// Two-link planar arm, uniform thin rods, horizontal plane (no gravity).
struct ArmParams {
  Vec2 lengths{1.0, 0.8};  // m
  Vec2 masses{5.0, 4.0};   // kg
};

// Per-joint motor rotor + gear-train compliance, diagonal parameters.
struct ActuatorParams {
  Vec2 rotor_inertia{0.2, 0.2};     // I, kg*m^2
  Vec2 damping{4.0, 4.0};           // b, N*m*s/rad
  Vec2 stiffness{2000.0, 2000.0};   // k, N*m/rad
  Vec2 gear_ratio{1.0, 1.0};        // r
  double dt = 1e-3;                 // s
};

struct PlantParams {
  ArmParams arm;
  ActuatorParams act;
};

enum class Elbow { Up, Down };

// Link inertia matrix H(theta); symmetric positive definite.
Mat2 inertia_matrix(const Vec2& theta, const ArmParams& arm);

// Coriolis/centrifugal vector C(theta, theta_dot) * theta_dot built from
// Christoffel symbols of H, so that Hdot - 2C is skew-symmetric.
Vec2 coriolis_term(const Vec2& theta, const Vec2& theta_dot, const ArmParams& arm);

// Christoffel Coriolis matrix C(theta, theta_dot) itself (for tests).
Mat2 coriolis_matrix(const Vec2& theta, const Vec2& theta_dot, const ArmParams& arm);

// Gear-train spring torque on the joints: tau_j = r k (phi - r theta).
Vec2 joint_torque(const ActuatorState& p, const JointState& q, const ActuatorParams& act);

// One explicit-Euler step; motor torque enters only the phi_dot update as
// +dt * I^-1 tau_m. Throws NonFiniteState on blow-up.
PlantState plant_step(const PlantState& x, const Vec2& tau_m, const PlantParams& params);
StateVec plant_step(const StateVec& x, const Vec2& tau_m, const PlantParams& params);

// Kinetic energy of links and rotors + gear-spring potential.
double total_energy(const PlantState& x, const PlantParams& params);
double total_energy(const StateVec& x, const PlantParams& params);

// End-effector position.
Vec2 forward_kinematics(const Vec2& theta, const ArmParams& arm);

// Throws Unreachable when (x, y) lies outside the annulus.
Vec2 inverse_kinematics(double x, double y, Elbow elbow, const ArmParams& arm);

// Iterated plant_step; returns T+1 states. NonFiniteState carries the failing index.
std::vector<StateVec> simulate(const StateVec& x0, const std::vector<Vec2>& u_sequence,
                               const PlantParams& params);

}  // namespace cck
