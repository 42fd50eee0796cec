#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cck/arm_dynamics.hpp"
#include "cck/errors.hpp"

namespace cck {

// Observable dictionary: the identity state coordinates [phi; phi_dot; theta;
// theta_dot] followed by Gaussian RBFs with k-means centers.
struct Dictionary {
  int state_dim = 8;
  Eigen::MatrixXd centers;  // M x state_dim
  Eigen::VectorXd widths;   // M, per-center dilation
  std::uint64_t seed = 0;

  int num_rbf() const { return static_cast<int>(centers.rows()); }
  int lifted_dim() const { return state_dim + num_rbf(); }
};

// Seeded k-means++ initialization + Lloyd iterations (<= 100 or assignment
// fixpoint). Throws InsufficientData when samples.rows() < M.
Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& samples, int M, std::uint64_t seed,
                               int max_iter = 100);

// Within-cluster sum of squares for given centers (Lloyd monotonicity tests).
double kmeans_inertia(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& centers);

// Gaussian kernel exp(-|x-c|^2 / (2 sigma^2)), in (0, 1].
double rbf_value(const Eigen::VectorXd& x, const Eigen::VectorXd& center, double width);

// Builds the dictionary from training states: k-means over per-coordinate
// normalized samples (de-normalized centers), width per center =
// width_frac * median distance to its `knn` nearest other centers.
Dictionary build_dictionary(const Eigen::MatrixXd& samples, int M, std::uint64_t seed,
                            double width_frac = 0.6, int knn = 8);

Eigen::VectorXd lift(const StateVec& x, const Dictionary& dict);

// Row-wise lift of an n x state_dim matrix to n x lifted_dim.
Eigen::MatrixXd lift_all(const Eigen::MatrixXd& X, const Dictionary& dict);

// Reads the leading state coordinates back out; throws DimensionMismatch.
StateVec unlift(const Eigen::VectorXd& z, const Dictionary& dict);

}  // namespace cck
