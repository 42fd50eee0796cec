#include "cck/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cck/rng.hpp"

namespace cck {

Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& samples, int M, std::uint64_t seed,
                               int max_iter) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  if (n < M)
    throw InsufficientData("kmeans_centers: " + std::to_string(n) + " samples < M = " +
                           std::to_string(M));
  Rng rng(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centers(M, dim);
  centers.row(0) = samples.row(static_cast<Eigen::Index>(rng.uniform_int(n)));
  Eigen::VectorXd d2 = (samples.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < M; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      // target in (0, total] so a zero-distance (already chosen) sample is never picked
      const double target = (1.0 - rng.uniform01()) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(n));
    }
    centers.row(j) = samples.row(pick);
    d2 = d2.cwiseMin((samples.rowwise() - centers.row(j)).rowwise().squaredNorm());
  }

  // Lloyd iterations to assignment fixpoint (or 100 iterations).
  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int j = 0; j < M; ++j) {
        const double d = (samples.row(i) - centers.row(j)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(M, dim);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(M);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += samples.row(i);
      counts[assign[i]] += 1;
    }
    for (int j = 0; j < M; ++j)
      if (counts[j] > 0) centers.row(j) = sums.row(j) / counts[j];
  }
  return centers;
}

double kmeans_inertia(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& centers) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centers.rows(); ++j)
      bd = std::min(bd, (samples.row(i) - centers.row(j)).squaredNorm());
    total += bd;
  }
  return total;
}

double rbf_value(const Eigen::VectorXd& x, const Eigen::VectorXd& center, double width) {
  return std::exp(-(x - center).squaredNorm() / (2.0 * width * width));
}

Dictionary build_dictionary(const Eigen::MatrixXd& samples, int M, std::uint64_t seed,
                            double width_frac, int knn) {
  const Eigen::Index dim = samples.cols();
  // Normalize per coordinate so k-means treats phi_dot and theta alike.
  Eigen::RowVectorXd mu = samples.colwise().mean();
  Eigen::RowVectorXd sd =
      ((samples.rowwise() - mu).cwiseAbs2().colwise().mean()).cwiseSqrt();
  for (Eigen::Index c = 0; c < dim; ++c)
    if (sd[c] <= 0.0) sd[c] = 1.0;
  Eigen::MatrixXd Z = (samples.rowwise() - mu).array().rowwise() / sd.array();

  Dictionary dict;
  dict.state_dim = static_cast<int>(dim);
  dict.seed = seed;
  Eigen::MatrixXd cz = kmeans_centers(Z, M, seed);
  dict.centers = (cz.array().rowwise() * sd.array()).rowwise() + mu.array();

  // Width per center: width_frac * median distance to knn nearest other centers.
  dict.widths.resize(M);
  const int kk = std::min(knn, M - 1);
  for (int j = 0; j < M; ++j) {
    std::vector<double> dists;
    dists.reserve(M - 1);
    for (int i = 0; i < M; ++i)
      if (i != j) dists.push_back((dict.centers.row(i) - dict.centers.row(j)).norm());
    std::partial_sort(dists.begin(), dists.begin() + kk, dists.end());
    // median of the kk smallest
    std::vector<double> nearest(dists.begin(), dists.begin() + kk);
    double med;
    if (kk % 2 == 1) {
      med = nearest[kk / 2];
    } else {
      med = 0.5 * (nearest[kk / 2 - 1] + nearest[kk / 2]);
    }
    dict.widths[j] = width_frac * med;
  }
  return dict;
}

Eigen::VectorXd lift(const StateVec& x, const Dictionary& dict) {
  if (dict.state_dim != 8)
    throw DimensionMismatch("lift: dictionary state_dim != 8");
  Eigen::VectorXd z(dict.lifted_dim());
  z.head<8>() = x;
  for (int j = 0; j < dict.num_rbf(); ++j) {
    const double inv = 1.0 / (2.0 * dict.widths[j] * dict.widths[j]);
    const double d2 = (x.transpose() - dict.centers.row(j)).squaredNorm();
    z[8 + j] = std::exp(-d2 * inv);
  }
  return z;
}

Eigen::MatrixXd lift_all(const Eigen::MatrixXd& X, const Dictionary& dict) {
  if (X.cols() != dict.state_dim)
    throw DimensionMismatch("lift_all: X has wrong state dimension");
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd Z(n, dict.lifted_dim());
  // row-by-row through lift() so batch and single-state paths agree bitwise
  for (Eigen::Index i = 0; i < n; ++i)
    Z.row(i) = lift(StateVec(X.row(i).transpose()), dict).transpose();
  return Z;
}

StateVec unlift(const Eigen::VectorXd& z, const Dictionary& dict) {
  if (z.size() != dict.lifted_dim())
    throw DimensionMismatch("unlift: z has dimension " + std::to_string(z.size()) +
                            ", expected " + std::to_string(dict.lifted_dim()));
  return z.head<8>();
}

}  // namespace cck
