#include "cck/koopman_fit.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "cck/rng.hpp"

namespace cck {

int DataSet::num_episodes() const {
  std::set<int> ids(episode.begin(), episode.end());
  return static_cast<int>(ids.size());
}

DataSet DataSet::filter_episodes(const std::function<bool(int)>& keep) const {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < size(); ++i)
    if (keep(episode[i])) rows.push_back(i);
  DataSet out;
  out.X.resize(rows.size(), X.cols());
  out.U.resize(rows.size(), U.cols());
  out.Xp.resize(rows.size(), Xp.cols());
  out.episode.reserve(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out.X.row(j) = X.row(rows[j]);
    out.U.row(j) = U.row(rows[j]);
    out.Xp.row(j) = Xp.row(rows[j]);
    out.episode.push_back(episode[rows[j]]);
  }
  out.seed = seed;
  out.dt = dt;
  return out;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::CCK: return "cck";
    case Variant::DMDc: return "dmdc";
    case Variant::Hybrid: return "hybrid";
    case Variant::Bilinear: return "bilinear";
  }
  return "unknown";
}

Variant variant_from_name(const std::string& name) {
  if (name == "cck") return Variant::CCK;
  if (name == "dmdc") return Variant::DMDc;
  if (name == "hybrid") return Variant::Hybrid;
  if (name == "bilinear") return Variant::Bilinear;
  throw ConfigInvalid("unknown model variant: " + name);
}

DataSet shift_to_autonomous(const DataSet& data, const ActuatorParams& act) {
  DataSet out = data;
  // Only the phi_dot components (columns 2, 3) carry the input.
  for (int i = 0; i < 2; ++i)
    out.Xp.col(2 + i) -= act.dt / act.rotor_inertia[i] * data.U.col(i);
  return out;
}

namespace {

// Solves min |Zp - R W^T|^2 + ridge |W|^2 via normal equations; returns W
// (d_out x d_reg). Grams are accumulated in row chunks to bound memory.
Eigen::MatrixXd ridge_regress(const std::function<void(Eigen::Index, Eigen::Index,
                                                       Eigen::MatrixXd&)>& fill_chunk,
                              const Eigen::MatrixXd& Zp, Eigen::Index n,
                              Eigen::Index d_reg, double ridge, FitDiagnostics* diag) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d_reg, d_reg);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d_reg, Zp.cols());
  const Eigen::Index chunk = 8192;
  Eigen::MatrixXd R;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    R.resize(len, d_reg);
    fill_chunk(start, len, R);
    G.selfadjointView<Eigen::Lower>().rankUpdate(R.transpose());
    Q.noalias() += R.transpose() * Zp.middleRows(start, len);
  }
  G = G.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = std::max(es.eigenvalues().minCoeff(), 0.0) + ridge;
  const double cond = emin > 0.0 ? (emax + ridge) / emin
                                 : std::numeric_limits<double>::infinity();
  if (diag) {
    diag->gram_cond = cond;
    diag->ill_conditioned = cond > 1e12;
  }
  if (cond > 1e12)
    std::cerr << "warning: ill-conditioned Gram (cond ~ " << cond << ")\n";

  G.diagonal().array() += ridge;
  return G.ldlt().solve(Q).transpose();
}

Eigen::MatrixXd ridge_regress_dense(const Eigen::MatrixXd& R, const Eigen::MatrixXd& Zp,
                                    double ridge, FitDiagnostics* diag) {
  return ridge_regress(
      [&](Eigen::Index start, Eigen::Index len, Eigen::MatrixXd& out) {
        out = R.middleRows(start, len);
      },
      Zp, R.rows(), R.cols(), ridge, diag);
}

}  // namespace

Eigen::MatrixXd fit_autonomous_A(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Zp,
                                 double ridge, FitDiagnostics* diag) {
  if (Z.rows() != Zp.rows() || Z.cols() != Zp.cols())
    throw DimensionMismatch("fit_autonomous_A: Z and Zp shapes differ");
  return ridge_regress_dense(Z, Zp, ridge, diag);
}

LinearLiftedModel fit_dmdc(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                           const Eigen::MatrixXd& Zp, const Dictionary& dict, double dt,
                           double ridge, FitDiagnostics* diag) {
  const Eigen::Index d = Z.cols(), m = U.cols();
  Eigen::MatrixXd R(Z.rows(), d + m);
  R << Z, U;
  Eigen::MatrixXd W = ridge_regress_dense(R, Zp, ridge, diag);
  LinearLiftedModel model;
  model.A = W.leftCols(d);
  model.B = W.rightCols(m);
  model.dict = dict;
  model.variant = Variant::DMDc;
  model.dt = dt;
  return model;
}

BilinearLiftedModel fit_bilinear(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& Zp, const Dictionary& dict,
                                 double dt, double ridge, FitDiagnostics* diag) {
  const Eigen::Index d = Z.cols(), m = U.cols();
  const Eigen::Index d_reg = d + m + m * d;
  auto fill = [&](Eigen::Index start, Eigen::Index len, Eigen::MatrixXd& out) {
    out.leftCols(d) = Z.middleRows(start, len);
    out.middleCols(d, m) = U.middleRows(start, len);
    for (Eigen::Index i = 0; i < m; ++i)
      out.middleCols(d + m + i * d, d) =
          (Z.middleRows(start, len).array().colwise() *
           U.middleRows(start, len).col(i).array())
              .matrix();
  };
  Eigen::MatrixXd W = ridge_regress(fill, Zp, Z.rows(), d_reg, ridge, diag);
  BilinearLiftedModel model;
  model.A = W.leftCols(d);
  model.B = W.middleCols(d, m);
  for (Eigen::Index i = 0; i < m; ++i) model.N[i] = W.middleCols(d + m + i * d, d);
  model.dict = dict;
  model.dt = dt;
  return model;
}

LinearLiftedModel assemble_cck(const Eigen::MatrixXd& A_auto, const ActuatorParams& act,
                               const Dictionary& dict) {
  const int d = dict.lifted_dim();
  if (A_auto.rows() != d || A_auto.cols() != d)
    throw DimensionMismatch("assemble_cck: A_auto dimension mismatch");
  LinearLiftedModel model;
  model.A = A_auto;
  model.variant = Variant::CCK;
  model.dict = dict;
  model.dt = act.dt;
  // Replace the actuator rows by the exact Euler coefficients; every other
  // column (including all RBF columns) is exactly zero.
  const double dt = act.dt;
  model.A.topRows(4).setZero();
  for (int i = 0; i < 2; ++i) {
    model.A(i, i) = 1.0;
    model.A(i, 2 + i) = dt;
    model.A(2 + i, i) = -dt * act.stiffness[i] / act.rotor_inertia[i];
    model.A(2 + i, 2 + i) = 1.0 - dt * act.damping[i] / act.rotor_inertia[i];
    model.A(2 + i, 4 + i) =
        dt * act.stiffness[i] * act.gear_ratio[i] / act.rotor_inertia[i];
  }
  model.B = Eigen::MatrixXd::Zero(d, 2);
  for (int i = 0; i < 2; ++i) model.B(2 + i, i) = dt / act.rotor_inertia[i];
  return model;
}

namespace {

Eigen::MatrixXd solve_direct_encoding(const Eigen::MatrixXd& R, const Eigen::MatrixXd& Q,
                                      double ridge) {
  Eigen::MatrixXd Rreg = R;
  Rreg.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Rreg, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Rreg);
  if (ldlt.info() != Eigen::Success || lmin <= lmax * 1e-14)
    throw SingularGram("direct_encoding: R numerically singular after regularization");
  // A R = Q with symmetric R.
  return ldlt.solve(Q.transpose()).transpose();
}

}  // namespace

Eigen::MatrixXd direct_encoding(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& lift_fn,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n_samples,
    std::uint64_t seed, double ridge) {
  Rng rng(seed);
  const Eigen::Index dim = lo.size();
  Eigen::VectorXd x(dim);
  for (Eigen::Index c = 0; c < dim; ++c) x[c] = rng.uniform(lo[c], hi[c]);
  Eigen::VectorXd z0 = lift_fn(x);
  const Eigen::Index d = z0.size();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, d);
  for (int s = 0;; ++s) {
    const Eigen::VectorXd z = lift_fn(x);
    const Eigen::VectorXd zp = lift_fn(F(x));
    R.noalias() += z * z.transpose();
    Q.noalias() += zp * z.transpose();
    if (s + 1 >= n_samples) break;
    for (Eigen::Index c = 0; c < dim; ++c) x[c] = rng.uniform(lo[c], hi[c]);
  }
  R /= n_samples;
  Q /= n_samples;
  return solve_direct_encoding(R, Q, ridge);
}

Eigen::MatrixXd direct_encoding_samples(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& lift_fn,
    const Eigen::MatrixXd& samples, double ridge) {
  const Eigen::Index n = samples.rows();
  if (n == 0) throw InsufficientData("direct_encoding_samples: no samples");
  Eigen::VectorXd z0 = lift_fn(samples.row(0).transpose());
  const Eigen::Index d = z0.size();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = samples.row(i).transpose();
    const Eigen::VectorXd z = lift_fn(x);
    const Eigen::VectorXd zp = lift_fn(F(x));
    R.noalias() += z * z.transpose();
    Q.noalias() += zp * z.transpose();
  }
  R /= static_cast<double>(n);
  Q /= static_cast<double>(n);
  return solve_direct_encoding(R, Q, ridge);
}

Eigen::VectorXd one_step_errors(const LinearLiftedModel& model, const DataSet& data) {
  const Eigen::MatrixXd Z = lift_all(data.X, model.dict);
  const Eigen::MatrixXd pred =
      Z * model.A.topRows<8>().transpose() + data.U * model.B.topRows<8>().transpose();
  return (pred - data.Xp).rowwise().norm();
}

Eigen::VectorXd one_step_errors(const BilinearLiftedModel& model, const DataSet& data) {
  const Eigen::MatrixXd Z = lift_all(data.X, model.dict);
  Eigen::MatrixXd pred =
      Z * model.A.topRows<8>().transpose() + data.U * model.B.topRows<8>().transpose();
  for (int i = 0; i < 2; ++i) {
    Eigen::MatrixXd contrib = Z * model.N[i].topRows<8>().transpose();
    pred += (contrib.array().colwise() * data.U.col(i).array()).matrix();
  }
  return (pred - data.Xp).rowwise().norm();
}

Eigen::VectorXd histogram_edges(double max_value, int nbins) {
  Eigen::VectorXd edges(nbins + 1);
  for (int i = 0; i <= nbins; ++i) edges[i] = max_value * i / nbins;
  return edges;
}

Histogram make_histogram(const Eigen::VectorXd& errors, const Eigen::VectorXd& edges) {
  Histogram h;
  h.edges = edges;
  const int nbins = static_cast<int>(edges.size()) - 1;
  h.counts = Eigen::VectorXi::Zero(nbins);
  for (Eigen::Index i = 0; i < errors.size(); ++i) {
    const double e = errors[i];
    if (e < edges[0]) continue;
    int b = static_cast<int>(std::upper_bound(edges.data(), edges.data() + nbins, e) -
                             edges.data()) -
            1;
    if (b >= 0 && b < nbins) h.counts[b] += 1;
  }
  return h;
}

double median(Eigen::VectorXd v) {
  if (v.size() == 0) return 0.0;
  std::sort(v.data(), v.data() + v.size());
  const Eigen::Index n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace cck
