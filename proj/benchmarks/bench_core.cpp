#include <benchmark/benchmark.h>

#include "cck/bench.hpp"
#include "cck/koopman_fit.hpp"
#include "cck/lifting.hpp"
#include "cck/mpc.hpp"
#include "cck/rng.hpp"

using namespace cck;

namespace {

StateVec sample_state(Rng& rng) {
  StateVec x;
  for (int i = 0; i < 8; ++i) x[i] = rng.uniform(-1.5, 1.5);
  return x;
}

struct Fixture {
  PlantParams plant;
  DataSet data;
  Dictionary dict;
  FittedModels models;

  Fixture() {
    DataGenConfig dcfg;
    dcfg.episodes = 20;
    dcfg.steps = 200;
    data = generate_training_data(plant, dcfg, 1);
    DictConfig dict_cfg;  // full-size 200-RBF dictionary
    dict_cfg.kmeans_subsample = 4000;
    models = fit_all(data, plant, dict_cfg, 1e-8, 1);
    dict = models.cck.dict;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

static void BM_PlantStep(benchmark::State& state) {
  PlantParams plant;
  Rng rng(2);
  StateVec x = sample_state(rng);
  const Vec2 u(3.0, -2.0);
  for (auto _ : state) {
    x = plant_step(x, u, plant);
    benchmark::DoNotOptimize(x);
    if (!x.allFinite()) x = sample_state(rng);
  }
}
BENCHMARK(BM_PlantStep);

static void BM_Lift(benchmark::State& state) {
  auto& f = fixture();
  Rng rng(3);
  const StateVec x = sample_state(rng);
  for (auto _ : state) {
    Eigen::VectorXd z = lift(x, f.dict);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_Lift);

static void BM_QpSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(4);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = rng.uniform(-1, 1);
  QpProblem qp;
  qp.H = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.g.resize(n);
  for (int i = 0; i < n; ++i) qp.g[i] = rng.uniform(-2, 2);
  qp.lb = Eigen::VectorXd::Constant(n, -1.0);
  qp.ub = Eigen::VectorXd::Constant(n, 1.0);
  for (auto _ : state) {
    QpResult r = solve_qp_box(qp);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_QpSolve)->Arg(20)->Arg(100);

static void BM_MpcStep(benchmark::State& state) {
  auto& f = fixture();
  MpcConfig cfg;
  const Eigen::MatrixXd S = joint_selector(f.dict.lifted_dim());
  LinearMpc mpc(f.models.cck.A, f.models.cck.B, S, joint_weights(cfg), cfg);
  Rng rng(5);
  const Eigen::VectorXd z0 = lift(sample_state(rng), f.dict);
  Eigen::MatrixXd ref(cfg.horizon, 4);
  for (int i = 0; i < cfg.horizon; ++i)
    for (int j = 0; j < 4; ++j) ref(i, j) = rng.uniform(-1, 1);
  for (auto _ : state) {
    Eigen::VectorXd u = mpc.step(z0, ref);
    benchmark::DoNotOptimize(u);
  }
}
BENCHMARK(BM_MpcStep);

static void BM_FitDmdc(benchmark::State& state) {
  auto& f = fixture();
  const Eigen::MatrixXd Z = lift_all(f.data.X, f.dict);
  const Eigen::MatrixXd Zp = lift_all(f.data.Xp, f.dict);
  const double ridge = 1e-8 * Z.squaredNorm();
  for (auto _ : state) {
    LinearLiftedModel m = fit_dmdc(Z, f.data.U, Zp, f.dict, 1e-3, ridge);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_FitDmdc);

BENCHMARK_MAIN();
