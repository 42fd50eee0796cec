#include "cck/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "cck/rng.hpp"

namespace cck {

ReferenceTrajectory make_circle_reference(const Vec2& center, double radius,
                                          double period, double dt, Elbow elbow,
                                          const ArmParams& arm) {
  const Eigen::Index n2 = static_cast<Eigen::Index>(std::llround(period / dt));
  const Eigen::Index n = n2 + 1;
  ReferenceTrajectory ref;
  ref.center = center;
  ref.radius = radius;
  ref.period = period;
  ref.elbow = elbow;
  ref.dt = dt;
  ref.t.resize(n);
  ref.xy.resize(n, 2);
  ref.theta.resize(n, 2);
  ref.theta_dot.resize(n, 2);

  const double two_pi = 6.283185307179586476925286766559;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = two_pi * static_cast<double>(i) / static_cast<double>(n2);
    const double x = center[0] + radius * std::cos(a);
    const double y = center[1] + radius * std::sin(a);
    ref.t[i] = static_cast<double>(i) * dt;
    ref.xy(i, 0) = x;
    ref.xy(i, 1) = y;
    Vec2 th;
    try {
      th = inverse_kinematics(x, y, elbow, arm);
    } catch (const Unreachable& e) {
      throw Unreachable("make_circle_reference: sample " + std::to_string(i) +
                            " unreachable: " + e.what(),
                        e.excess);
    }
    if (i > 0) {
      // unwrap against the previous sample
      for (int c = 0; c < 2; ++c) {
        double v = th[c];
        while (v - ref.theta(i - 1, c) > two_pi / 2) v -= two_pi;
        while (v - ref.theta(i - 1, c) < -two_pi / 2) v += two_pi;
        th[c] = v;
      }
    }
    ref.theta.row(i) = th.transpose();
  }
  // central differences inside, one-sided at the ends
  for (int c = 0; c < 2; ++c) {
    ref.theta_dot(0, c) = (ref.theta(1, c) - ref.theta(0, c)) / dt;
    ref.theta_dot(n - 1, c) = (ref.theta(n - 1, c) - ref.theta(n - 2, c)) / dt;
    for (Eigen::Index i = 1; i < n - 1; ++i)
      ref.theta_dot(i, c) = (ref.theta(i + 1, c) - ref.theta(i - 1, c)) / (2.0 * dt);
  }
  return ref;
}

DataSet generate_training_data(const PlantParams& plant, const DataGenConfig& cfg,
                               std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index n =
      static_cast<Eigen::Index>(cfg.episodes) * static_cast<Eigen::Index>(cfg.steps);
  DataSet data;
  data.X.resize(n, 8);
  data.U.resize(n, 2);
  data.Xp.resize(n, 8);
  data.episode.resize(n);
  data.seed = seed;
  data.dt = plant.act.dt;

  Eigen::Index m = 0;
  for (int e = 0; e < cfg.episodes; ++e) {
    Vec2 th, thd, dfl;
    for (int c = 0; c < 2; ++c) th[c] = rng.uniform(cfg.theta_lo[c], cfg.theta_hi[c]);
    for (int c = 0; c < 2; ++c)
      thd[c] = rng.uniform(-cfg.theta_dot_mag, cfg.theta_dot_mag);
    for (int c = 0; c < 2; ++c)
      dfl[c] = rng.uniform(-cfg.deflection_mag, cfg.deflection_mag);
    StateVec x;
    x << plant.act.gear_ratio.cwiseProduct(th) + dfl,
        plant.act.gear_ratio.cwiseProduct(thd), th, thd;
    const bool forced = e % 2 == 1;
    Vec2 u = Vec2::Zero();
    for (int t = 0; t < cfg.steps; ++t) {
      if (forced && t % cfg.hold_steps == 0)
        for (int c = 0; c < 2; ++c)
          u[c] = rng.uniform(-cfg.excite_mag, cfg.excite_mag);
      const Vec2 uu = forced ? u : Vec2::Zero();
      StateVec xn;
      try {
        xn = plant_step(x, uu, plant);
      } catch (const NonFiniteState&) {
        throw NonFiniteState("generate_training_data: episode " + std::to_string(e) +
                                 " diverged at step " + std::to_string(t),
                             t);
      }
      data.X.row(m) = x.transpose();
      data.U.row(m) = uu.transpose();
      data.Xp.row(m) = xn.transpose();
      data.episode[m] = e;
      ++m;
      x = xn;
    }
  }
  return data;
}

SplitDataSet split_dataset(const DataSet& data, double holdout_fraction) {
  const int eps = data.num_episodes();
  const int n_hold = std::max(1, static_cast<int>(std::lround(holdout_fraction * eps)));
  const int cut = eps - n_hold;
  SplitDataSet s;
  s.train = data.filter_episodes([cut](int e) { return e < cut; });
  s.holdout = data.filter_episodes([cut](int e) { return e >= cut; });
  return s;
}

Dictionary make_dictionary(const DataSet& train, const DictConfig& dict_cfg,
                           std::uint64_t seed) {
  const Eigen::Index n = train.size();
  Eigen::MatrixXd sub;
  if (n <= dict_cfg.kmeans_subsample) {
    sub = train.X;
  } else {
    Rng rng(seed);
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const Eigen::Index want = dict_cfg.kmeans_subsample;
    for (Eigen::Index i = 0; i < want; ++i) {
      const Eigen::Index j = i + static_cast<Eigen::Index>(rng.uniform_int(n - i));
      std::swap(idx[i], idx[j]);
    }
    sub.resize(want, train.X.cols());
    for (Eigen::Index i = 0; i < want; ++i) sub.row(i) = train.X.row(idx[i]);
  }
  return build_dictionary(sub, dict_cfg.num_rbf, seed, dict_cfg.width_frac,
                          dict_cfg.knn);
}

FittedModels fit_all(const DataSet& train, const PlantParams& plant,
                     const DictConfig& dict_cfg, double ridge_scale,
                     std::uint64_t dict_seed, FitDiagnostics* diag) {
  const Dictionary dict = make_dictionary(train, dict_cfg, dict_seed);

  const Eigen::MatrixXd Z = lift_all(train.X, dict);
  const Eigen::MatrixXd Zp = lift_all(train.Xp, dict);
  // One absolute ridge, derived from the lifted-state Gram and shared by all
  // variants so the nested model classes stay comparable.
  const double ridge = ridge_scale * Z.squaredNorm();

  FittedModels out;
  out.ridge = ridge;

  const DataSet shifted = shift_to_autonomous(train, plant.act);
  const Eigen::MatrixXd Zp_shift = lift_all(shifted.Xp, dict);
  const Eigen::MatrixXd A_auto = fit_autonomous_A(Z, Zp_shift, ridge, diag);
  out.cck = assemble_cck(A_auto, plant.act, dict);

  out.dmdc = fit_dmdc(Z, train.U, Zp, dict, plant.act.dt, ridge);
  out.bilinear = fit_bilinear(Z, train.U, Zp, dict, plant.act.dt, ridge);
  return out;
}

LinearLiftedModel make_hybrid(const LinearLiftedModel& dmdc,
                              const LinearLiftedModel& cck) {
  LinearLiftedModel h = dmdc;
  h.B = cck.B;
  h.variant = Variant::Hybrid;
  return h;
}

namespace {

void run_parallel(std::vector<std::function<void()>>& tasks, int workers) {
  if (workers <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      tasks[i]();
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min<int>(workers, static_cast<int>(tasks.size()));
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

ComparisonRow row_from_report(const TrackingReport& rep, double radius_cm) {
  ComparisonRow row;
  row.variant = rep.variant;
  row.radius_cm = radius_cm;
  row.mean_err_cm = rep.mean_err * 100.0;
  row.diverged = rep.diverged;
  return row;
}

}  // namespace

ComparisonReport run_comparison(const RunConfig& cfg, const FittedModels& models) {
  std::vector<ReferenceTrajectory> refs;
  refs.reserve(cfg.bench.radii_cm.size());
  for (double rcm : cfg.bench.radii_cm)
    refs.push_back(make_circle_reference(cfg.bench.center, rcm / 100.0,
                                         cfg.bench.period, cfg.plant.act.dt,
                                         cfg.bench.elbow, cfg.plant.arm));

  const std::size_t nr = refs.size();
  ComparisonReport rep;
  rep.tracking.resize(3 * nr);
  std::vector<std::function<void()>> tasks;
  for (std::size_t r = 0; r < nr; ++r) {
    tasks.push_back([&, r] {
      rep.tracking[r] = run_closed_loop(cfg.plant, models.cck, refs[r], cfg.mpc,
                                        cfg.bench.settle);
    });
    tasks.push_back([&, r] {
      rep.tracking[nr + r] = run_closed_loop(cfg.plant, models.dmdc, refs[r], cfg.mpc,
                                             cfg.bench.settle);
    });
    tasks.push_back([&, r] {
      rep.tracking[2 * nr + r] = run_closed_loop(cfg.plant, models.bilinear, refs[r],
                                                 cfg.mpc, cfg.bench.settle);
    });
  }
  run_parallel(tasks, cfg.workers);

  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t r = 0; r < nr; ++r)
      rep.rows.push_back(
          row_from_report(rep.tracking[v * nr + r], cfg.bench.radii_cm[r]));
  return rep;
}

ComparisonReport run_hybrid(const RunConfig& cfg, const LinearLiftedModel& dmdc,
                            const LinearLiftedModel& cck) {
  const double rcm = cfg.bench.hybrid_radius_cm;
  const ReferenceTrajectory ref =
      make_circle_reference(cfg.bench.center, rcm / 100.0, cfg.bench.period,
                            cfg.plant.act.dt, cfg.bench.elbow, cfg.plant.arm);
  const LinearLiftedModel hybrid = make_hybrid(dmdc, cck);

  ComparisonReport rep;
  rep.tracking.resize(2);
  std::vector<std::function<void()>> tasks;
  tasks.push_back([&] {
    rep.tracking[0] = run_closed_loop(cfg.plant, dmdc, ref, cfg.mpc, cfg.bench.settle);
  });
  tasks.push_back([&] {
    rep.tracking[1] = run_closed_loop(cfg.plant, hybrid, ref, cfg.mpc, cfg.bench.settle);
  });
  run_parallel(tasks, cfg.workers);
  rep.rows.push_back(row_from_report(rep.tracking[0], rcm));
  rep.rows.push_back(row_from_report(rep.tracking[1], rcm));
  return rep;
}

HistogramSet prediction_histograms(const FittedModels& models, const DataSet& holdout,
                                   int nbins) {
  HistogramSet set;
  set.variants = {"cck", "dmdc", "bilinear"};
  std::vector<Eigen::VectorXd> errs;
  errs.push_back(one_step_errors(models.cck, holdout));
  errs.push_back(one_step_errors(models.dmdc, holdout));
  errs.push_back(one_step_errors(models.bilinear, holdout));
  double max_err = 0.0;
  for (const auto& e : errs) max_err = std::max(max_err, e.maxCoeff());
  if (max_err <= 0.0) max_err = 1.0;
  const Eigen::VectorXd edges = histogram_edges(max_err, nbins);
  for (const auto& e : errs) {
    set.hists.push_back(make_histogram(e, edges));
    set.medians.push_back(median(e));
  }
  return set;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open output file: " + path);
  return f;
}

}  // namespace

void write_tracking_csv(const std::string& path, const TrackingReport& rep) {
  std::ofstream f = open_out(path);
  f << "t,x_ref,y_ref,x,y,err_m,u1,u2\n";
  for (Eigen::Index i = 0; i < rep.t.size(); ++i)
    f << fmt(rep.t[i]) << ',' << fmt(rep.ref_xy(i, 0)) << ',' << fmt(rep.ref_xy(i, 1))
      << ',' << fmt(rep.xy(i, 0)) << ',' << fmt(rep.xy(i, 1)) << ',' << fmt(rep.err[i])
      << ',' << fmt(rep.u(i, 0)) << ',' << fmt(rep.u(i, 1)) << '\n';
  if (!f) throw IoError("write failed: " + path);
}

void write_summary_csv(const std::string& path, const std::vector<ComparisonRow>& rows) {
  std::ofstream f = open_out(path);
  f << "variant,radius_cm,mean_err_cm,diverged\n";
  for (const auto& r : rows)
    f << r.variant << ',' << fmt(r.radius_cm) << ',' << fmt(r.mean_err_cm) << ','
      << (r.diverged ? 1 : 0) << '\n';
  if (!f) throw IoError("write failed: " + path);
}

void write_hist_csv(const std::string& path, const HistogramSet& set) {
  std::ofstream f = open_out(path);
  f << "variant,bin_lo,bin_hi,count\n";
  for (std::size_t v = 0; v < set.variants.size(); ++v) {
    const Histogram& h = set.hists[v];
    for (Eigen::Index b = 0; b < h.counts.size(); ++b)
      f << set.variants[v] << ',' << fmt(h.edges[b]) << ',' << fmt(h.edges[b + 1])
        << ',' << h.counts[b] << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

void write_overlay_svg(const std::string& path,
                       const std::vector<ReferenceTrajectory>& refs,
                       const std::vector<TrackingReport>& reports) {
  double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
  auto grow = [&](double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const auto& r : refs)
    for (Eigen::Index i = 0; i < r.size(); ++i) grow(r.xy(i, 0), r.xy(i, 1));
  for (const auto& rep : reports)
    for (Eigen::Index i = 0; i < rep.t.size(); ++i) grow(rep.xy(i, 0), rep.xy(i, 1));
  if (xmin > xmax) {
    xmin = ymin = 0;
    xmax = ymax = 1;
  }
  const double pad = 0.05 * std::max(xmax - xmin, ymax - ymin) + 1e-9;
  xmin -= pad;
  xmax += pad;
  ymin -= pad;
  ymax += pad;
  const double W = 640, Hpx = 640;
  auto sx = [&](double x) { return (x - xmin) / (xmax - xmin) * W; };
  auto sy = [&](double y) { return Hpx - (y - ymin) / (ymax - ymin) * Hpx; };

  const std::map<std::string, std::string> colors = {{"cck", "#1f77b4"},
                                                     {"dmdc", "#d62728"},
                                                     {"hybrid", "#2ca02c"},
                                                     {"bilinear", "#ff7f0e"}};
  std::ofstream f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
    << Hpx << "\" viewBox=\"0 0 " << W << ' ' << Hpx << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& r : refs) {
    f << "<polyline fill=\"none\" stroke=\"#888888\" stroke-dasharray=\"6 4\" "
         "stroke-width=\"1.5\" points=\"";
    for (Eigen::Index i = 0; i < r.size(); ++i)
      f << sx(r.xy(i, 0)) << ',' << sy(r.xy(i, 1)) << ' ';
    f << "\"/>\n";
  }
  double legend_y = 24;
  std::map<std::string, bool> seen;
  for (const auto& rep : reports) {
    auto it = colors.find(rep.variant);
    const std::string color = it != colors.end() ? it->second : "#555555";
    f << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.2\" points=\"";
    for (Eigen::Index i = 0; i < rep.t.size(); ++i)
      f << sx(rep.xy(i, 0)) << ',' << sy(rep.xy(i, 1)) << ' ';
    f << "\"/>\n";
    if (!seen[rep.variant]) {
      seen[rep.variant] = true;
      f << "<text x=\"12\" y=\"" << legend_y << "\" fill=\"" << color
        << "\" font-family=\"sans-serif\" font-size=\"14\">" << rep.variant
        << "</text>\n";
      legend_y += 18;
    }
  }
  f << "</svg>\n";
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace cck
