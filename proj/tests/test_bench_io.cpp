#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cck/bench.hpp"
#include "cck/config.hpp"
#include "cck/model_io.hpp"

using namespace cck;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cck_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FittedModels small_models(const PlantParams& plant, DataSet* out_data = nullptr) {
  DataGenConfig dcfg;
  dcfg.episodes = 16;
  dcfg.steps = 150;
  const DataSet data = generate_training_data(plant, dcfg, 5);
  if (out_data) *out_data = data;
  DictConfig dict_cfg;
  dict_cfg.num_rbf = 30;
  dict_cfg.kmeans_subsample = 1500;
  return fit_all(data, plant, dict_cfg, 1e-8, 5);
}

}  // namespace

TEST_CASE("circle reference geometry") {
  ArmParams arm;
  const Vec2 center(1.2, 0.4);
  const ReferenceTrajectory ref =
      make_circle_reference(center, 0.25, 5.0, 1e-3, Elbow::Down, arm);
  REQUIRE(ref.size() == 5001);
  SUBCASE("xy lies on the circle and FK of the IK reference matches") {
    for (Eigen::Index i = 0; i < ref.size(); i += 211) {
      CHECK((ref.xy.row(i).transpose() - Eigen::Vector2d(center)).norm() ==
            doctest::Approx(0.25).epsilon(1e-12));
      const Vec2 th = ref.theta.row(i).transpose();
      CHECK((forward_kinematics(th, arm) - Vec2(ref.xy.row(i).transpose())).norm() <
            1e-9);
    }
  }
  SUBCASE("endpoints close the loop") {
    CHECK((ref.xy.row(0) - ref.xy.row(ref.size() - 1)).norm() < 1e-12);
  }
  SUBCASE("joint path is continuous (unwrapped)") {
    for (Eigen::Index i = 1; i < ref.size(); ++i)
      CHECK((ref.theta.row(i) - ref.theta.row(i - 1)).norm() < 0.01);
  }
  SUBCASE("theta_dot is consistent with finite differences of theta") {
    for (Eigen::Index i = 1; i + 1 < ref.size(); i += 173) {
      const Eigen::RowVector2d fd =
          (ref.theta.row(i + 1) - ref.theta.row(i - 1)) / (2.0 * ref.dt);
      CHECK((ref.theta_dot.row(i) - fd).norm() < 1e-9);
    }
  }
  SUBCASE("zero radius degenerates to a fixed point") {
    const ReferenceTrajectory fixed =
        make_circle_reference(center, 0.0, 5.0, 1e-3, Elbow::Down, arm);
    for (Eigen::Index i = 0; i < fixed.size(); i += 500) {
      CHECK((fixed.xy.row(i).transpose() - Eigen::Vector2d(center)).norm() < 1e-12);
      CHECK(fixed.theta_dot.row(i).norm() < 1e-9);
    }
  }
}

TEST_CASE("training data generation") {
  PlantParams plant;
  DataGenConfig cfg;
  cfg.episodes = 6;
  cfg.steps = 120;
  SUBCASE("deterministic under seed") {
    const DataSet a = generate_training_data(plant, cfg, 7);
    const DataSet b = generate_training_data(plant, cfg, 7);
    CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.U - b.U).cwiseAbs().maxCoeff() == 0.0);
    const DataSet c = generate_training_data(plant, cfg, 8);
    CHECK((a.X - c.X).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("even episodes are autonomous, odd episodes excite within bounds") {
    const DataSet d = generate_training_data(plant, cfg, 9);
    REQUIRE(d.size() == 6 * 120);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (d.episode[i] % 2 == 0) {
        CHECK(d.U.row(i).cwiseAbs().maxCoeff() == 0.0);
      } else {
        CHECK(d.U.row(i).cwiseAbs().maxCoeff() <= cfg.excite_mag);
      }
    }
    CHECK(d.U.cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("zero-order hold structure of the excitation") {
    const DataSet d = generate_training_data(plant, cfg, 10);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (d.episode[i] % 2 == 1 && (i % cfg.steps) % cfg.hold_steps != 0)
        CHECK((d.U.row(i) - d.U.row(i - 1)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("triples chain within an episode") {
    const DataSet d = generate_training_data(plant, cfg, 11);
    for (Eigen::Index i = 1; i < d.size(); ++i)
      if (d.episode[i] == d.episode[i - 1])
        CHECK((d.X.row(i) - d.Xp.row(i - 1)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("initial joint angles respect the sampling box") {
    const DataSet d = generate_training_data(plant, cfg, 12);
    for (Eigen::Index i = 0; i < d.size(); i += cfg.steps) {
      CHECK(d.X(i, 4) >= cfg.theta_lo[0]);
      CHECK(d.X(i, 4) <= cfg.theta_hi[0]);
      CHECK(d.X(i, 5) >= cfg.theta_lo[1]);
      CHECK(d.X(i, 5) <= cfg.theta_hi[1]);
    }
  }
}

TEST_CASE("split_dataset keeps whole trailing episodes for holdout") {
  PlantParams plant;
  DataGenConfig cfg;
  cfg.episodes = 10;
  cfg.steps = 50;
  const DataSet d = generate_training_data(plant, cfg, 13);
  const SplitDataSet s = split_dataset(d, 0.2);
  CHECK(s.train.num_episodes() == 8);
  CHECK(s.holdout.num_episodes() == 2);
  CHECK(s.train.size() + s.holdout.size() == d.size());
  // holdout episodes are the last ones
  CHECK(s.holdout.episode.front() == 8);
  CHECK(s.holdout.episode.back() == 9);
}

TEST_CASE("model save/load round-trips bit-exactly") {
  TempDir tmp;
  PlantParams plant;
  const FittedModels models = small_models(plant);

  SUBCASE("linear model") {
    ModelFile m;
    m.variant = Variant::CCK;
    m.linear = models.cck;
    m.provenance = {1234567890123456789ull, 42};
    save_model(tmp.file("m.json"), m);
    const ModelFile back = load_model(tmp.file("m.json"));
    CHECK(back.format_version == kModelFormatVersion);
    CHECK(back.variant == Variant::CCK);
    CHECK((back.linear.A - m.linear.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.linear.B - m.linear.B).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.linear.dict.centers - m.linear.dict.centers).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((back.linear.dict.widths - m.linear.dict.widths).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(back.provenance.config_hash == m.provenance.config_hash);
    CHECK(back.provenance.seed == m.provenance.seed);
    CHECK(dictionary_hash(back.linear.dict) == dictionary_hash(m.linear.dict));
  }
  SUBCASE("bilinear model") {
    ModelFile m;
    m.variant = Variant::Bilinear;
    m.bilinear = models.bilinear;
    save_model(tmp.file("b.json"), m);
    const ModelFile back = load_model(tmp.file("b.json"));
    REQUIRE(back.bilinear.has_value());
    CHECK((back.bilinear->A - models.bilinear.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.bilinear->N[0] - models.bilinear.N[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.bilinear->N[1] - models.bilinear.N[1]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("model loader rejects bad files") {
  TempDir tmp;
  PlantParams plant;
  const FittedModels models = small_models(plant);
  ModelFile m;
  m.variant = Variant::DMDc;
  m.linear = models.dmdc;
  save_model(tmp.file("m.json"), m);

  SUBCASE("unknown format version") {
    std::string text = slurp(tmp.file("m.json"));
    const std::string key = "\"format_version\":1";
    REQUIRE(text.find(key) != std::string::npos);
    text.replace(text.find(key), key.size(), "\"format_version\":99");
    std::ofstream(tmp.file("v99.json")) << text;
    CHECK_THROWS_AS(load_model(tmp.file("v99.json")), ParseError);
  }
  SUBCASE("truncated file") {
    const std::string text = slurp(tmp.file("m.json"));
    std::ofstream(tmp.file("trunc.json")) << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_model(tmp.file("trunc.json")), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_model(tmp.file("nope.json")), IoError);
  }
}

TEST_CASE("dataset save/load round-trips bit-exactly") {
  TempDir tmp;
  PlantParams plant;
  DataGenConfig cfg;
  cfg.episodes = 4;
  cfg.steps = 60;
  const DataSet d = generate_training_data(plant, cfg, 14);
  save_dataset(tmp.file("d.json"), d, {111, 14});
  const DataSet back = load_dataset(tmp.file("d.json"));
  CHECK((back.X - d.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.U - d.U).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.Xp - d.Xp).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.episode == d.episode);
  CHECK(back.dt == d.dt);
}

TEST_CASE("validate_model invariants") {
  PlantParams plant;
  const FittedModels models = small_models(plant);
  ModelFile m;
  m.variant = Variant::CCK;
  m.linear = models.cck;

  SUBCASE("a fresh CCK model passes everything") {
    for (const auto& item : validate_model(m, plant.act)) {
      INFO(item.name, ": ", item.detail);
      CHECK(item.pass);
    }
  }
  SUBCASE("an off-support B entry fails the structure check") {
    ModelFile bad = m;
    bad.linear.B(10, 0) = 1e-300;  // zero tolerance means exactly zero
    bool structure_failed = false;
    for (const auto& item : validate_model(bad, plant.act))
      if (item.name == "b_structure" && !item.pass) structure_failed = true;
    CHECK(structure_failed);
  }
  SUBCASE("a perturbed actuator row fails the exactness check") {
    ModelFile bad = m;
    bad.linear.A(2, 2) += 1e-9;
    bool row_failed = false;
    for (const auto& item : validate_model(bad, plant.act))
      if (item.name == "exact_actuator_rows" && !item.pass) row_failed = true;
    CHECK(row_failed);
  }
  SUBCASE("DMDc models skip the structural checks but pass the rest") {
    ModelFile dm;
    dm.variant = Variant::DMDc;
    dm.linear = models.dmdc;
    for (const auto& item : validate_model(dm, plant.act)) {
      INFO(item.name);
      CHECK(item.pass);
    }
  }
}

TEST_CASE("make_hybrid grafts CCK structure onto the DMDc A") {
  PlantParams plant;
  const FittedModels models = small_models(plant);
  const LinearLiftedModel h = make_hybrid(models.dmdc, models.cck);
  CHECK(h.variant == Variant::Hybrid);
  // A is bitwise DMDc's; only the input matrix comes from CCK
  CHECK((h.A - models.dmdc.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h.B - models.cck.B).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("CSV writers emit the exact schemas") {
  TempDir tmp;
  SUBCASE("tracking.csv") {
    TrackingReport rep;
    rep.variant = "cck";
    rep.t.resize(3);
    rep.t << 0.0, 0.001, 0.002;
    rep.ref_xy.resize(3, 2);
    rep.ref_xy << 1, 2, 3, 4, 5, 6;
    rep.xy.resize(3, 2);
    rep.xy << 1, 2, 3, 4, 5, 6.5;
    rep.err.resize(3);
    rep.err << 0, 0, 0.5;
    rep.u.resize(3, 2);
    rep.u << 0.1, -0.1, 0.2, -0.2, 0.3, -0.3;
    write_tracking_csv(tmp.file("t.csv"), rep);
    const std::string text = slurp(tmp.file("t.csv"));
    CHECK(text.rfind("t,x_ref,y_ref,x,y,err_m,u1,u2\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  }
  SUBCASE("summary.csv mean errors recompute from tracking data") {
    PlantParams plant;
    const FittedModels models = small_models(plant);
    RunConfig cfg;
    cfg.bench.radii_cm = {5.0};
    cfg.bench.period = 1.0;
    cfg.data.episodes = 16;
    const ComparisonReport rep = run_comparison(cfg, models);
    REQUIRE(rep.rows.size() == 3);
    REQUIRE(rep.tracking.size() == 3);
    for (size_t i = 0; i < rep.rows.size(); ++i) {
      const TrackingReport& tr = rep.tracking[i];
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index j = 0; j < tr.t.size(); ++j)
        if (tr.t[j] >= cfg.bench.settle) {
          sum += tr.err[j];
          ++n;
        }
      CHECK(rep.rows[i].mean_err_cm ==
            doctest::Approx(100.0 * sum / n).epsilon(1e-12));
      CHECK(rep.rows[i].variant == tr.variant);
    }
    write_summary_csv(tmp.file("s.csv"), rep.rows);
    const std::string text = slurp(tmp.file("s.csv"));
    CHECK(text.rfind("variant,radius_cm,mean_err_cm,diverged\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    // byte-identical on rewrite
    write_summary_csv(tmp.file("s2.csv"), rep.rows);
    CHECK(slurp(tmp.file("s2.csv")) == text);
  }
  SUBCASE("hist.csv") {
    HistogramSet hs;
    hs.variants = {"cck"};
    Histogram h;
    h.edges = histogram_edges(1.0, 4);
    h.counts.resize(4);
    h.counts << 1, 2, 3, 4;
    hs.hists = {h};
    hs.medians = {0.5};
    write_hist_csv(tmp.file("h.csv"), hs);
    const std::string text = slurp(tmp.file("h.csv"));
    CHECK(text.rfind("variant,bin_lo,bin_hi,count\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  }
  SUBCASE("overlay SVG is a self-contained document") {
    ArmParams arm;
    const ReferenceTrajectory ref =
        make_circle_reference(Vec2(1.2, 0.4), 0.1, 1.0, 1e-3, Elbow::Down, arm);
    TrackingReport rep;
    rep.variant = "cck";
    rep.t = ref.t;
    rep.ref_xy = ref.xy;
    rep.xy = ref.xy;
    rep.err = Eigen::VectorXd::Zero(ref.size());
    rep.u = Eigen::MatrixXd::Zero(ref.size(), 2);
    write_overlay_svg(tmp.file("o.svg"), {ref}, {rep});
    const std::string text = slurp(tmp.file("o.svg"));
    CHECK(text.find("<svg") != std::string::npos);
    CHECK(text.find("</svg>") != std::string::npos);
    CHECK(text.find("cck") != std::string::npos);
  }
}

TEST_CASE("config parsing") {
  SUBCASE("empty object yields the defaults") {
    const RunConfig cfg = config_from_json_text("{}");
    CHECK(cfg.seed == 42);
    CHECK(cfg.dict.num_rbf == 200);
    CHECK(cfg.mpc.horizon == 50);
    CHECK(cfg.bench.radii_cm == std::vector<double>{5.0, 25.0, 40.0});
  }
  SUBCASE("overrides apply and unknown keys are rejected") {
    const RunConfig cfg = config_from_json_text(R"({"seed": 7, "mpc": {"horizon": 12}})");
    CHECK(cfg.seed == 7);
    CHECK(cfg.mpc.horizon == 12);
    CHECK_THROWS_AS(config_from_json_text(R"({"sead": 7})"), ConfigInvalid);
  }
  SUBCASE("invalid values name the offending field") {
    try {
      validate(config_from_json_text(R"({"mpc": {"horizon": 0}})"));
      CHECK(false);
    } catch (const ConfigInvalid& e) {
      CHECK(std::string(e.what()).find("horizon") != std::string::npos);
    }
  }
  SUBCASE("malformed JSON raises ParseError with a byte offset") {
    try {
      config_from_json_text("{\"seed\": }");
      CHECK(false);
    } catch (const ParseError& e) {
      CHECK(e.byte_offset > 0);
    }
  }
  SUBCASE("hash ignores out_dir and workers but tracks semantic fields") {
    const RunConfig base = config_from_json_text("{}");
    RunConfig moved = base;
    moved.out_dir = "elsewhere";
    moved.workers = 16;
    CHECK(config_hash(moved) == config_hash(base));
    RunConfig different = base;
    different.seed = 43;
    CHECK(config_hash(different) != config_hash(base));
  }
  SUBCASE("canonical round trip") {
    const RunConfig base = config_from_json_text("{}");
    const RunConfig again = config_from_json_text(config_to_json_text(base));
    CHECK(config_to_json_text(again) == config_to_json_text(base));
  }
}
