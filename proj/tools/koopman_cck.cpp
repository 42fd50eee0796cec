// Command-line front end: data generation, model fitting, tracking benchmarks,
// the hybrid ablation, prediction histograms, and model validation.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cck/bench.hpp"
#include "cck/config.hpp"
#include "cck/model_io.hpp"

namespace fs = std::filesystem;
using namespace cck;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
};

RunConfig effective_config(const GlobalOpts& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) {
    try {
      cfg = load_config(g.config_path);
    } catch (const ParseError& e) {
      // malformed configuration is a config error, not an I/O error
      throw ConfigInvalid(e.what());
    }
  }
  if (const char* env = std::getenv("KOOPMAN_CCK_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigInvalid("KOOPMAN_CCK_SEED must be an unsigned integer");
    }
  }
  if (g.seed) cfg.seed = *g.seed;          // flag beats env beats file
  if (g.out_dir) cfg.out_dir = *g.out_dir;
  if (g.workers) cfg.workers = *g.workers;
  validate(cfg);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

ModelFile wrap_linear(const LinearLiftedModel& m, const RunConfig& cfg) {
  ModelFile f;
  f.variant = m.variant;
  f.linear = m;
  f.provenance = {config_hash(cfg), cfg.seed};
  return f;
}

ModelFile wrap_bilinear(const BilinearLiftedModel& m, const RunConfig& cfg) {
  ModelFile f;
  f.variant = Variant::Bilinear;
  f.bilinear = m;
  f.provenance = {config_hash(cfg), cfg.seed};
  return f;
}

const Dictionary& model_dict(const ModelFile& m) {
  return m.variant == Variant::Bilinear ? m.bilinear->dict : m.linear.dict;
}

void require_shared_dictionary(const std::vector<const ModelFile*>& models) {
  if (models.empty()) return;
  const std::uint64_t h0 = dictionary_hash(model_dict(*models[0]));
  for (const ModelFile* m : models)
    if (dictionary_hash(model_dict(*m)) != h0)
      throw DictionaryMismatch("models were lifted with different dictionaries");
}

std::string tracking_name(const std::string& variant, double radius_cm) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "tracking_%s_r%g.csv", variant.c_str(), radius_cm);
  return buf;
}

int cmd_gen_data(const GlobalOpts& g, const std::string& output) {
  const RunConfig cfg = effective_config(g);
  const DataSet data = generate_training_data(cfg.plant, cfg.data, cfg.seed);
  const std::string path = output.empty() ? out_path(cfg, "dataset.json") : output;
  save_dataset(path, data, {config_hash(cfg), cfg.seed});
  std::cout << "wrote " << path << " (" << data.size() << " triples, "
            << data.num_episodes() << " episodes)\n";
  return kExitOk;
}

int cmd_fit(const GlobalOpts& g, const std::string& dataset_path,
            const std::string& variant_str, const std::string& output) {
  const RunConfig cfg = effective_config(g);
  const Variant variant = variant_from_name(variant_str);
  if (variant == Variant::Hybrid)
    throw ConfigInvalid("use the 'hybrid' subcommand for the hybrid model");
  const DataSet data = load_dataset(dataset_path);
  const SplitDataSet split = split_dataset(data, cfg.data.holdout_fraction);
  const Dictionary dict = make_dictionary(split.train, cfg.dict, cfg.seed);

  const Eigen::MatrixXd Z = lift_all(split.train.X, dict);
  const double ridge = cfg.fit.ridge_scale * Z.squaredNorm();
  FitDiagnostics diag;

  ModelFile file;
  if (variant == Variant::CCK) {
    const DataSet shifted = shift_to_autonomous(split.train, cfg.plant.act);
    const Eigen::MatrixXd A_auto =
        fit_autonomous_A(Z, lift_all(shifted.Xp, dict), ridge, &diag);
    file = wrap_linear(assemble_cck(A_auto, cfg.plant.act, dict), cfg);
  } else if (variant == Variant::DMDc) {
    file = wrap_linear(fit_dmdc(Z, split.train.U, lift_all(split.train.Xp, dict), dict,
                                cfg.plant.act.dt, ridge, &diag),
                       cfg);
  } else {
    file = wrap_bilinear(fit_bilinear(Z, split.train.U, lift_all(split.train.Xp, dict),
                                      dict, cfg.plant.act.dt, ridge, &diag),
                         cfg);
  }
  const std::string path =
      output.empty() ? out_path(cfg, "model_" + variant_str + ".json") : output;
  save_model(path, file);
  std::cout << "wrote " << path << " (gram cond ~ " << diag.gram_cond << ")\n";
  return kExitOk;
}

int cmd_bench(const GlobalOpts& g, const std::vector<std::string>& model_paths) {
  const RunConfig cfg = effective_config(g);
  std::optional<LinearLiftedModel> cck_m, dmdc_m;
  std::optional<BilinearLiftedModel> bil_m;
  std::vector<ModelFile> files;
  files.reserve(model_paths.size());
  for (const auto& p : model_paths) files.push_back(load_model(p));
  std::vector<const ModelFile*> ptrs;
  for (const auto& f : files) ptrs.push_back(&f);
  require_shared_dictionary(ptrs);
  for (const auto& f : files) {
    if (f.variant == Variant::CCK) cck_m = f.linear;
    if (f.variant == Variant::DMDc) dmdc_m = f.linear;
    if (f.variant == Variant::Bilinear) bil_m = *f.bilinear;
  }
  if (!cck_m || !dmdc_m || !bil_m)
    throw ConfigInvalid("bench needs one cck, one dmdc and one bilinear model");

  FittedModels models;
  models.cck = std::move(*cck_m);
  models.dmdc = std::move(*dmdc_m);
  models.bilinear = std::move(*bil_m);

  const ComparisonReport rep = run_comparison(cfg, models);
  write_summary_csv(out_path(cfg, "summary.csv"), rep.rows);
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    write_tracking_csv(
        out_path(cfg, tracking_name(rep.rows[i].variant, rep.rows[i].radius_cm)),
        rep.tracking[i]);

  std::vector<ReferenceTrajectory> refs;
  for (double rcm : cfg.bench.radii_cm)
    refs.push_back(make_circle_reference(cfg.bench.center, rcm / 100.0,
                                         cfg.bench.period, cfg.plant.act.dt,
                                         cfg.bench.elbow, cfg.plant.arm));
  write_overlay_svg(out_path(cfg, "overlay.svg"), refs, rep.tracking);

  for (const auto& r : rep.rows)
    std::cout << r.variant << " r=" << r.radius_cm << "cm mean_err=" << r.mean_err_cm
              << "cm" << (r.diverged ? " (diverged)" : "") << "\n";
  for (const auto& r : rep.rows)
    if (r.diverged) return kExitNumeric;
  return kExitOk;
}

int cmd_hybrid(const GlobalOpts& g, const std::string& dmdc_path,
               const std::string& cck_path) {
  const RunConfig cfg = effective_config(g);
  const ModelFile fd = load_model(dmdc_path);
  const ModelFile fc = load_model(cck_path);
  if (fd.variant != Variant::DMDc) throw ConfigInvalid("--dmdc model is not DMDc");
  if (fc.variant != Variant::CCK) throw ConfigInvalid("--cck model is not CCK");
  require_shared_dictionary({&fd, &fc});

  const ComparisonReport rep = run_hybrid(cfg, fd.linear, fc.linear);
  write_summary_csv(out_path(cfg, "hybrid_summary.csv"), rep.rows);
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    write_tracking_csv(
        out_path(cfg, tracking_name(rep.rows[i].variant, rep.rows[i].radius_cm)),
        rep.tracking[i]);
  const ReferenceTrajectory ref = make_circle_reference(
      cfg.bench.center, cfg.bench.hybrid_radius_cm / 100.0, cfg.bench.period,
      cfg.plant.act.dt, cfg.bench.elbow, cfg.plant.arm);
  write_overlay_svg(out_path(cfg, "hybrid_overlay.svg"), {ref}, rep.tracking);
  for (const auto& r : rep.rows)
    std::cout << r.variant << " r=" << r.radius_cm << "cm mean_err=" << r.mean_err_cm
              << "cm" << (r.diverged ? " (diverged)" : "") << "\n";
  for (const auto& r : rep.rows)
    if (r.diverged) return kExitNumeric;
  return kExitOk;
}

int cmd_hist(const GlobalOpts& g, const std::string& dataset_path,
             const std::vector<std::string>& model_paths) {
  const RunConfig cfg = effective_config(g);
  const DataSet data = load_dataset(dataset_path);
  const SplitDataSet split = split_dataset(data, cfg.data.holdout_fraction);

  std::vector<ModelFile> files;
  for (const auto& p : model_paths) files.push_back(load_model(p));
  std::vector<const ModelFile*> ptrs;
  for (const auto& f : files) ptrs.push_back(&f);
  require_shared_dictionary(ptrs);

  FittedModels models;
  bool have_cck = false, have_dmdc = false, have_bil = false;
  for (const auto& f : files) {
    if (f.variant == Variant::CCK) models.cck = f.linear, have_cck = true;
    if (f.variant == Variant::DMDc) models.dmdc = f.linear, have_dmdc = true;
    if (f.variant == Variant::Bilinear) models.bilinear = *f.bilinear, have_bil = true;
  }
  if (!have_cck || !have_dmdc || !have_bil)
    throw ConfigInvalid("hist needs one cck, one dmdc and one bilinear model");

  const HistogramSet set =
      prediction_histograms(models, split.holdout, cfg.bench.hist_bins);
  write_hist_csv(out_path(cfg, "hist.csv"), set);
  for (std::size_t v = 0; v < set.variants.size(); ++v)
    std::cout << set.variants[v] << " median one-step error: " << set.medians[v]
              << "\n";
  return kExitOk;
}

int cmd_validate(const GlobalOpts& g, const std::string& model_path) {
  const RunConfig cfg = effective_config(g);
  const ModelFile m = load_model(model_path);
  const auto items = validate_model(m, cfg.plant.act);
  bool all_pass = true;
  for (const auto& it : items) {
    std::cout << (it.pass ? "PASS" : "FAIL") << ' ' << it.name
              << " (residual=" << it.residual << ")"
              << (it.detail.empty() ? "" : " - " + it.detail) << "\n";
    all_pass = all_pass && it.pass;
  }
  return all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-coherent Koopman modeling and MPC benchmarks"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::uint64_t seed_val = 0;
  std::string out_val;
  int workers_val = 0;
  app.add_option("--config", g.config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed_val, "override RNG seed");
  auto* out_opt = app.add_option("--out", out_val, "override output directory");
  auto* workers_opt = app.add_option("--workers", workers_val, "parallel runs");

  std::string output, dataset, variant = "cck", model_path, dmdc_path, cck_path;
  std::vector<std::string> model_paths;

  auto* gen = app.add_subcommand("gen-data", "generate training data");
  gen->add_option("--output", output, "dataset file path");

  auto* fit = app.add_subcommand("fit", "fit a lifted model");
  fit->add_option("--dataset", dataset, "dataset file")->required();
  fit->add_option("--variant", variant, "cck | dmdc | bilinear")->required();
  fit->add_option("--output", output, "model file path");

  auto* bench = app.add_subcommand("bench", "tracking comparison (3 models x radii)");
  bench->add_option("--models", model_paths, "model files (cck, dmdc, bilinear)")
      ->required()
      ->expected(-1);

  auto* hybrid = app.add_subcommand("hybrid", "DMDc vs A_dmdc + B_cck ablation");
  hybrid->add_option("--dmdc", dmdc_path, "DMDc model file")->required();
  hybrid->add_option("--cck", cck_path, "CCK model file")->required();

  auto* hist = app.add_subcommand("hist", "one-step prediction histograms");
  hist->add_option("--dataset", dataset, "dataset file")->required();
  hist->add_option("--models", model_paths, "model files")->required()->expected(-1);

  auto* val = app.add_subcommand("validate", "model-file invariant checks");
  val->add_option("--model", model_path, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (seed_opt->count() > 0) g.seed = seed_val;
  if (out_opt->count() > 0) g.out_dir = out_val;
  if (workers_opt->count() > 0) g.workers = workers_val;

  try {
    if (gen->parsed()) return cmd_gen_data(g, output);
    if (fit->parsed()) return cmd_fit(g, dataset, variant, output);
    if (bench->parsed()) return cmd_bench(g, model_paths);
    if (hybrid->parsed()) return cmd_hybrid(g, dmdc_path, cck_path);
    if (hist->parsed()) return cmd_hist(g, dataset, model_paths);
    if (val->parsed()) return cmd_validate(g, model_path);
  } catch (const ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DictionaryMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonFiniteState& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const SingularGram& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Unreachable& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParseError& e) {
    std::cerr << "i/o error: " << e.what();
    if (e.byte_offset >= 0) std::cerr << " (byte " << e.byte_offset << ")";
    std::cerr << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}
