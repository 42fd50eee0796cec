#include "cck/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace cck {

using nlohmann::json;

namespace {

Vec2 get_vec2(const json& j, const std::string& section, const std::string& key,
              const Vec2& dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigInvalid("config field '" + section + "." + key +
                        "' must be a 2-element numeric array");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

double get_num(const json& j, const std::string& section, const std::string& key,
               double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number())
    throw ConfigInvalid("config field '" + section + "." + key + "' must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& section, const std::string& key, int dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number_integer())
    throw ConfigInvalid("config field '" + section + "." + key + "' must be an integer");
  return j.at(key).get<int>();
}

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigInvalid("unknown config field '" +
                          (section.empty() ? item.key() : section + "." + item.key()) +
                          "'");
  }
}

json section(const json& j, const std::string& key) {
  if (!j.contains(key)) return json::object();
  if (!j.at(key).is_object())
    throw ConfigInvalid("config field '" + key + "' must be an object");
  return j.at(key);
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config parse error: ") + e.what(),
                     static_cast<long>(e.byte));
  }
  if (!j.is_object()) throw ConfigInvalid("config root must be a JSON object");

  check_keys(j, "", {"seed", "out_dir", "workers", "plant", "dictionary", "data",
                     "fit", "mpc", "bench"});
  RunConfig cfg;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigInvalid("config field 'seed' must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string())
      throw ConfigInvalid("config field 'out_dir' must be a string");
    cfg.out_dir = j.at("out_dir").get<std::string>();
  }
  cfg.workers = get_int(j, "", "workers", cfg.workers);

  const json jp = section(j, "plant");
  check_keys(jp, "plant", {"lengths", "masses", "rotor_inertia", "damping",
                           "stiffness", "gear_ratio", "dt"});
  cfg.plant.arm.lengths = get_vec2(jp, "plant", "lengths", cfg.plant.arm.lengths);
  cfg.plant.arm.masses = get_vec2(jp, "plant", "masses", cfg.plant.arm.masses);
  cfg.plant.act.rotor_inertia =
      get_vec2(jp, "plant", "rotor_inertia", cfg.plant.act.rotor_inertia);
  cfg.plant.act.damping = get_vec2(jp, "plant", "damping", cfg.plant.act.damping);
  cfg.plant.act.stiffness = get_vec2(jp, "plant", "stiffness", cfg.plant.act.stiffness);
  cfg.plant.act.gear_ratio =
      get_vec2(jp, "plant", "gear_ratio", cfg.plant.act.gear_ratio);
  cfg.plant.act.dt = get_num(jp, "plant", "dt", cfg.plant.act.dt);

  const json jd = section(j, "dictionary");
  check_keys(jd, "dictionary", {"num_rbf", "width_frac", "knn", "kmeans_subsample"});
  cfg.dict.num_rbf = get_int(jd, "dictionary", "num_rbf", cfg.dict.num_rbf);
  cfg.dict.width_frac = get_num(jd, "dictionary", "width_frac", cfg.dict.width_frac);
  cfg.dict.knn = get_int(jd, "dictionary", "knn", cfg.dict.knn);
  cfg.dict.kmeans_subsample =
      get_int(jd, "dictionary", "kmeans_subsample", cfg.dict.kmeans_subsample);

  const json jg = section(j, "data");
  check_keys(jg, "data", {"episodes", "steps", "excite_mag", "hold_steps",
                          "theta_lo", "theta_hi", "theta_dot_mag", "deflection_mag",
                          "holdout_fraction"});
  cfg.data.episodes = get_int(jg, "data", "episodes", cfg.data.episodes);
  cfg.data.steps = get_int(jg, "data", "steps", cfg.data.steps);
  cfg.data.excite_mag = get_num(jg, "data", "excite_mag", cfg.data.excite_mag);
  cfg.data.hold_steps = get_int(jg, "data", "hold_steps", cfg.data.hold_steps);
  cfg.data.theta_lo = get_vec2(jg, "data", "theta_lo", cfg.data.theta_lo);
  cfg.data.theta_hi = get_vec2(jg, "data", "theta_hi", cfg.data.theta_hi);
  cfg.data.theta_dot_mag = get_num(jg, "data", "theta_dot_mag", cfg.data.theta_dot_mag);
  cfg.data.deflection_mag =
      get_num(jg, "data", "deflection_mag", cfg.data.deflection_mag);
  cfg.data.holdout_fraction =
      get_num(jg, "data", "holdout_fraction", cfg.data.holdout_fraction);

  const json jf = section(j, "fit");
  check_keys(jf, "fit", {"ridge_scale"});
  cfg.fit.ridge_scale = get_num(jf, "fit", "ridge_scale", cfg.fit.ridge_scale);

  const json jm = section(j, "mpc");
  check_keys(jm, "mpc", {"horizon", "stride", "q_theta", "q_theta_dot", "r_weight",
                         "u_max", "qp_tol", "qp_max_iter"});
  cfg.mpc.horizon = get_int(jm, "mpc", "horizon", cfg.mpc.horizon);
  cfg.mpc.stride = get_int(jm, "mpc", "stride", cfg.mpc.stride);
  cfg.mpc.q_theta = get_num(jm, "mpc", "q_theta", cfg.mpc.q_theta);
  cfg.mpc.q_theta_dot = get_num(jm, "mpc", "q_theta_dot", cfg.mpc.q_theta_dot);
  cfg.mpc.r_weight = get_num(jm, "mpc", "r_weight", cfg.mpc.r_weight);
  cfg.mpc.u_max = get_num(jm, "mpc", "u_max", cfg.mpc.u_max);
  cfg.mpc.qp_tol = get_num(jm, "mpc", "qp_tol", cfg.mpc.qp_tol);
  cfg.mpc.qp_max_iter = get_int(jm, "mpc", "qp_max_iter", cfg.mpc.qp_max_iter);

  const json jb = section(j, "bench");
  check_keys(jb, "bench", {"center", "radii_cm", "period", "elbow", "settle",
                           "hybrid_radius_cm", "hist_bins"});
  cfg.bench.center = get_vec2(jb, "bench", "center", cfg.bench.center);
  if (jb.contains("radii_cm")) {
    if (!jb.at("radii_cm").is_array())
      throw ConfigInvalid("config field 'bench.radii_cm' must be an array");
    cfg.bench.radii_cm.clear();
    for (const auto& r : jb.at("radii_cm")) {
      if (!r.is_number())
        throw ConfigInvalid("config field 'bench.radii_cm' must contain numbers");
      cfg.bench.radii_cm.push_back(r.get<double>());
    }
  }
  cfg.bench.period = get_num(jb, "bench", "period", cfg.bench.period);
  if (jb.contains("elbow")) {
    if (!jb.at("elbow").is_string())
      throw ConfigInvalid("config field 'bench.elbow' must be \"up\" or \"down\"");
    const std::string e = jb.at("elbow").get<std::string>();
    if (e == "up")
      cfg.bench.elbow = Elbow::Up;
    else if (e == "down")
      cfg.bench.elbow = Elbow::Down;
    else
      throw ConfigInvalid("config field 'bench.elbow' must be \"up\" or \"down\"");
  }
  cfg.bench.settle = get_num(jb, "bench", "settle", cfg.bench.settle);
  cfg.bench.hybrid_radius_cm =
      get_num(jb, "bench", "hybrid_radius_cm", cfg.bench.hybrid_radius_cm);
  cfg.bench.hist_bins = get_int(jb, "bench", "hist_bins", cfg.bench.hist_bins);

  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json_text(ss.str());
}

void validate(const RunConfig& cfg) {
  auto positive2 = [](const Vec2& v, const std::string& name) {
    if (!(v[0] > 0 && v[1] > 0))
      throw ConfigInvalid("config field '" + name + "' entries must be > 0");
  };
  positive2(cfg.plant.arm.lengths, "plant.lengths");
  positive2(cfg.plant.arm.masses, "plant.masses");
  positive2(cfg.plant.act.rotor_inertia, "plant.rotor_inertia");
  positive2(cfg.plant.act.damping, "plant.damping");
  positive2(cfg.plant.act.stiffness, "plant.stiffness");
  positive2(cfg.plant.act.gear_ratio, "plant.gear_ratio");
  if (!(cfg.plant.act.dt > 0)) throw ConfigInvalid("config field 'plant.dt' must be > 0");
  if (cfg.dict.num_rbf < 1)
    throw ConfigInvalid("config field 'dictionary.num_rbf' must be >= 1");
  if (!(cfg.dict.width_frac > 0))
    throw ConfigInvalid("config field 'dictionary.width_frac' must be > 0");
  if (cfg.data.episodes < 2)
    throw ConfigInvalid("config field 'data.episodes' must be >= 2");
  if (cfg.data.steps < 1) throw ConfigInvalid("config field 'data.steps' must be >= 1");
  if (cfg.data.hold_steps < 1)
    throw ConfigInvalid("config field 'data.hold_steps' must be >= 1");
  if (!(cfg.data.holdout_fraction > 0 && cfg.data.holdout_fraction < 1))
    throw ConfigInvalid("config field 'data.holdout_fraction' must be in (0, 1)");
  if (!(cfg.fit.ridge_scale >= 0))
    throw ConfigInvalid("config field 'fit.ridge_scale' must be >= 0");
  if (cfg.mpc.horizon < 1) throw ConfigInvalid("config field 'mpc.horizon' must be >= 1");
  if (cfg.mpc.stride < 1) throw ConfigInvalid("config field 'mpc.stride' must be >= 1");
  if (!(cfg.mpc.u_max > 0)) throw ConfigInvalid("config field 'mpc.u_max' must be > 0");
  if (!(cfg.mpc.r_weight > 0))
    throw ConfigInvalid("config field 'mpc.r_weight' must be > 0");
  if (!(cfg.bench.period > 0))
    throw ConfigInvalid("config field 'bench.period' must be > 0");
  if (cfg.bench.hist_bins < 1)
    throw ConfigInvalid("config field 'bench.hist_bins' must be >= 1");
  if (cfg.workers < 1) throw ConfigInvalid("config field 'workers' must be >= 1");
}

std::string config_to_json_text(const RunConfig& cfg) {
  auto arr2 = [](const Vec2& v) { return json::array({v[0], v[1]}); };
  json j = {
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"workers", cfg.workers},
      {"plant",
       {{"lengths", arr2(cfg.plant.arm.lengths)},
        {"masses", arr2(cfg.plant.arm.masses)},
        {"rotor_inertia", arr2(cfg.plant.act.rotor_inertia)},
        {"damping", arr2(cfg.plant.act.damping)},
        {"stiffness", arr2(cfg.plant.act.stiffness)},
        {"gear_ratio", arr2(cfg.plant.act.gear_ratio)},
        {"dt", cfg.plant.act.dt}}},
      {"dictionary",
       {{"num_rbf", cfg.dict.num_rbf},
        {"width_frac", cfg.dict.width_frac},
        {"knn", cfg.dict.knn},
        {"kmeans_subsample", cfg.dict.kmeans_subsample}}},
      {"data",
       {{"episodes", cfg.data.episodes},
        {"steps", cfg.data.steps},
        {"excite_mag", cfg.data.excite_mag},
        {"hold_steps", cfg.data.hold_steps},
        {"theta_lo", arr2(cfg.data.theta_lo)},
        {"theta_hi", arr2(cfg.data.theta_hi)},
        {"theta_dot_mag", cfg.data.theta_dot_mag},
        {"deflection_mag", cfg.data.deflection_mag},
        {"holdout_fraction", cfg.data.holdout_fraction}}},
      {"fit", {{"ridge_scale", cfg.fit.ridge_scale}}},
      {"mpc",
       {{"horizon", cfg.mpc.horizon},
        {"stride", cfg.mpc.stride},
        {"q_theta", cfg.mpc.q_theta},
        {"q_theta_dot", cfg.mpc.q_theta_dot},
        {"r_weight", cfg.mpc.r_weight},
        {"u_max", cfg.mpc.u_max},
        {"qp_tol", cfg.mpc.qp_tol},
        {"qp_max_iter", cfg.mpc.qp_max_iter}}},
      {"bench",
       {{"center", arr2(cfg.bench.center)},
        {"radii_cm", cfg.bench.radii_cm},
        {"period", cfg.bench.period},
        {"elbow", cfg.bench.elbow == Elbow::Up ? "up" : "down"},
        {"settle", cfg.bench.settle},
        {"hybrid_radius_cm", cfg.bench.hybrid_radius_cm},
        {"hist_bins", cfg.bench.hist_bins}}},
  };
  return j.dump(2);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  // Execution-only fields must not perturb artifact provenance.
  RunConfig canon = cfg;
  canon.out_dir.clear();
  canon.workers = 1;
  const std::string text = config_to_json_text(canon);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace cck
