#include "cck/model_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace cck {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

Eigen::MatrixXd matrix_from_json(const json& a, Eigen::Index rows, Eigen::Index cols,
                                 const std::string& name) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw ParseError("model field '" + name + "' has wrong length (expected " +
                     std::to_string(rows * cols) + ")");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = a[k++].get<double>();
  return m;
}

json dict_to_json(const Dictionary& d) {
  return json{{"state_dim", d.state_dim},
              {"num_rbf", d.num_rbf()},
              {"centers", matrix_to_json(d.centers)},
              {"widths", matrix_to_json(d.widths)},
              {"seed", d.seed}};
}

Dictionary dict_from_json(const json& j) {
  Dictionary d;
  d.state_dim = j.at("state_dim").get<int>();
  const int M = j.at("num_rbf").get<int>();
  d.centers = matrix_from_json(j.at("centers"), M, d.state_dim, "dictionary.centers");
  d.widths = matrix_from_json(j.at("widths"), M, 1, "dictionary.widths");
  d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

json model_to_json(const ModelFile& m) {
  const bool bil = m.variant == Variant::Bilinear;
  const Eigen::MatrixXd& A = bil ? m.bilinear->A : m.linear.A;
  const Eigen::MatrixXd& B = bil ? m.bilinear->B : m.linear.B;
  const Dictionary& dict = bil ? m.bilinear->dict : m.linear.dict;
  const double dt = bil ? m.bilinear->dt : m.linear.dt;
  json j{{"format_version", m.format_version},
         {"variant", variant_name(m.variant)},
         {"d", A.rows()},
         {"n_inputs", B.cols()},
         {"dt", dt},
         {"A", matrix_to_json(A)},
         {"B", matrix_to_json(B)},
         {"dictionary", dict_to_json(dict)},
         {"provenance",
          {{"config_hash", m.provenance.config_hash}, {"seed", m.provenance.seed}}}};
  if (bil) {
    json blocks = json::array();
    for (const auto& N : m.bilinear->N) blocks.push_back(matrix_to_json(N));
    j["bilinear_blocks"] = blocks;
  }
  return j;
}

ModelFile model_from_json(const json& j) {
  if (!j.contains("format_version") || !j.at("format_version").is_number_integer())
    throw ParseError("model file missing integer 'format_version'");
  const int ver = j.at("format_version").get<int>();
  if (ver != kModelFormatVersion)
    throw ParseError("unsupported model format_version " + std::to_string(ver) +
                     " (expected " + std::to_string(kModelFormatVersion) + ")");
  ModelFile m;
  m.format_version = ver;
  m.variant = variant_from_name(j.at("variant").get<std::string>());
  const Eigen::Index d = j.at("d").get<Eigen::Index>();
  const Eigen::Index ni = j.at("n_inputs").get<Eigen::Index>();
  const double dt = j.at("dt").get<double>();
  const Dictionary dict = dict_from_json(j.at("dictionary"));
  if (dict.lifted_dim() != d)
    throw ParseError("model dimension d inconsistent with dictionary");
  const Eigen::MatrixXd A = matrix_from_json(j.at("A"), d, d, "A");
  const Eigen::MatrixXd B = matrix_from_json(j.at("B"), d, ni, "B");
  if (m.variant == Variant::Bilinear) {
    BilinearLiftedModel bm;
    bm.A = A;
    bm.B = B;
    const json& blocks = j.at("bilinear_blocks");
    if (!blocks.is_array() || static_cast<Eigen::Index>(blocks.size()) != ni)
      throw ParseError("model field 'bilinear_blocks' must have n_inputs entries");
    for (Eigen::Index i = 0; i < ni; ++i)
      bm.N[i] = matrix_from_json(blocks[i], d, d, "bilinear_blocks");
    bm.dict = dict;
    bm.dt = dt;
    m.bilinear = std::move(bm);
  } else {
    m.linear.A = A;
    m.linear.B = B;
    m.linear.dict = dict;
    m.linear.dt = dt;
    m.linear.variant = m.variant;
  }
  m.provenance.config_hash = j.at("provenance").at("config_hash").get<std::uint64_t>();
  m.provenance.seed = j.at("provenance").at("seed").get<std::uint64_t>();
  return m;
}

json parse_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("parse error in ") + path + ": " + e.what(),
                     static_cast<long>(e.byte));
  }
}

void write_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open output file: " + path);
  f << j.dump();
  f << '\n';
  if (!f) throw IoError("write failed: " + path);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void save_model(const std::string& path, const ModelFile& m) {
  write_file(path, model_to_json(m));
}

ModelFile load_model(const std::string& path) {
  try {
    return model_from_json(parse_file(path));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file ") + path + ": " + e.what());
  }
}

std::uint64_t dictionary_hash(const Dictionary& dict) {
  return fnv1a(dict_to_json(dict).dump());
}

void save_dataset(const std::string& path, const DataSet& data, const Provenance& prov) {
  json j{{"format_version", kDatasetFormatVersion},
         {"seed", data.seed},
         {"dt", data.dt},
         {"n", data.size()},
         {"episode", data.episode},
         {"X", matrix_to_json(data.X)},
         {"U", matrix_to_json(data.U)},
         {"Xp", matrix_to_json(data.Xp)},
         {"provenance",
          {{"config_hash", prov.config_hash}, {"seed", prov.seed}}}};
  write_file(path, j);
}

DataSet load_dataset(const std::string& path) {
  const json j = parse_file(path);
  try {
    const int ver = j.at("format_version").get<int>();
    if (ver != kDatasetFormatVersion)
      throw ParseError("unsupported dataset format_version " + std::to_string(ver));
    DataSet data;
    const Eigen::Index n = j.at("n").get<Eigen::Index>();
    data.seed = j.at("seed").get<std::uint64_t>();
    data.dt = j.at("dt").get<double>();
    data.episode = j.at("episode").get<std::vector<int>>();
    if (static_cast<Eigen::Index>(data.episode.size()) != n)
      throw ParseError("dataset episode list length mismatch");
    data.X = matrix_from_json(j.at("X"), n, 8, "X");
    data.U = matrix_from_json(j.at("U"), n, 2, "U");
    data.Xp = matrix_from_json(j.at("Xp"), n, 8, "Xp");
    return data;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed dataset file ") + path + ": " + e.what());
  }
}

std::vector<ValidationItem> validate_model(const ModelFile& m,
                                           const ActuatorParams& act) {
  std::vector<ValidationItem> items;
  auto add = [&](const std::string& name, bool pass, double residual,
                 const std::string& detail = "") {
    items.push_back({name, pass, residual, detail});
  };

  const bool bil = m.variant == Variant::Bilinear;
  const Eigen::MatrixXd& A = bil ? m.bilinear->A : m.linear.A;
  const Eigen::MatrixXd& B = bil ? m.bilinear->B : m.linear.B;
  const Dictionary& dict = bil ? m.bilinear->dict : m.linear.dict;

  add("dimensions", A.rows() == A.cols() && A.rows() == dict.lifted_dim() &&
                        B.rows() == A.rows() && B.cols() == 2,
      0.0);
  add("finite_entries", A.allFinite() && B.allFinite(), 0.0);

  if (m.variant == Variant::CCK || m.variant == Variant::Hybrid) {
    // B support exactly the phi_dot rows, entries dt / I_i; zero tolerance.
    bool structure = true;
    double max_offsupport = 0.0;
    for (Eigen::Index r = 0; r < B.rows(); ++r)
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool on_support = r == 2 + c;
        if (on_support) {
          if (B(r, c) != act.dt / act.rotor_inertia[c]) structure = false;
        } else if (B(r, c) != 0.0) {
          structure = false;
          max_offsupport = std::max(max_offsupport, std::abs(B(r, c)));
        }
      }
    add("b_structure", structure, max_offsupport,
        "B nonzero only on phi_dot rows with entries dt/I");
  }
  if (m.variant == Variant::CCK) {
    // Actuator rows must equal the exact Euler coefficients.
    LinearLiftedModel exact = assemble_cck(A, act, dict);
    const double res = (A.topRows(4) - exact.A.topRows(4)).cwiseAbs().maxCoeff();
    add("exact_actuator_rows", res == 0.0, res);
  }

  // In-memory save/load round-trip must reproduce the model bit-exactly.
  bool roundtrip = false;
  double rt_res = 0.0;
  try {
    const ModelFile m2 = model_from_json(json::parse(model_to_json(m).dump()));
    const Eigen::MatrixXd& A2 = bil ? m2.bilinear->A : m2.linear.A;
    const Eigen::MatrixXd& B2 = bil ? m2.bilinear->B : m2.linear.B;
    roundtrip = A2 == A && B2 == B;
    if (bil)
      for (int i = 0; i < 2; ++i)
        roundtrip = roundtrip && m2.bilinear->N[i] == m.bilinear->N[i];
    if (!roundtrip) rt_res = (A2 - A).cwiseAbs().maxCoeff();
  } catch (...) {
    roundtrip = false;
  }
  add("serialization_roundtrip", roundtrip, rt_res);
  return items;
}

}  // namespace cck
