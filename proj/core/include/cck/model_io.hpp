#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cck/koopman_fit.hpp"

namespace cck {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

// Versioned on-disk model: linear (A, B) or bilinear (A, B, N_i) plus the
// dictionary that produced the lifting. JSON, row-major flat matrices.
struct ModelFile {
  int format_version = kModelFormatVersion;
  Variant variant = Variant::DMDc;
  LinearLiftedModel linear;                    // valid unless variant == Bilinear
  std::optional<BilinearLiftedModel> bilinear; // set when variant == Bilinear
  Provenance provenance;
};

void save_model(const std::string& path, const ModelFile& m);
ModelFile load_model(const std::string& path);  // throws ParseError / IoError

// Stable hash of the dictionary payload; used to refuse mixing models that
// were lifted with different dictionaries.
std::uint64_t dictionary_hash(const Dictionary& dict);

void save_dataset(const std::string& path, const DataSet& data,
                  const Provenance& prov);
DataSet load_dataset(const std::string& path);

struct ValidationItem {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  std::string detail;
};

// Side-effect-free invariant suite for a model file: B structure and exact
// actuator rows for CCK/Hybrid, dimension consistency, save/load round-trip.
std::vector<ValidationItem> validate_model(const ModelFile& m,
                                           const ActuatorParams& act);

}  // namespace cck
