#pragma once

// FieldSnapshot file: one line of JSON header
//   {"format":"pam-field","version":1,"d":..,"R":..,"boundary_mode":..,
//    "center":[..],"time":..,"seed":..,"log_scale":..,"count":n}
// followed by n little-endian IEEE-754 doubles. -inf is stored as its own
// bit pattern, so the round trip is bit-exact.

#include <cstdint>
#include <filesystem>

#include "pam/lattice.hpp"

namespace pam {

struct SnapshotHeader {
  int dim = 1;
  int radius = 0;
  BoundaryMode mode = BoundaryMode::zero_dirichlet;
  Point center;
  double time = 0.0;
  std::uint64_t seed = 0;
  // Stored values are u * exp(-log_scale).
  double log_scale = 0.0;
};

struct Snapshot {
  SnapshotHeader header;
  Field field;
};

void save_field(const Field& f, const std::filesystem::path& path, double time = 0.0,
                std::uint64_t seed = 0, double log_scale = 0.0);
Snapshot load_snapshot(const std::filesystem::path& path);
Field load_field(const std::filesystem::path& path);

}  // namespace pam
