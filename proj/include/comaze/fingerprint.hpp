#pragma once

#include "comaze/sac_agent.hpp"
#include "comaze/tray_physics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace comaze {

// Canonical state grid for behaviour comparison. Dimension order follows the
// observation vector; x varies slowest and phi_rate fastest.
class FingerprintGrid {
 public:
  static constexpr int kDims = 8;

  // 9 positions at 5.5 cm, 5 speeds at 30 cm/s, 5 tilts at 0.05 rad,
  // 5 tilt rates at 0.2 rad/s, all centred on zero.
  FingerprintGrid();
  explicit FingerprintGrid(std::array<std::vector<double>, kDims> axes);

  std::size_t size() const { return size_; }
  const std::vector<double>& axis(int d) const { return axes_[static_cast<std::size_t>(d)]; }
  // Number of grid states sharing one (x, y) cell.
  std::size_t cell_size() const { return size_ / (axes_[0].size() * axes_[1].size()); }

  Observation state(std::size_t index) const;
  std::array<std::size_t, kDims> coordinates(std::size_t index) const;
  std::size_t index(const std::array<std::size_t, kDims>& coords) const;
  // Looks a state up by exact axis values; nullopt when off-grid.
  std::optional<std::size_t> index_of(const Observation& s) const;

  // Stable 64-bit hash of the axis values, written into fingerprint files.
  std::uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::array<std::vector<double>, kDims> axes_;
  std::array<std::size_t, kDims> strides_{};
  std::size_t size_ = 0;
};

struct Fingerprint {
  std::string tag;
  std::string grid_hash;
  std::vector<double> actions;
};

class FingerprintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic actions over the whole grid. workers > 1 evaluates (x, y)
// cells on separate threads; results are assembled in grid order.
Fingerprint compute_fingerprint(const DeterministicPolicy& policy, const std::string& tag,
                                const FingerprintGrid& grid, unsigned workers = 1);

// Pearson correlation; throws on length mismatch or zero variance.
double correlate(const std::vector<double>& a, const std::vector<double>& b);
double correlate(const Fingerprint& a, const Fingerprint& b);

struct CorrelationMatrix {
  std::vector<std::string> tags;
  std::vector<std::vector<double>> values;
};

CorrelationMatrix correlation_matrix(const std::vector<Fingerprint>& fingerprints);

// Per-(x, y) correlation over the co-indexed states of each cell; a cell
// where either side has zero variance stays empty.
struct SpatialCorrelationMap {
  std::vector<double> x_values;
  std::vector<double> y_values;
  std::vector<std::vector<std::optional<double>>> cells;  // [ix][iy]
};

SpatialCorrelationMap spatial_map(const Fingerprint& a, const Fingerprint& b,
                                  const FingerprintGrid& grid);

// Binary file: one JSON header line (schema, tag, grid hash, length,
// encoding) followed by little-endian float64 actions.
inline constexpr const char* kFingerprintSchema = "co-maze-fingerprint/v1";
void save_fingerprint(const Fingerprint& f, const std::filesystem::path& path);
Fingerprint load_fingerprint(const std::filesystem::path& path);

}  // namespace comaze
