#include "comaze/fingerprint.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

namespace comaze {

namespace {

std::vector<double> centred_axis(int count, double spacing) {
  std::vector<double> v(static_cast<std::size_t>(count));
  const int half = count / 2;
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = (i - half) * spacing;
  return v;
}

void fill_cells(const DeterministicPolicy& policy, const FingerprintGrid& grid, std::size_t first_cell,
                std::size_t last_cell, std::vector<double>& out) {
  const std::size_t cell = grid.cell_size();
  Matrix states(FingerprintGrid::kDims, static_cast<Eigen::Index>(cell));
  for (std::size_t c = first_cell; c < last_cell; ++c) {
    const std::size_t base = c * cell;
    for (std::size_t k = 0; k < cell; ++k) {
      const Observation s = grid.state(base + k);
      for (int d = 0; d < FingerprintGrid::kDims; ++d) states(d, static_cast<Eigen::Index>(k)) = s[d];
    }
    const Vector actions = policy.act_batch(states);
    for (std::size_t k = 0; k < cell; ++k) out[base + k] = actions(static_cast<Eigen::Index>(k));
  }
}

double pearson(const double* a, const double* b, std::size_t n) {
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

FingerprintGrid::FingerprintGrid()
    : FingerprintGrid({centred_axis(9, 0.055), centred_axis(9, 0.055), centred_axis(5, 0.30),
                       centred_axis(5, 0.30), centred_axis(5, 0.05), centred_axis(5, 0.05),
                       centred_axis(5, 0.2), centred_axis(5, 0.2)}) {}

FingerprintGrid::FingerprintGrid(std::array<std::vector<double>, kDims> axes) : axes_(std::move(axes)) {
  size_ = 1;
  for (int d = kDims - 1; d >= 0; --d) {
    const auto& ax = axes_[static_cast<std::size_t>(d)];
    if (ax.empty()) throw std::invalid_argument("FingerprintGrid: empty axis");
    strides_[static_cast<std::size_t>(d)] = size_;
    size_ *= ax.size();
  }
}

Observation FingerprintGrid::state(std::size_t index) const {
  const auto c = coordinates(index);
  Observation s{};
  for (std::size_t d = 0; d < kDims; ++d) s[d] = axes_[d][c[d]];
  return s;
}

std::array<std::size_t, FingerprintGrid::kDims> FingerprintGrid::coordinates(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("FingerprintGrid: index out of range");
  std::array<std::size_t, kDims> c{};
  for (std::size_t d = 0; d < kDims; ++d) {
    c[d] = index / strides_[d];
    index %= strides_[d];
  }
  return c;
}

std::size_t FingerprintGrid::index(const std::array<std::size_t, kDims>& coords) const {
  std::size_t i = 0;
  for (std::size_t d = 0; d < kDims; ++d) {
    if (coords[d] >= axes_[d].size()) throw std::out_of_range("FingerprintGrid: coordinate out of range");
    i += coords[d] * strides_[d];
  }
  return i;
}

std::optional<std::size_t> FingerprintGrid::index_of(const Observation& s) const {
  std::array<std::size_t, kDims> c{};
  for (std::size_t d = 0; d < kDims; ++d) {
    const auto& ax = axes_[d];
    auto it = std::find(ax.begin(), ax.end(), s[d]);
    if (it == ax.end()) return std::nullopt;
    c[d] = static_cast<std::size_t>(it - ax.begin());
  }
  return index(c);
}

std::uint64_t FingerprintGrid::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& ax : axes_) {
    mix(ax.size());
    for (double v : ax) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

std::string FingerprintGrid::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

Fingerprint compute_fingerprint(const DeterministicPolicy& policy, const std::string& tag,
                                const FingerprintGrid& grid, unsigned workers) {
  Fingerprint f{tag, grid.hash_hex(), std::vector<double>(grid.size())};
  const std::size_t cells = grid.size() / grid.cell_size();
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(cells)));
  if (workers == 1) {
    fill_cells(policy, grid, 0, cells, f.actions);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = cells * w / workers;
      const std::size_t hi = cells * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        try {
          fill_cells(policy, grid, lo, hi, f.actions);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (std::size_t i = 0; i < f.actions.size(); ++i) {
    if (!std::isfinite(f.actions[i])) {
      throw FingerprintError("fingerprint: non-finite action at grid index " + std::to_string(i));
    }
  }
  return f;
}

double correlate(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw FingerprintError("correlate: length mismatch");
  if (a.size() < 2) throw FingerprintError("correlate: need at least two entries");
  const double r = pearson(a.data(), b.data(), a.size());
  if (std::isnan(r)) throw FingerprintError("correlate: zero variance");
  return r;
}

double correlate(const Fingerprint& a, const Fingerprint& b) {
  if (a.grid_hash != b.grid_hash) {
    throw FingerprintError("correlate: grid hash mismatch (" + a.grid_hash + " vs " + b.grid_hash + ")");
  }
  return correlate(a.actions, b.actions);
}

CorrelationMatrix correlation_matrix(const std::vector<Fingerprint>& fingerprints) {
  if (fingerprints.size() < 2) throw FingerprintError("correlation_matrix: need at least two fingerprints");
  const std::size_t n = fingerprints.size();
  CorrelationMatrix m;
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (const auto& f : fingerprints) m.tags.push_back(f.tag);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = correlate(fingerprints[i], fingerprints[j]);
      m.values[i][j] = r;
      m.values[j][i] = r;
    }
  }
  return m;
}

SpatialCorrelationMap spatial_map(const Fingerprint& a, const Fingerprint& b,
                                  const FingerprintGrid& grid) {
  if (a.actions.size() != grid.size() || b.actions.size() != grid.size()) {
    throw FingerprintError("spatial_map: fingerprint length does not match the grid");
  }
  if (a.grid_hash != b.grid_hash || a.grid_hash != grid.hash_hex()) {
    throw FingerprintError("spatial_map: grid hash mismatch");
  }
  SpatialCorrelationMap m;
  m.x_values = grid.axis(0);
  m.y_values = grid.axis(1);
  const std::size_t cell = grid.cell_size();
  m.cells.assign(m.x_values.size(), std::vector<std::optional<double>>(m.y_values.size()));
  for (std::size_t ix = 0; ix < m.x_values.size(); ++ix) {
    for (std::size_t iy = 0; iy < m.y_values.size(); ++iy) {
      const std::size_t base = (ix * m.y_values.size() + iy) * cell;
      const double r = pearson(a.actions.data() + base, b.actions.data() + base, cell);
      if (!std::isnan(r)) m.cells[ix][iy] = r;
    }
  }
  return m;
}

void save_fingerprint(const Fingerprint& f, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "fingerprint files are little-endian");
  const nlohmann::json header = {{"schema", kFingerprintSchema},
                                 {"tag", f.tag},
                                 {"grid_hash", f.grid_hash},
                                 {"length", f.actions.size()},
                                 {"encoding", "float64-le"}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FingerprintError("cannot open " + path.string() + " for writing");
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(f.actions.data()),
            static_cast<std::streamsize>(f.actions.size() * sizeof(double)));
  if (!out) throw FingerprintError("write failed for " + path.string());
}

Fingerprint load_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FingerprintError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FingerprintError(path.string() + ": bad header: " + e.what());
  }
  if (header.value("schema", std::string{}) != kFingerprintSchema ||
      header.value("encoding", std::string{}) != "float64-le") {
    throw FingerprintError(path.string() + ": unsupported fingerprint schema");
  }
  Fingerprint f;
  f.tag = header.at("tag").get<std::string>();
  f.grid_hash = header.at("grid_hash").get<std::string>();
  f.actions.resize(header.at("length").get<std::size_t>());
  in.read(reinterpret_cast<char*>(f.actions.data()),
          static_cast<std::streamsize>(f.actions.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(f.actions.size() * sizeof(double))) {
    throw FingerprintError(path.string() + ": truncated payload");
  }
  return f;
}

}  // namespace comaze
