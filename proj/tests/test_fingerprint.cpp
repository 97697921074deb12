#include "comaze/fingerprint.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

namespace comaze {
namespace {

// Smooth stand-in policy of everything except position; optionally
// negated, or altered inside one (x, y) cell.
class StubPolicy : public DeterministicPolicy {
 public:
  double sign = 1.0;
  double constant = std::nan("");
  std::optional<Vec2> odd_cell;

  Vector act_batch(const Matrix& obs) const override {
    Vector out(obs.cols());
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      if (!std::isnan(constant)) {
        out(j) = constant;
        continue;
      }
      double u = 1.5 * obs(2, j) - 0.7 * obs(3, j) + 6.0 * obs(4, j) + 3.0 * obs(5, j) + 0.8 * obs(6, j) -
                 0.4 * obs(7, j) + 2.0 * obs(0, j) * obs(1, j);
      if (odd_cell && obs(0, j) == odd_cell->x && obs(1, j) == odd_cell->y) u = -u * u;
      out(j) = sign * std::tanh(u);
    }
    return out;
  }
};

TEST(FingerprintGrid, SizeAndAxes) {
  const FingerprintGrid grid;
  EXPECT_EQ(grid.size(), 1265625u);
  EXPECT_EQ(grid.cell_size(), 15625u);
  EXPECT_EQ(grid.axis(0).size(), 9u);
  EXPECT_NEAR(grid.axis(0).front(), -0.22, 1e-12);
  EXPECT_NEAR(grid.axis(0)[1] - grid.axis(0)[0], 0.055, 1e-12);
  EXPECT_NEAR(grid.axis(2).back(), 0.6, 1e-12);
  EXPECT_NEAR(grid.axis(4).back(), 0.1, 1e-12);
  EXPECT_NEAR(grid.axis(7).front(), -0.4, 1e-12);
  EXPECT_EQ(grid.hash(), FingerprintGrid().hash());
  EXPECT_EQ(grid.hash_hex().size(), 16u);
}

TEST(FingerprintGrid, OrderIsXSlowestPhiRateFastest) {
  const FingerprintGrid grid;
  const Observation first = grid.state(0);
  const Observation second = grid.state(1);
  EXPECT_EQ(first[7], grid.axis(7)[0]);
  EXPECT_EQ(second[7], grid.axis(7)[1]);
  EXPECT_EQ(second[0], first[0]);
  EXPECT_EQ(grid.state(15625 * 9)[0], grid.axis(0)[1]);
  EXPECT_EQ(grid.state(grid.size() - 1)[0], grid.axis(0).back());
  EXPECT_THROW(grid.state(grid.size()), std::out_of_range);
}

TEST(FingerprintGrid, IndexStateBijectionSpotCheck) {
  const FingerprintGrid grid;
  Rng rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t idx = pick(rng);
    const Observation s = grid.state(idx);
    ASSERT_EQ(grid.index_of(s), idx);
    ASSERT_EQ(grid.index(grid.coordinates(idx)), idx);
  }
  Observation off = grid.state(0);
  off[3] += 0.01;
  EXPECT_FALSE(grid.index_of(off));
}

TEST(Fingerprint, LengthBoundsAndDeterminism) {
  const FingerprintGrid grid;
  const StubPolicy stub;
  const Fingerprint a = compute_fingerprint(stub, "a", grid);
  const Fingerprint b = compute_fingerprint(stub, "a", grid);
  ASSERT_EQ(a.actions.size(), 1265625u);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.grid_hash, grid.hash_hex());
  for (double v : a.actions) ASSERT_LE(std::abs(v), 1.0);
}

TEST(Fingerprint, ConstantPolicyGivesConstantVector) {
  const FingerprintGrid grid;
  StubPolicy stub;
  stub.constant = 0.25;
  const Fingerprint f = compute_fingerprint(stub, "c", grid, 2);
  for (double v : f.actions) ASSERT_EQ(v, 0.25);
  EXPECT_THROW(correlate(f, f), FingerprintError);
}

TEST(Fingerprint, ParallelEqualsSequentialForARealAgent) {
  const FingerprintGrid grid;
  SacAgent agent(SacConfig{}, 5);
  Rng rng(6);
  agent.actor().initialize(rng, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const Fingerprint seq = compute_fingerprint(agent, "a", grid, 1);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Fingerprint par = compute_fingerprint(agent, "a", grid, 4);
  EXPECT_EQ(seq.actions, par.actions);
  EXPECT_LT(seconds, 300.0);
  for (std::size_t i = 0; i < seq.actions.size(); i += 997) {
    ASSERT_NEAR(seq.actions[i], agent.act_deterministic(grid.state(i)), 1e-12);  // batched vs single-state rounding
  }
  EXPECT_NEAR(correlate(seq, par), 1.0, 1e-9);
}

TEST(Correlate, HandComputedExample) {
  EXPECT_NEAR(correlate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-15);
  EXPECT_NEAR(oracle::pearson({1, 2, 3}, {1, 3, 2}), 0.5, 1e-15);
}

TEST(Correlate, AgreesWithOracleAndIsAffineInvariant) {
  Rng rng(2);
  std::normal_distribution<double> z;
  std::vector<double> a(5000), b(5000), c(5000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = z(rng);
    b[i] = 0.6 * a[i] + z(rng);
  }
  const double r = correlate(a, b);
  EXPECT_NEAR(r, oracle::pearson(a, b), 1e-12);
  for (std::size_t i = 0; i < b.size(); ++i) c[i] = 3.7 * b[i] - 12.0;
  EXPECT_NEAR(correlate(a, c), r, 1e-9);
  for (std::size_t i = 0; i < b.size(); ++i) c[i] = -b[i];
  EXPECT_NEAR(correlate(a, c), -r, 1e-12);
  EXPECT_NEAR(correlate(a, a), 1.0, 1e-9);
}

TEST(Correlate, Errors) {
  EXPECT_THROW(correlate(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), FingerprintError);
  EXPECT_THROW(correlate(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), FingerprintError);
  Fingerprint a{"a", "0000000000000001", {1, 2, 3}};
  Fingerprint b{"b", "0000000000000002", {1, 3, 2}};
  EXPECT_THROW(correlate(a, b), FingerprintError);
}

TEST(CorrelationMatrix, NegatedStubs) {
  const FingerprintGrid grid;
  StubPolicy f, neg;
  neg.sign = -1.0;
  const Fingerprint ff = compute_fingerprint(f, "f", grid);
  Fingerprint f2 = ff;
  f2.tag = "f2";
  const Fingerprint fn = compute_fingerprint(neg, "-f", grid);
  const CorrelationMatrix m = correlation_matrix({ff, f2, fn});
  EXPECT_EQ(m.tags, (std::vector<std::string>{"f", "f2", "-f"}));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(m.values[i][i], 1.0, 1e-9);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(m.values[i][j], m.values[j][i]);
  }
  EXPECT_NEAR(m.values[0][1], 1.0, 1e-9);
  EXPECT_NEAR(m.values[0][2], -1.0, 1e-9);
  EXPECT_NEAR(m.values[1][2], -1.0, 1e-9);
  EXPECT_THROW(correlation_matrix({ff}), FingerprintError);
}

TEST(SpatialMap, SelfMapIsAllOnes) {
  const FingerprintGrid grid;
  const StubPolicy f;
  const Fingerprint ff = compute_fingerprint(f, "f", grid);
  const SpatialCorrelationMap m = spatial_map(ff, ff, grid);
  ASSERT_EQ(m.cells.size(), 9u);
  for (const auto& row : m.cells) {
    ASSERT_EQ(row.size(), 9u);
    for (const auto& c : row) {
      ASSERT_TRUE(c);
      EXPECT_NEAR(*c, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(m.x_values, grid.axis(0));
  EXPECT_EQ(m.y_values, grid.axis(1));
}

TEST(SpatialMap, StubsDifferingInOneCellGiveExactlyOneLowCell) {
  const FingerprintGrid grid;
  StubPolicy f, g;
  g.odd_cell = Vec2{grid.axis(0)[2], grid.axis(1)[6]};
  const SpatialCorrelationMap m =
      spatial_map(compute_fingerprint(f, "f", grid), compute_fingerprint(g, "g", grid), grid);
  int low = 0;
  for (std::size_t ix = 0; ix < 9; ++ix) {
    for (std::size_t iy = 0; iy < 9; ++iy) {
      ASSERT_TRUE(m.cells[ix][iy]);
      if (*m.cells[ix][iy] < 1.0 - 1e-9) {
        ++low;
        EXPECT_EQ(ix, 2u);
        EXPECT_EQ(iy, 6u);
      }
    }
  }
  EXPECT_EQ(low, 1);
}

TEST(SpatialMap, ZeroVarianceCellsAreFlagged) {
  std::array<std::vector<double>, 8> axes;
  axes.fill({0.0});
  axes[0] = {-0.1, 0.1};
  axes[1] = {0.0};
  axes[2] = {-0.3, 0.0, 0.3};
  const FingerprintGrid small(axes);
  Fingerprint a{"a", small.hash_hex(), {1, 1, 1, 0.1, 0.2, 0.3}};
  Fingerprint b{"b", small.hash_hex(), {3, 2, 1, 0.2, 0.4, 0.6}};
  const SpatialCorrelationMap m = spatial_map(a, b, small);
  EXPECT_FALSE(m.cells[0][0]);
  ASSERT_TRUE(m.cells[1][0]);
  EXPECT_NEAR(*m.cells[1][0], 1.0, 1e-12);
  const FingerprintGrid full;
  EXPECT_THROW(spatial_map(a, b, full), FingerprintError);
}

TEST(FingerprintFile, RoundTripAndRejection) {
  const auto dir = std::filesystem::temp_directory_path() / "comaze_fp_test";
  std::filesystem::create_directories(dir);
  const Fingerprint f{"agent one", "00000000deadbeef", {0.5, -0.25, 1.0 / 3.0, -1.0}};
  save_fingerprint(f, dir / "a.fp");
  const Fingerprint g = load_fingerprint(dir / "a.fp");
  EXPECT_EQ(g.tag, f.tag);
  EXPECT_EQ(g.grid_hash, f.grid_hash);
  EXPECT_EQ(g.actions, f.actions);

  const auto bytes = std::filesystem::file_size(dir / "a.fp");
  std::filesystem::resize_file(dir / "a.fp", bytes - 4);
  EXPECT_THROW(load_fingerprint(dir / "a.fp"), FingerprintError);
  {
    std::ofstream bad(dir / "b.fp");
    bad << "{\"schema\":\"something-else\"}\n";
  }
  EXPECT_THROW(load_fingerprint(dir / "b.fp"), FingerprintError);
  EXPECT_THROW(load_fingerprint(dir / "missing.fp"), FingerprintError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace comaze
