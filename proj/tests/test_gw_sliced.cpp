#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sgw/embedding.hpp"
#include "sgw/gw_exact.hpp"
#include "sgw/gw_sliced.hpp"
#include "sgw/rng.hpp"

namespace {

using sgw::EmbeddingSet;
using sgw::Matching;
using sgw::Matrix;
using sgw::ProjectionBasis;
using sgw::SeededRng;

EmbeddingSet random_set(SeededRng& rng, std::size_t n, std::size_t d) {
  Matrix pts(n, d);
  for (std::size_t i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
  return EmbeddingSet(std::move(pts));
}

EmbeddingSet line_set(const std::vector<double>& coords) {
  Matrix pts(coords.size(), 1);
  for (std::size_t i = 0; i < coords.size(); ++i) pts(i, 0) = coords[i];
  return EmbeddingSet(std::move(pts));
}

std::vector<double> sorted_coords(const EmbeddingSet& s) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = s.points()(i, 0);
  std::sort(v.begin(), v.end());
  return v;
}

TEST(SampleBasis, OneDimensionalDirectionsAreSigns) {
  SeededRng rng(1);
  const auto basis = sgw::sample_basis(rng, 32, 1);
  for (std::size_t l = 0; l < basis.count(); ++l) {
    const double v = basis.direction(l)[0];
    EXPECT_TRUE(v == 1.0 || v == -1.0) << v;
  }
}

TEST(SampleBasis, EmpiricalMeanVanishesOnSphere) {
  SeededRng rng(2);
  const auto basis = sgw::sample_basis(rng, 10000, 3);
  double mean[3] = {0, 0, 0};
  for (std::size_t l = 0; l < basis.count(); ++l)
    for (int k = 0; k < 3; ++k) mean[k] += basis.direction(l)[k];
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(mean[k] / 10000.0, 0.0, 0.05);
}

TEST(SampleBasis, SameSeedReproducesBitIdenticalBasis) {
  SeededRng a(99), b(99);
  const auto ba = sgw::sample_basis(a, 16, 5);
  const auto bb = sgw::sample_basis(b, 16, 5);
  EXPECT_TRUE(ba.directions() == bb.directions());
  EXPECT_EQ(ba.seed(), bb.seed());
}

TEST(SampleBasis, RowsAreUnitNorm) {
  SeededRng rng(3);
  const auto basis = sgw::sample_basis(rng, 64, 7);
  for (std::size_t l = 0; l < basis.count(); ++l) {
    double s = 0.0;
    for (std::size_t k = 0; k < 7; ++k) s += basis.direction(l)[k] * basis.direction(l)[k];
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
}

TEST(Project, AxisProjection) {
  const EmbeddingSet set(Matrix{{0.0, 0.0}, {3.0, 4.0}});
  const std::vector<double> theta{1.0, 0.0};
  const auto p = sgw::project(set, theta);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_DOUBLE_EQ(p[0], 0.0);
  EXPECT_DOUBLE_EQ(p[1], 3.0);
}

TEST(Project, SinglePointAlongTiltedDirection) {
  const EmbeddingSet set(Matrix{{1.0, 1.0}});
  const auto p = sgw::project(set, std::vector<double>{0.6, 0.8});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0], 1.4, 1e-15);
}

TEST(Project, NegatedDirectionReversesProjections) {
  SeededRng rng(4);
  const auto set = random_set(rng, 11, 3);
  std::vector<double> theta{0.0, 0.6, 0.8};
  std::vector<double> neg{0.0, -0.6, -0.8};
  const auto p = sgw::project(set, theta);
  const auto q = sgw::project(set, neg);
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(q[i], -p[n - 1 - i], 1e-12);
  // Projected distances are unchanged (gaps mirror).
  for (std::size_t i = 1; i < n; ++i)
    EXPECT_NEAR(q[i] - q[i - 1], p[n - i] - p[n - i - 1], 1e-12);
}

TEST(Project, DimensionMismatchThrows) {
  const EmbeddingSet set(Matrix{{1.0, 2.0}});
  EXPECT_THROW(sgw::project(set, std::vector<double>{1.0}), sgw::DimensionMismatch);
}

TEST(Gw1d, IdenticalSupportsGiveZeroAscending) {
  const std::vector<double> xs{0.0, 0.5, 2.0};
  const auto r = sgw::gw_1d(xs, xs);
  EXPECT_DOUBLE_EQ(r.value, 0.0);
  EXPECT_EQ(r.matching, Matching::Ascending);
}

TEST(Gw1d, TwoPointHandExpansion) {
  const auto r = sgw::gw_1d({0.0, 1.0}, {0.0, 2.0});
  EXPECT_NEAR(r.value, 0.5, 1e-15);
}

TEST(Gw1d, ErrorsOnBadInput) {
  EXPECT_THROW(sgw::gw_1d({0.0, 1.0}, {0.0}), sgw::SizeMismatch);
  EXPECT_THROW(sgw::gw_1d({1.0, 0.0}, {0.0, 1.0}), sgw::UnsortedInput);
}

// Pinned instance where a non-monotone assignment beats both monotone
// matchings; the exact refinement below kGw1dExactCap must find it.
TEST(Gw1d, NonMonotoneOptimumIsFoundBelowTheCap) {
  const std::vector<double> xs{-1.1435379407041113, -0.63037229960504282, 0.48636124300291339,
                               0.9926636979916672, 1.0130252686877295};
  const std::vector<double> ys{-1.6810047289380328, 0.73781819475369359, 0.76646015053957106,
                               0.83886673512135257, 1.9322884651237604};
  const double monotone =
      std::min(sgw::detail::matching_cost_naive(xs, ys, Matching::Ascending),
               sgw::detail::matching_cost_naive(xs, ys, Matching::Descending));
  const double value = sgw::gw_1d(xs, ys).value;
  EXPECT_LT(value, monotone - 1e-3);  // strictly better than both candidates
  EXPECT_NEAR(value, sgw::sgw_fast_slice(xs, ys), 1e-12);
  // And it agrees with the full permutation brute force.
  sgw::Matrix px(5, 1), py(5, 1);
  for (int i = 0; i < 5; ++i) {
    px(i, 0) = xs[i];
    py(i, 0) = ys[i];
  }
  EXPECT_NEAR(value, sgw::gw_bruteforce(EmbeddingSet(px), EmbeddingSet(py)).value, 1e-12);
}

// The module's key correctness gate: gw_1d equals the permutation brute
// force on 1D embeddings.
TEST(Gw1d, MatchesPermutationBruteForce) {
  SeededRng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto x = random_set(rng, n, 1);
    const auto y = random_set(rng, n, 1);
    const double closed = sgw::gw_1d(sorted_coords(x), sorted_coords(y)).value;
    const double brute = sgw::gw_bruteforce(x, y).value;
    EXPECT_NEAR(closed, brute, 1e-10);
  }
}

TEST(FastSlice, AgreesWithNaiveOnRandomInstances) {
  SeededRng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(511);
    std::vector<double> xs(n), ys(n);
    const double ox = rng.uniform(-10.0, 10.0), oy = rng.uniform(-10.0, 10.0);
    for (auto& v : xs) v = rng.normal() + ox;
    for (auto& v : ys) v = rng.normal() + oy;
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    EXPECT_NEAR(sgw::sgw_fast_slice(xs, ys), sgw::gw_1d(xs, ys).value, 1e-8);
  }
}

TEST(FastSlice, TrivialCases) {
  const std::vector<double> xs{0.0, 1.0};
  EXPECT_DOUBLE_EQ(sgw::sgw_fast_slice(xs, xs), 0.0);
  EXPECT_NEAR(sgw::sgw_fast_slice({0.0, 1.0}, {0.0, 2.0}), 0.5, 1e-15);
}

TEST(Sgw, SelfComparisonIsZero) {
  SeededRng rng(7);
  const auto x = random_set(rng, 20, 4);
  SeededRng brng(8);
  const auto basis = sgw::sample_basis(brng, 16, 4);
  EXPECT_NEAR(sgw::sgw(x, x, basis).value, 0.0, 1e-12);
}

TEST(Sgw, OneDimensionalDataReducesToGw1d) {
  SeededRng rng(9);
  const auto x = random_set(rng, 9, 1);
  const auto y = random_set(rng, 9, 1);
  SeededRng brng(10);
  const auto basis = sgw::sample_basis(brng, 7, 1);
  const double direct = sgw::gw_1d(sorted_coords(x), sorted_coords(y)).value;
  EXPECT_NEAR(sgw::sgw(x, y, basis).value, direct, 1e-12);
}

TEST(Sgw, TranslationInvariance) {
  SeededRng rng(11);
  const auto x = random_set(rng, 15, 3);
  const auto y = random_set(rng, 15, 3);
  SeededRng brng(12);
  const auto basis = sgw::sample_basis(brng, 8, 3);
  const double base = sgw::sgw(x, y, basis).value;

  Matrix xs = x.points(), ys = y.points();
  const double shift_x[3] = {2.5, -1.0, 0.75};
  const double shift_y[3] = {-4.0, 0.5, 3.0};
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      xs(i, c) += shift_x[c];
      ys(i, c) += shift_y[c];
    }
  EXPECT_NEAR(sgw::sgw(EmbeddingSet(xs), EmbeddingSet(ys), basis).value, base, 1e-12);
}

TEST(Sgw, SymmetryInArguments) {
  SeededRng rng(13);
  const auto x = random_set(rng, 12, 5);
  const auto y = random_set(rng, 12, 5);
  SeededRng brng(14);
  const auto basis = sgw::sample_basis(brng, 10, 5);
  EXPECT_NEAR(sgw::sgw(x, y, basis).value, sgw::sgw(y, x, basis).value, 1e-12);
}

TEST(Sgw, ValueIsMeanOfSlicesAndSlicesNonnegative) {
  SeededRng rng(15);
  const auto x = random_set(rng, 10, 3);
  const auto y = random_set(rng, 10, 3);
  SeededRng brng(16);
  const auto basis = sgw::sample_basis(brng, 12, 3);
  const auto res = sgw::sgw(x, y, basis);
  double mean = 0.0;
  for (double v : res.per_slice_values) {
    EXPECT_GE(v, 0.0);
    mean += v;
  }
  mean /= static_cast<double>(res.per_slice_values.size());
  EXPECT_NEAR(res.value, mean, 1e-12);
}

TEST(Sgw, DeterministicGivenSeed) {
  SeededRng rng(17);
  const auto x = random_set(rng, 14, 4);
  const auto y = random_set(rng, 14, 4);
  SeededRng b1(21), b2(21);
  const auto r1 = sgw::sgw(x, y, sgw::sample_basis(b1, 16, 4));
  const auto r2 = sgw::sgw(x, y, sgw::sample_basis(b2, 16, 4));
  EXPECT_EQ(r1.value, r2.value);  // bit identical
  EXPECT_EQ(r1.per_slice_values, r2.per_slice_values);
}

TEST(Sgw, MonteCarloSpreadShrinksWithMoreProjections) {
  SeededRng rng(18);
  const auto x = random_set(rng, 32, 6);
  const auto y = random_set(rng, 32, 6);
  const auto sd_at = [&](std::size_t L, std::uint64_t salt) {
    std::vector<double> vals;
    for (int rep = 0; rep < 30; ++rep) {
      SeededRng brng(salt + rep);
      vals.push_back(sgw::sgw(x, y, sgw::sample_basis(brng, L, 6)).value);
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double s = 0.0;
    for (double v : vals) s += (v - mean) * (v - mean);
    return std::sqrt(s / (vals.size() - 1));
  };
  EXPECT_LE(sd_at(32, 1000), 0.75 * sd_at(8, 2000));
}

TEST(Sgw, SizeAndDimensionErrors) {
  SeededRng rng(19);
  const auto x = random_set(rng, 5, 2);
  const auto y = random_set(rng, 6, 2);
  SeededRng brng(20);
  const auto basis = sgw::sample_basis(brng, 4, 2);
  EXPECT_THROW(sgw::sgw(x, y, basis), sgw::SizeMismatch);
  const auto z = random_set(rng, 5, 3);
  EXPECT_THROW(sgw::sgw(x, z, basis), sgw::DimensionMismatch);
}

}  // namespace
