// Copyright 2026 The liouvlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "liouvlearn/learner.hpp"
#include "liouvlearn/rank_analysis.hpp"

using namespace liouvlearn;

TEST(RowSpan, AgreesWithSvdRank) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> rows(kNumConfigurations);
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(std::size_t(10 + trial));
    RowSpan span;
    for (int c : rows) span.add(c);
    std::sort(rows.begin(), rows.end());
    EXPECT_EQ(span.rank(), matrix_rank(slice_rows(m_max(), rows))) << rows.size();
  }
}

TEST(RowSpan, SettingsRankMatchesPairSystem) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = draw_settings(3, 60, seed);
    ObservedSeries s;
    for (std::size_t r = 0; r < t.n_settings; ++r)
      for (int c : compatible_configurations(t, r, 0, 2)) s.configurations.push_back(m_max().row_labels[c]);
    std::sort(s.configurations.begin(), s.configurations.end(),
              [](const auto& a, const auto& b) { return a.index() < b.index(); });
    s.configurations.erase(std::unique(s.configurations.begin(), s.configurations.end()), s.configurations.end());
    s.series = Eigen::MatrixXd::Zero(Eigen::Index(s.size()), 1);
    EXPECT_EQ(pair_full_rank(t, 0, 2), assemble_pair_system(m_max(), s).full_rank);
  }
}

TEST(SinglePairRank, Thresholds) {
  const auto scan = single_pair_rank_probability({1, 20, 200}, 1000, 5);
  EXPECT_EQ(scan.probabilities[0], 0.0);
  EXPECT_EQ(scan.probabilities[1], 0.0);
  EXPECT_GE(scan.probabilities[2], 0.99);
  ASSERT_TRUE(scan.min_full_rank_settings.has_value());
  EXPECT_GT(*scan.min_full_rank_settings, 20u);
  EXPECT_EQ(scan.n_samples, (std::vector<std::size_t>{1000, 1000, 1000}));
}

TEST(SinglePairRank, DeterministicAndThreadIndependent) {
  const std::vector<std::size_t> grid{40, 60, 80};
  const auto a = single_pair_rank_probability(grid, 200, 3, 1);
  const auto b = single_pair_rank_probability(grid, 200, 3, 3);
  EXPECT_EQ(a.probabilities, b.probabilities);
  EXPECT_NE(a.probabilities, single_pair_rank_probability(grid, 200, 4).probabilities);
  EXPECT_THROW(single_pair_rank_probability(grid, 0, 1), ValidationError);
}

TEST(SinglePairRank, SingleSampleStillValid) {
  const auto scan = single_pair_rank_probability({30, 200}, 1, 2);
  for (double p : scan.probabilities) EXPECT_TRUE(p == 0.0 || p == 1.0);
  std::ostringstream os;
  write_scan_csv(os, scan);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, 19), "R,N,p_hat,n_samples");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(FitGumbel, ExactCurve) {
  RankScanResult s;
  for (std::size_t r = 20; r <= 220; r += 10) {
    s.r_values.push_back(r);
    s.probabilities.push_back(gumbel(double(r), 57.76, 15.0));
  }
  const auto fit = fit_gumbel(s);
  EXPECT_NEAR(fit.r0, 57.76, 1e-6);
  EXPECT_NEAR(fit.mu, 15.0, 1e-6);
  EXPECT_LT(fit.residual, 1e-8);
}

TEST(FitGumbel, SyntheticBinomialData) {
  std::mt19937_64 rng(7);
  std::vector<double> r0s, mus;
  for (int draw = 0; draw < 30; ++draw) {
    RankScanResult s;
    for (std::size_t r = 20; r <= 220; r += 10) {
      std::binomial_distribution<int> b(1000, gumbel(double(r), 60.0, 15.0));
      s.r_values.push_back(r);
      s.probabilities.push_back(b(rng) / 1000.0);
    }
    const auto fit = fit_gumbel(s);
    r0s.push_back(fit.r0);
    mus.push_back(fit.mu);
  }
  auto check = [](const std::vector<double>& v, double truth) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double sq = 0;
    for (double x : v) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / double(v.size() - 1));
    for (double x : v) EXPECT_LT(std::abs(x - truth), 4 * sd);
    EXPECT_LT(std::abs(mean - truth), 3 * sd / std::sqrt(double(v.size())));
  };
  check(r0s, 60.0);
  check(mus, 15.0);
}

TEST(FitGumbel, DegenerateData) {
  RankScanResult s{{100, 150, 200}, {1.0, 1.0, 1.0}, {10, 10, 10}, {}, {}};
  EXPECT_THROW(fit_gumbel(s), DegenerateData);
  s.probabilities = {0.0, 0.5, 1.0};
  EXPECT_THROW(fit_gumbel(s), DegenerateData);
}

TEST(MultiPairRank, TwoQubitColumnMatchesSinglePair) {
  const std::vector<std::size_t> grid{50, 70, 90};
  const auto multi = multi_pair_rank_probability(grid, {2, 3}, 1000, 11);
  const auto single = single_pair_rank_probability(grid, 1000, 12);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double p = single.probabilities[k];
    const double sigma = std::sqrt(2 * std::max(p * (1 - p), 1e-3) / 1000.0);
    EXPECT_NEAR(multi.probabilities(Eigen::Index(k), 0), p, 5 * sigma);
    EXPECT_LE(multi.probabilities(Eigen::Index(k), 1), multi.probabilities(Eigen::Index(k), 0) + 5 * sigma);
  }
  EXPECT_THROW(multi_pair_rank_probability(grid, {1}, 10, 1), ValidationError);
}

TEST(Contour, InterpolatesAndFitsLogN) {
  EXPECT_NEAR(*contour_crossing({10, 20, 30}, {0.1, 0.3, 0.7}), 25.0, 1e-12);
  EXPECT_FALSE(contour_crossing({10, 20}, {0.1, 0.3}).has_value());
  std::vector<std::size_t> r_grid, n_grid{2, 3, 4, 6, 8};
  for (std::size_t r = 10; r <= 300; ++r) r_grid.push_back(r);
  Eigen::MatrixXd p(Eigen::Index(r_grid.size()), Eigen::Index(n_grid.size()));
  const double a = 40.0, b = 38.0, mu = 15.0;
  for (std::size_t k = 0; k < r_grid.size(); ++k)
    for (std::size_t h = 0; h < n_grid.size(); ++h) {
      const double center = a + b * std::log(double(n_grid[h]));
      // p = 0.5 exactly at R = center.
      p(Eigen::Index(k), Eigen::Index(h)) =
          std::exp(-std::log(2.0) * std::exp(-(double(r_grid[k]) - center) / mu));
    }
  const auto fit = fit_contour(r_grid, n_grid, p);
  ASSERT_TRUE(fit.has_value());
  EXPECT_NEAR(fit->r0_tilde, a, 0.05);
  EXPECT_NEAR(fit->mu_tilde, b, 0.05);
  EXPECT_EQ(fit->crossings.size(), n_grid.size());
}

TEST(RecommendR, Examples) {
  const GumbelFit fit{57.76, 15.0, 0.0, 0};
  EXPECT_EQ(recommend_r(2, std::exp(-1.0), fit), 58u);
  EXPECT_EQ(recommend_r(10, 0.5, fit), 121u);
  EXPECT_GT(recommend_r(10, 0.99, fit), recommend_r(10, 0.5, fit));
  for (std::size_t n = 2; n < 12; ++n) EXPECT_LE(recommend_r(n, 0.5, fit), recommend_r(n + 1, 0.5, fit));
  for (double d = 0.05; d < 0.95; d += 0.05) EXPECT_LE(recommend_r(6, d, fit), recommend_r(6, d + 0.05, fit));
  EXPECT_THROW(recommend_r(10, 0.0, fit), ValidationError);
  EXPECT_THROW(recommend_r(10, 1.0, fit), ValidationError);
  EXPECT_THROW(recommend_r(1, 0.5, fit), ValidationError);
}
