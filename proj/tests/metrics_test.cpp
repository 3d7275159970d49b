#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "spanex/metrics.hpp"

using namespace spanex;

TEST_CASE("normalize_for_match lowercases and collapses whitespace") {
  CHECK(normalize_for_match("  10 July   1856 ") == "10 july 1856");
  CHECK(normalize_for_match("NEGATIVE") == "negative");
  CHECK(normalize_for_match("") == "");
}

TEST_CASE("exact_match compares normalized strings") {
  CHECK(exact_match("10 July 1856", "10  july 1856"));
  CHECK(exact_match(" negative", "negative "));
  CHECK(!exact_match("10 July 1857", "10 July 1856"));
}

TEST_CASE("matthews correlation frozen values") {
  // Binary confusion TP=3 FP=1 FN=2 TN=4.
  const std::vector<int> gold{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<int> pred{1, 1, 1, 0, 0, 1, 0, 0, 0, 0};
  CHECK(matthews_corr(pred, gold) == doctest::Approx(10.0 / std::sqrt(600.0)).epsilon(1e-12));

  const std::vector<int> gold3{0, 0, 1, 1, 2, 2};
  const std::vector<int> pred3{0, 1, 1, 2, 2, 0};
  CHECK(matthews_corr(pred3, gold3) == doctest::Approx(0.25).epsilon(1e-12));

  CHECK(matthews_corr(gold, gold) == doctest::Approx(1.0));
  CHECK(matthews_corr(std::vector<int>(6, 1), gold3) == 0.0);  // degenerate column
  CHECK(matthews_corr({}, {}) == 0.0);
  CHECK_THROWS_AS(matthews_corr({0, 1}, {0}), std::invalid_argument);
}

TEST_CASE("pearson correlation frozen values") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{2, 4, 5, 4};
  CHECK(pearson_corr(a, b) == doctest::Approx(3.5 / std::sqrt(23.75)).epsilon(1e-12));
  CHECK(pearson_corr(a, a) == doctest::Approx(1.0));
  CHECK(pearson_corr(a, {-1, -2, -3, -4}) == doctest::Approx(-1.0));
  CHECK(pearson_corr(a, {7, 7, 7, 7}) == 0.0);  // zero variance
  CHECK(pearson_corr({1.0}, {2.0}) == 0.0);     // undefined below two points
}

TEST_CASE("spearman correlation averages tied ranks") {
  const std::vector<double> v1{1, 2, 2, 3};
  const std::vector<double> v2{1, 2, 3, 4};
  CHECK(spearman_corr(v1, v2) == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));

  // Any strictly monotone map preserves ranks exactly.
  const std::vector<double> x{0.1, 0.7, 0.3, 2.0, 1.1};
  std::vector<double> mapped;
  for (double v : x) mapped.push_back(std::exp(3.0 * v) - 5.0);
  CHECK(spearman_corr(x, mapped) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_corr(x, mapped) < 0.999);  // while Pearson notices the bend
}

TEST_CASE("pearson_spearman_avg is 1 for a linear relation") {
  const std::vector<double> gold{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> pred;
  for (double v : gold) pred.push_back(2.0 * v + 0.1);
  CHECK(pearson_spearman_avg(pred, gold) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_spearman_avg(std::vector<double>(5, 0.3), gold) == 0.0);
}

TEST_CASE("correlations are invariant to permuting example order") {
  std::mt19937_64 rng(13);
  std::vector<double> a, b;
  std::vector<int> ga, gb;
  for (int i = 0; i < 40; ++i) {
    a.push_back(static_cast<double>(rng() % 100) / 10.0);
    b.push_back(static_cast<double>(rng() % 100) / 10.0);
    ga.push_back(static_cast<int>(rng() % 3));
    gb.push_back(static_cast<int>(rng() % 3));
  }
  const double pearson = pearson_corr(a, b);
  const double spearman = spearman_corr(a, b);
  const double mcc = matthews_corr(ga, gb);

  std::vector<std::size_t> order(a.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> pa, pb;
  std::vector<int> pga, pgb;
  for (std::size_t i : order) {
    pa.push_back(a[i]);
    pb.push_back(b[i]);
    pga.push_back(ga[i]);
    pgb.push_back(gb[i]);
  }
  CHECK(pearson_corr(pa, pb) == doctest::Approx(pearson).epsilon(1e-12));
  CHECK(spearman_corr(pa, pb) == doctest::Approx(spearman).epsilon(1e-12));
  CHECK(matthews_corr(pga, pgb) == doctest::Approx(mcc).epsilon(1e-12));
}
