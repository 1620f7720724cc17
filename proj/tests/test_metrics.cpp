#include <doctest.h>

#include <cmath>
#include <vector>

#include "iqlab/error.hpp"
#include "iqlab/metrics.hpp"
#include "iqlab/rng.hpp"
#include "oracles.hpp"

using namespace iqlab;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, bool inject_ties) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-50.0, 150.0);
  if (inject_ties && n >= 4) {
    for (std::size_t i = 0; i + 1 < n; i += 3) v[i + 1] = v[i];
  }
  return v;
}

}  // namespace

TEST_CASE("srcc basics") {
  CHECK(srcc(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) ==
        doctest::Approx(1.0));
  CHECK(srcc(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
        doctest::Approx(-1.0));
  // No-tie case, pinned against the 1 - 6*sum(d^2)/(n(n^2-1)) closed form.
  CHECK(srcc(std::vector<double>{1, 2, 3, 4},
             std::vector<double>{2, 1, 4, 3}) == doctest::Approx(0.6));
  // Tied case, pinned against rank-then-Pearson.
  CHECK(srcc(std::vector<double>{1, 2, 2, 3},
             std::vector<double>{1, 2, 3, 3}) ==
        doctest::Approx(0.8333333333333334));
}

TEST_CASE("plcc basics") {
  std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y;
  for (const double v : x) y.push_back(2.0 * v + 1.0);
  CHECK(plcc(x, y) == doctest::Approx(1.0));
  std::vector<double> neg;
  for (const double v : x) neg.push_back(-v);
  CHECK(plcc(x, neg) == doctest::Approx(-1.0));
  CHECK(plcc(std::vector<double>{1, 2, 3, 4},
             std::vector<double>{1, 3, 2, 4}) == doctest::Approx(0.8));
}

TEST_CASE("degenerate correlation input is an error, not zero") {
  const std::vector<double> constant{5, 5, 5};
  const std::vector<double> varying{1, 2, 3};
  CHECK_THROWS_AS(srcc(constant, varying), UndefinedCorrelationError);
  CHECK_THROWS_AS(plcc(varying, constant), UndefinedCorrelationError);
  CHECK_THROWS_AS(srcc(std::vector<double>{1}, std::vector<double>{1}),
                  ValidationError);
  CHECK_THROWS_AS(plcc(std::vector<double>{1, 2}, std::vector<double>{1}),
                  ValidationError);
}

TEST_CASE("oracle equivalence on random vectors") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(60);
    const bool ties = trial % 2 == 0;
    const auto x = random_vector(rng, n, ties);
    const auto y = random_vector(rng, n, false);
    CHECK(std::abs(srcc(x, y) - oracles::brute_force_srcc(x, y)) <= 1e-9);
    CHECK(std::abs(plcc(x, y) - oracles::brute_force_pearson(x, y)) <= 1e-9);
  }
}

TEST_CASE("srcc is exactly invariant under monotone warps") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(rng, 40, trial % 2 == 0);
    const auto y = random_vector(rng, 40, false);
    auto warped = y;
    for (auto& v : warped) v = std::exp(v / 100.0) + 3.0 * v;  // increasing
    CHECK(srcc(x, y) == srcc(x, warped));
  }
}

TEST_CASE("plcc affine invariance is exact for power-of-two scalings") {
  // Integer data with power-of-two scale and integer shift keeps every
  // intermediate exactly representable, so the identity holds bit-for-bit.
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 32;  // power of two: means stay exact
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.uniform_int(2000)) - 1000.0;
    for (auto& v : y) v = static_cast<double>(rng.uniform_int(2000)) - 1000.0;
    const double a = trial % 2 == 0 ? 4.0 : 0.5;
    const double b = static_cast<double>(rng.uniform_int(100));
    std::vector<double> tx(n);
    for (std::size_t i = 0; i < n; ++i) tx[i] = a * x[i] + b;
    CHECK(plcc(tx, y) == plcc(x, y));
    std::vector<double> nx(n);
    for (std::size_t i = 0; i < n; ++i) nx[i] = -a * x[i] + b;
    CHECK(plcc(nx, y) == -plcc(x, y));
  }
}

TEST_CASE("correlations are symmetric") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(rng, 25, true);
    const auto y = random_vector(rng, 25, false);
    CHECK(srcc(x, y) == srcc(y, x));
    CHECK(plcc(x, y) == plcc(y, x));
  }
}

TEST_CASE("pairwise accuracy") {
  using W = PairWinner;
  const std::vector<W> truth{W::kFirst, W::kSecond, W::kFirst, W::kFirst};
  CHECK(pairwise_accuracy(truth, truth) == 1.0);
  std::vector<W> flipped;
  for (const W w : truth) flipped.push_back(flip(w));
  CHECK(pairwise_accuracy(flipped, truth) == 0.0);
  std::vector<W> mostly = truth;
  mostly[1] = flip(mostly[1]);
  CHECK(pairwise_accuracy(mostly, truth) == 0.75);
  CHECK_THROWS_AS(pairwise_accuracy(mostly, std::vector<W>{W::kFirst}),
                  ValidationError);
}

TEST_CASE("binary accuracy") {
  const std::vector<double> probs{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> labels{1, 1, 0, 0};
  CHECK(binary_accuracy(probs, labels) == 1.0);
  const std::vector<int> inverted{0, 0, 1, 1};
  CHECK(binary_accuracy(probs, inverted) == 0.0);
  CHECK(binary_accuracy(probs, labels, 0.85) == 0.75);
  CHECK_THROWS_AS(binary_accuracy(probs, std::vector<int>{1}),
                  ValidationError);
  CHECK_THROWS_AS(binary_accuracy(probs, labels, 1.5), ValidationError);
}

TEST_CASE("side-by-side score") {
  CHECK(side_by_side({45, 33, 22}) == doctest::Approx(78.0 / 55.0));
  for (const long long n : {1LL, 5LL, 100LL}) {
    CHECK(side_by_side({0, n, 0}) == 1.0);
  }
  CHECK_THROWS_AS(side_by_side({1, 0, 0}), UndefinedCorrelationError);
  CHECK_THROWS_AS(side_by_side({-1, 2, 3}), ValidationError);
}

TEST_CASE("report formatting pins the paper cells") {
  MetricsReport report;
  report.datasets = {"k10k", "spaq"};
  DatasetMetrics a;
  a.srcc = 0.856;
  a.plcc = 0.867;
  DatasetMetrics b;
  b.srcc = 0.813;
  b.plcc = 0.807;
  b.authenticity_accuracy = 0.703;
  std::map<std::string, DatasetMetrics> cells{{"k10k", a}, {"spaq", b}};
  report.rows.emplace_back("model", cells);

  const std::string md = format_report(report, ReportStyle::kMarkdownTable);
  CHECK(md.find("0.856/0.867") != std::string::npos);
  CHECK(md.find("0.813/0.807") != std::string::npos);
  CHECK(md.find("auth_acc=0.703") != std::string::npos);

  DatasetMetrics ones;
  ones.srcc = 1.0;
  ones.plcc = 0.5;
  MetricsReport r2;
  r2.datasets = {"d"};
  r2.rows.emplace_back("m",
                       std::map<std::string, DatasetMetrics>{{"d", ones}});
  CHECK(format_report(r2, ReportStyle::kMarkdownTable).find("1.000/0.500") !=
        std::string::npos);

  report.side_by_side.emplace_back("vs_other", PreferenceCounts{45, 33, 22});
  const std::string txt = format_report(report, ReportStyle::kStructured);
  CHECK(txt.find("row=model dataset=k10k srcc=0.856 plcc=0.867") !=
        std::string::npos);
  CHECK(txt.find("gs_sb=1.42") != std::string::npos);
}

TEST_CASE("structured report is deterministic") {
  MetricsReport report;
  report.datasets = {"a", "b"};
  DatasetMetrics m;
  m.srcc = 0.25;
  m.plcc = -0.5;
  report.rows.emplace_back(
      "x", std::map<std::string, DatasetMetrics>{{"a", m}, {"b", m}});
  CHECK(format_report(report, ReportStyle::kStructured) ==
        format_report(report, ReportStyle::kStructured));
}
