#include <doctest.h>

#include <cmath>
#include <vector>

#include "hbd/metrics.hpp"
#include "hbd/rng.hpp"
#include "test_util.hpp"

using namespace hbd;
using hbd::testing::error_code_of;

namespace {

std::vector<Label> random_labels(Xoshiro256& rng, std::size_t n, double p) {
  std::vector<Label> v(n);
  for (auto& l : v) l = rng.uniform() < p ? Label::Beat : Label::NoBeat;
  return v;
}

ConfusionCounts counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  ConfusionCounts c;
  c.tp = tp;
  c.tn = tn;
  c.fp = fp;
  c.fn = fn;
  return c;
}

double pearson(const std::vector<Label>& a, const std::vector<Label>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += static_cast<double>(a[i]);
    mb += static_cast<double>(b[i]);
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = static_cast<double>(a[i]) - ma, db = static_cast<double>(b[i]) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return saa == 0 || sbb == 0 ? 0.0 : sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("confusion examples and brute force") {
  const std::vector<Label> y{Label::Beat, Label::NoBeat, Label::Beat, Label::NoBeat};
  const auto same = confusion(y, y);
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  std::vector<Label> flipped;
  for (auto l : y) flipped.push_back(l == Label::Beat ? Label::NoBeat : Label::Beat);
  const auto comp = confusion(flipped, y);
  CHECK(comp.tp == 0);
  CHECK(comp.tn == 0);

  Xoshiro256 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_labels(rng, 100, 0.4), t = random_labels(rng, 100, 0.2);
    ConfusionCounts brute;
    for (std::size_t i = 0; i < 100; ++i) {
      const bool pb = p[i] == Label::Beat, tb = t[i] == Label::Beat;
      brute.tp += pb && tb;
      brute.tn += !pb && !tb;
      brute.fp += pb && !tb;
      brute.fn += !pb && tb;
    }
    CHECK(confusion(p, t) == brute);
  }
  CHECK(error_code_of([&] { confusion(std::span(y).first(2), y); }) == ErrorCode::LengthMismatch);
  CHECK(error_code_of([] { confusion(std::vector<Label>{}, std::vector<Label>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("mcc examples") {
  CHECK(mcc(counts(5, 5, 0, 0)) == doctest::Approx(1.0));
  CHECK(mcc(counts(6, 86, 4, 4)) == doctest::Approx(500.0 / 900.0).epsilon(1e-12));
  CHECK(mcc(counts(6, 86, 4, 4)) == doctest::Approx(0.5556).epsilon(1e-4));
  CHECK(mcc(counts(10, 0, 90, 0)) == 0.0);
  CHECK(mcc(counts(0, 90, 0, 10)) == 0.0);
  CHECK(mcc(counts(0, 0, 5, 5)) == doctest::Approx(-1.0));
}

TEST_CASE("property: mcc equals the Pearson correlation of the label vectors") {
  Xoshiro256 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + static_cast<std::size_t>(rng.below(200));
    const auto p = random_labels(rng, n, rng.uniform()), t = random_labels(rng, n, rng.uniform());
    CHECK(std::abs(mcc(confusion(p, t)) - pearson(p, t)) < 1e-9);
  }
}

TEST_CASE("precision, sensitivity, F1") {
  auto r = precision_sensitivity_f1(counts(3, 9, 0, 0));
  CHECK(r.precision == 1.0);
  CHECK(r.sensitivity == 1.0);
  CHECK(r.f1 == 1.0);
  r = precision_sensitivity_f1(counts(6, 86, 4, 4));
  CHECK(r.precision == doctest::Approx(0.6));
  CHECK(r.sensitivity == doctest::Approx(0.6));
  CHECK(r.f1 == doctest::Approx(0.6));
  r = precision_sensitivity_f1(counts(0, 9, 3, 2));
  CHECK(r.precision == 0.0);
  CHECK(r.sensitivity == 0.0);
  CHECK(r.f1 == 0.0);
  CHECK(to_string(Metric::Precision) == "+p");
}

TEST_CASE("quantile_sorted interpolates linearly") {
  const std::vector<double> v{0, 10, 20, 30, 40};
  CHECK(quantile_sorted(v, 0.0) == 0);
  CHECK(quantile_sorted(v, 1.0) == 40);
  CHECK(quantile_sorted(v, 0.05) == doctest::Approx(2.0));
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(20.0));
}

TEST_CASE("bootstrap: perfect predictions, determinism, ordering") {
  Xoshiro256 rng(3);
  const auto t = random_labels(rng, 400, 0.1);
  const auto perfect = bootstrap_ci(t, t, Metric::Mcc, {100, 0.25, 7, 0.9});
  CHECK(perfect.mean == 1.0);
  CHECK(perfect.ci_low == 1.0);
  CHECK(perfect.ci_high == 1.0);

  for (int trial = 0; trial < 30; ++trial) {
    auto p = t;
    for (auto& l : p) {
      if (rng.uniform() < 0.1) l = l == Label::Beat ? Label::NoBeat : Label::Beat;
    }
    const BootstrapOptions opt{100, 0.25, rng(), 0.9};
    for (auto m : kAllMetrics) {
      const auto a = bootstrap_ci(p, t, m, opt), b = bootstrap_ci(p, t, m, opt);
      CHECK(a.mean == b.mean);
      CHECK(a.ci_low == b.ci_low);
      CHECK(a.ci_high == b.ci_high);
      CHECK(a.ci_low <= a.mean);
      CHECK(a.mean <= a.ci_high);
    }
    const auto all = bootstrap_all(p, t, opt);
    CHECK(all[0].mean == bootstrap_ci(p, t, Metric::Mcc, opt).mean);
  }
}

TEST_CASE("bootstrap: a 90% interval of MCC covers the population value most of the time") {
  // Population: 4000 segments with a fixed error pattern. Each trial draws an
  // evaluation set of 800 from it and bootstraps that set.
  Xoshiro256 rng(4);
  const std::size_t population = 4000;
  const auto truth = random_labels(rng, population, 0.15);
  auto pred = truth;
  for (auto& l : pred) {
    if (rng.uniform() < 0.08) l = l == Label::Beat ? Label::NoBeat : Label::Beat;
  }
  const double target = mcc(confusion(pred, truth));
  int covered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Label> p, t;
    for (int i = 0; i < 800; ++i) {
      const auto k = static_cast<std::size_t>(rng.below(population));
      p.push_back(pred[k]);
      t.push_back(truth[k]);
    }
    // fraction 1.0 gives the textbook percentile interval for this sample size
    const auto ci = bootstrap_ci(p, t, Metric::Mcc, {200, 1.0, rng(), 0.9});
    covered += ci.ci_low <= target && target <= ci.ci_high;
  }
  CHECK(covered >= 80);
}

TEST_CASE("evaluation reports: csv and json round trip") {
  Xoshiro256 rng(5);
  const auto t = random_labels(rng, 300, 0.1);
  auto p = t;
  p[0] = p[0] == Label::Beat ? Label::NoBeat : Label::Beat;
  const auto r = evaluate_predictions("Arrhythmia", Partition::Test, p, t, {100, 0.25, 1, 0.9});
  CHECK(r.n_segments == 300);
  CHECK(r[Metric::Mcc].point == doctest::Approx(mcc(confusion(p, t))));
  const auto csv = report_csv(r);
  CHECK(csv.rfind("subset,partition,n_segments,metric,point,mean,ci_low,ci_high\n", 0) == 0);
  CHECK(csv.find("Arrhythmia,Test,300,MCC,") != std::string::npos);
  const auto back = report_from_json(report_json(r));
  CHECK(back.subset == r.subset);
  CHECK(back.partition == r.partition);
  for (auto m : kAllMetrics) {
    CHECK(back[m].point == r[m].point);
    CHECK(back[m].ci_low == r[m].ci_low);
  }
  CHECK(report_json(back) == report_json(r));
}

TEST_CASE("property: mcc symmetry and scale invariance") {
  Xoshiro256 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = counts(rng.below(50), rng.below(50), rng.below(50), rng.below(50));
    CHECK(mcc(counts(c.tn, c.tp, c.fn, c.fp)) == doctest::Approx(mcc(c)).epsilon(1e-12));
    const auto k = 1 + rng.below(20);
    CHECK(mcc(counts(k * c.tp, k * c.tn, k * c.fp, k * c.fn)) == doctest::Approx(mcc(c)).epsilon(1e-12));
    CHECK(mcc(c) >= -1.0);
    CHECK(mcc(c) <= 1.0);
  }
}

TEST_CASE("bootstrap: full-sample MCC of a fixed predictor lies inside the CI for most seeds") {
  Xoshiro256 rng(7);
  const auto truth = random_labels(rng, 2000, 0.07);
  auto pred = truth;
  for (auto& l : pred) {
    if (rng.uniform() < 0.03) l = l == Label::Beat ? Label::NoBeat : Label::Beat;
  }
  const double full = mcc(confusion(pred, truth));
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ci = bootstrap_ci(pred, truth, Metric::Mcc, {100, 0.25, seed, 0.9});
    inside += ci.ci_low <= full && full <= ci.ci_high;
  }
  CHECK(inside >= 85);
}
