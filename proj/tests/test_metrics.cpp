#include <doctest.h>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/metrics.hpp"
#include "metric_oracles.hpp"

using namespace bp;
namespace oracle = bptest::oracle;

namespace {

std::vector<int> stream(std::initializer_list<std::pair<int, std::size_t>> runs) {
  std::vector<int> s;
  for (auto [label, len] : runs) s.insert(s.end(), len, label);
  return s;
}

}  // namespace

TEST_CASE("segments") {
  std::vector<int> s = {0, 0, 1};
  CHECK(segments(s) == std::vector<Segment>{{0, 0, 1}, {1, 2, 2}});
  std::vector<int> c(9, 4);
  CHECK(segments(c).size() == 1);
  CHECK_THROWS_AS(segments(std::vector<int>{}), ContractError);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto r = oracle::random_stream(rng, 100, 5);
    std::vector<int> back;
    auto segs = segments(r);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (i) CHECK(segs[i].label != segs[i - 1].label);
      back.insert(back.end(), segs[i].length(), segs[i].label);
    }
    CHECK(back == r);
  }
}

TEST_CASE("frame accuracy") {
  std::vector<int> gt = {0, 1, 2, 3};
  CHECK(frame_accuracy(gt, gt) == 100.0);
  CHECK(frame_accuracy(std::vector<int>{0, 1, 0, 0}, gt) == 50.0);
  CHECK(frame_accuracy(std::vector<int>{9, 1, 2, 0}, gt, {0}) == doctest::Approx(200.0 / 3.0));
  CHECK_THROWS_AS(frame_accuracy(std::vector<int>{0}, gt), DimensionError);
  CHECK_THROWS_AS(frame_accuracy(gt, gt, {0, 1, 2, 3}), UndefinedMetricError);
}

TEST_CASE("edit score examples") {
  auto gt = stream({{0, 5}, {1, 5}, {0, 5}});
  std::vector<int> pred(15, 0);
  // pred classes [A] vs gt [A,B,A]: two insertions over three segments.
  CHECK(edit_score(pred, gt) == doctest::Approx(100.0 / 3.0));
  auto two = stream({{0, 7}, {3, 1}, {0, 7}});
  auto want = stream({{0, 5}, {1, 5}, {0, 5}});
  // [A,X,A] vs [A,B,A] is one substitution.
  CHECK(edit_score(two, want) == doctest::Approx(200.0 / 3.0));
  // [A,A] as segment classes cannot occur in one stream; an ignored class between the As gives it.
  auto aa = stream({{0, 5}, {9, 5}, {0, 5}});
  CHECK(edit_score(aa, want, {9}) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
  CHECK(edit_score(want, want) == 100.0);
  CHECK(edit_score(stream({{0, 3}, {1, 3}}), stream({{2, 3}, {3, 3}})) == 0.0);
  CHECK(edit_score(stream({{9, 3}}), stream({{9, 3}}), {9}) == 100.0);
  CHECK_THROWS_AS(edit_score(std::vector<int>{}, std::vector<int>{}), ContractError);
}

TEST_CASE("F1 worked example") {
  auto gt = stream({{0, 10}, {1, 10}});
  auto pred = stream({{0, 5}, {1, 15}});
  CHECK(f1_at(pred, gt, 0.5) == 100.0);
  CHECK(f1_at(pred, gt, 0.6) == 50.0);
  auto c = f1_counts(pred, gt, 0.6);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  for (double tau : kF1Thresholds) CHECK(f1_at(gt, gt, tau) == 100.0);
  CHECK(f1_at(gt, gt, 1.0) == 100.0);
  CHECK_THROWS_AS(f1_at(gt, gt, 0.0), ParameterError);
  CHECK_THROWS_AS(f1_at(gt, gt, 1.5), ParameterError);
}

TEST_CASE("F1 matching is one to one") {
  auto gt = stream({{0, 20}});
  auto pred = stream({{0, 10}, {5, 1}, {0, 9}});
  auto c = f1_counts(pred, gt, 0.1);
  CHECK(c.tp == 1);
  CHECK(c.fp == 2);
  CHECK(c.fn == 0);
  CHECK(f1_score(F1Counts{}) == 100.0);
}

TEST_CASE("per-class F1") {
  auto gt = stream({{0, 10}, {1, 10}});
  auto pred = stream({{0, 10}, {2, 10}});
  CHECK(per_class_f1(pred, gt, 0.1, 7) == 100.0);
  CHECK(per_class_f1(pred, gt, 0.1, 1) == 0.0);
  CHECK(per_class_f1(pred, gt, 0.1, 2) == 0.0);
  CHECK(per_class_f1(pred, gt, 0.1, 0) == 100.0);

  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = oracle::random_stream(rng, 120, 4);
    auto p = oracle::perturbed(g, rng, 4);
    const int cls = static_cast<int>(rng.uniform_int(0, 4));
    auto filt = [cls](std::vector<int> s) {
      for (auto& v : s)
        if (v != cls) v = -1;
      return s;
    };
    CHECK(per_class_f1(p, g, 0.1, cls) == f1_at(filt(p), filt(g), 0.1, {-1}));
  }
}

TEST_CASE("1000 random pairs agree with the oracles exactly") {
  Rng rng(2024);
  std::size_t nontrivial = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = static_cast<int>(rng.uniform_int(2, 8));
    auto gt = oracle::random_stream(rng, 200, classes);
    auto pred = trial % 2 ? oracle::perturbed(gt, rng, classes) : oracle::random_stream(rng, gt.size(), classes);
    pred.resize(gt.size(), pred.empty() ? 0 : pred.back());
    std::set<int> ignore;
    if (trial % 3 == 0) ignore.insert(0);
    bool all_ignored = true;
    for (int v : gt) all_ignored &= ignore.count(v) > 0;
    CAPTURE(trial);
    if (!all_ignored) CHECK(frame_accuracy(pred, gt, ignore) == oracle::accuracy(pred, gt, ignore));
    const double e = edit_score(pred, gt, ignore);
    CHECK(e == oracle::edit(pred, gt, ignore));
    CHECK(e == edit_score(gt, pred, ignore));
    double prev = 101.0;
    for (double tau : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      const double f = f1_at(pred, gt, tau, ignore);
      CHECK(f == oracle::f1(pred, gt, tau, ignore));
      CHECK(f >= 0.0);
      CHECK(f <= 100.0);
      CHECK(f <= prev);
      prev = f;
    }
    if (e > 0.0 && e < 100.0) ++nontrivial;
  }
  CHECK(nontrivial > 300);
}

TEST_CASE("F1 is not symmetric") {
  // The second A of `a` prefers the first A of `b`, which is already taken.
  auto a = stream({{0, 4}, {1, 1}, {0, 9}});
  auto b = stream({{0, 10}, {2, 1}, {0, 3}});
  CHECK(f1_at(a, b, 0.1) == doctest::Approx(100.0 / 3.0));
  CHECK(f1_at(b, a, 0.1) == doctest::Approx(200.0 / 3.0));
}

TEST_CASE("score accumulator pools folds") {
  ScoreAccumulator acc({9}, {1, 2, 5});
  auto g1 = stream({{9, 2}, {1, 10}, {2, 10}, {9, 2}});
  auto p1 = stream({{1, 12}, {2, 12}});
  auto g2 = stream({{2, 10}, {1, 4}});
  auto p2 = stream({{2, 14}});
  acc.add(p1, g1);
  acc.add(p2, g2);
  auto r = acc.report();
  CHECK(acc.videos() == 2);
  CHECK(r.accuracy == doctest::Approx(100.0 * 30.0 / 34.0));
  CHECK(r.edit == doctest::Approx((edit_score(p1, g1, {9}) + edit_score(p2, g2, {9})) / 2.0));
  F1Counts sum = f1_counts(p1, g1, 0.1, {9});
  sum += f1_counts(p2, g2, 0.1, {9});
  CHECK(r.f1_10 == f1_score(sum));
  CHECK(r.per_class_f1_10.at(5) == 100.0);
  CHECK(r.per_class_f1_10.at(1) == doctest::Approx(100.0 * 2.0 / 3.0));
  CHECK_THROWS_AS(ScoreAccumulator().report(), UndefinedMetricError);

  ScoreReport a, b;
  a.accuracy = 80;
  b.accuracy = 90;
  a.per_class_f1_10[1] = 50;
  std::vector<ScoreReport> both = {a, b};
  auto m = mean_report(both);
  CHECK(m.accuracy == 85.0);
  CHECK(m.per_class_f1_10.at(1) == 50.0);
}

TEST_CASE("report formatting") {
  ScoreReport r;
  r.accuracy = 85.125;
  r.edit = 100.0;
  r.f1_10 = 66.666666;
  r.f1_25 = 0.0;
  r.f1_50 = 5.0;
  r.per_class_f1_10 = {{1, 100.0}, {3, 12.345}};
  CHECK(std::string(kReportHeader) == "split,task,acc,edit,f1_10,f1_25,f1_50");
  CHECK(format_report_row("U1", "suturing", r) == "U1,suturing,85.12,100.00,66.67,0.00,5.00\n");
  CHECK(format_per_class_csv(r, {{1, "G1"}}) == "class,f1_10\nG1,100.00\n3,12.35\n");
}
