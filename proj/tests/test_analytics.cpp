#include <cmath>

#include "doctest.h"
#include "reflect/analytics.hpp"
#include "reflect/textutil.hpp"

using namespace reflect;

namespace {

// independent two-pass oracle: raw-moment formula
double pearson_oracle(const std::vector<double>& xs, const std::vector<double>& ys) {
  double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (double x : xs) {
    sx += x;
    sxx += x * x;
  }
  for (double y : ys) {
    sy += y;
    syy += y * y;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += xs[i] * ys[i];
  return (n * sxy - sx * sy) /
         (std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy));
}

CheckpointMeta meta_of(const std::string& name, std::int64_t n, std::int64_t t) {
  CheckpointMeta m;
  m.name = name;
  m.n_params = n;
  m.t_tokens = t;
  m.family = "toy";
  return m;
}

MetricsReport report_of(long long ce, long long ci, long long ne, long long ni) {
  MetricsReport r;
  r.counts = {ce, ci, ne, ni};
  r.n = r.counts.total();
  return r;
}

EvalRecord round_record(const std::string& checkpoint, const std::string& id,
                        int round, bool correct, std::size_t cum_words) {
  EvalRecord r;
  r.base_id = id;
  r.checkpoint = checkpoint;
  r.response = "r";
  if (correct) r.extracted = "x";
  r.correct = correct;
  r.word_count = cum_words;
  r.round = round;
  r.cumulative_words = cum_words;
  return r;
}

}  // namespace

TEST_CASE("pretraining compute is exactly six n t") {
  CHECK(pretrain_compute(7000000000LL, 38000000000LL) == 1.596e21);
  CHECK(pretrain_compute(1, 1) == 6.0);
  CHECK(pretrain_compute(5, 2000) == 2.0 * pretrain_compute(5, 1000));
  CHECK_THROWS_AS(pretrain_compute(0, 5), AnalyticsError);
  CHECK_THROWS_AS(pretrain_compute(5, -1), AnalyticsError);
}

TEST_CASE("test-time compute is exactly two n w") {
  CHECK(testtime_compute(32000000000LL, 1000) == 6.4e13);
  CHECK(testtime_compute(5, 0) == 0.0);
  // additive over concatenated generations
  CHECK(testtime_compute(7, 100) + testtime_compute(7, 23) ==
        testtime_compute(7, 123));
  CHECK_THROWS_AS(testtime_compute(0, 5), AnalyticsError);
  CHECK_THROWS_AS(testtime_compute(5, -1), AnalyticsError);
}

TEST_CASE("pearson hits the textbook cases") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson({1, 2, 3}, {6, 4, 2}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(pearson({1, 2}, {1}), AnalyticsError);
  CHECK_THROWS_AS(pearson({1}, {1}), AnalyticsError);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), AnalyticsError);
}

TEST_CASE("pearson matches the independent two-pass oracle") {
  SplitMix64 rng(424242);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 3 + rng.below(48);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(static_cast<double>(rng.below(10000)) / 100.0 - 50.0);
      ys.push_back(static_cast<double>(rng.below(10000)) / 100.0 - 50.0);
    }
    ys[0] += 0.125;  // fend off accidental constant series
    xs[0] += 0.25;
    double got = pearson(xs, ys);
    double want = pearson_oracle(xs, ys);
    CHECK(std::fabs(got - want) <= 1e-12);
  }
}

TEST_CASE("pearson returns plus minus one on affine series") {
  SplitMix64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + rng.below(30);
    double a = (static_cast<double>(rng.below(200)) - 100.0) / 7.0;
    if (a == 0) a = 1.5;
    double b = static_cast<double>(rng.below(100)) - 50.0;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      double x = static_cast<double>(rng.below(1000)) / 10.0 + i * 0.5;
      xs.push_back(x);
      ys.push_back(a * x + b);
    }
    double r = pearson(xs, ys);
    CHECK(std::fabs(r - (a > 0 ? 1.0 : -1.0)) <= 1e-12);
  }
}

TEST_CASE("pearson is invariant under affine rescaling") {
  SplitMix64 rng(77);
  std::vector<double> xs, ys;
  for (int i = 0; i < 25; ++i) {
    xs.push_back(static_cast<double>(rng.below(1000)) / 7.0);
    ys.push_back(static_cast<double>(rng.below(1000)) / 3.0);
  }
  double base = pearson(xs, ys);
  std::vector<double> scaled;
  for (double x : xs) scaled.push_back(2.5 * x - 17.0);
  CHECK(std::fabs(pearson(scaled, ys) - base) <= 1e-12);
}

TEST_CASE("metric correlation runs over log compute") {
  std::vector<ComputePoint> points;
  for (int i = 1; i <= 6; ++i) {
    ComputePoint p;
    p.checkpoint = meta_of("ck" + std::to_string(i), 1000, 1000L * i * i);
    p.pretrain_flops = pretrain_compute(1000, 1000L * i * i);
    p.metrics["accuracy"] = std::log(p.pretrain_flops) * 0.01;
    p.metrics["flat"] = 0.5;
    points.push_back(std::move(p));
  }
  CHECK(correlate_metric(points, "accuracy") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(correlate_metric(points, "flat"), AnalyticsError);
  CHECK_THROWS_AS(correlate_metric(points, "missing"), AnalyticsError);
  points.resize(1);
  CHECK_THROWS_AS(correlate_metric(points, "accuracy"), AnalyticsError);
}

TEST_CASE("decomposition residual follows the stated identity") {
  AblationTriple constructed{0.5, 0.5, 0.8, 0.2};
  CHECK(decomposition_residual(constructed) == doctest::Approx(0.0).epsilon(1e-15));

  AblationTriple all_explicit{0.7, 1.0, 0.7, 0.4};
  CHECK(decomposition_residual(all_explicit) ==
        doctest::Approx(all_explicit.acc_wait - all_explicit.acc_b).epsilon(1e-15));

  AblationTriple from_reports = ablation_triple(
      report_of(4, 1, 6, 9), report_of(10, 6, 0, 4), report_of(0, 4, 0, 16));
  CHECK(from_reports.acc_wait == doctest::Approx(0.25));
  CHECK(from_reports.e_wait == doctest::Approx(0.5));
  CHECK(from_reports.acc_b == doctest::Approx(0.8));
  CHECK(from_reports.i_acc_a == doctest::Approx(0.2));
}

TEST_CASE("tradeoff curves follow a hand-enumerated schedule") {
  // scripted checkpoint solving the k-th instance after exactly k words:
  // instance ik becomes correct at round k-1, cumulative words = k each round
  std::vector<EvalRecord> records;
  auto ck = meta_of("sched", 1000, 1000);
  const int n = 3;
  for (int k = 1; k <= n; ++k) {
    std::string id = "i" + std::to_string(k);
    for (int round = 0; round < n; ++round) {
      std::size_t cum = static_cast<std::size_t>(std::min(round + 1, k));
      records.push_back(round_record("sched", id, round, round + 1 >= k, cum));
    }
  }
  auto curves = tradeoff_curves(records, {ck}, {1, 2, 3});
  REQUIRE(curves.size() == 3);
  // target 1: reached at round 0, each of 3 attempts spent 1 word so far
  CHECK(curves[0].points.at(0).testtime_flops == testtime_compute(1000, 3));
  // target 2: round 1, words = 2+2+2 capped per instance: i1 stays at 1
  CHECK(curves[1].points.at(0).testtime_flops == testtime_compute(1000, 1 + 2 + 2));
  // target 3: round 2, words = 1+2+3
  CHECK(curves[2].points.at(0).testtime_flops == testtime_compute(1000, 6));
}

TEST_CASE("tradeoff targets of zero and beyond the dataset behave") {
  auto ck = meta_of("only", 500, 500);
  std::vector<EvalRecord> records = {round_record("only", "a", 0, true, 10)};
  auto curves = tradeoff_curves(records, {ck}, {0, 5});
  REQUIRE(curves.size() == 2);
  REQUIRE(curves[0].points.size() == 1);
  CHECK(curves[0].points[0].testtime_flops == 0.0);
  CHECK(curves[1].points.empty());  // target exceeds the dataset
  CHECK_THROWS_AS(tradeoff_curves(records, {ck}, {}), AnalyticsError);
}

TEST_CASE("tradeoff curves stay monotone in the target") {
  SplitMix64 rng(9090);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EvalRecord> records;
    auto ck = meta_of("mono", 100, 100);
    int n = 4 + static_cast<int>(rng.below(5));
    int rounds = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      std::string id = "q" + std::to_string(i);
      std::size_t cum = 0;
      bool correct = false;
      for (int round = 0; round < rounds; ++round) {
        cum += 1 + rng.below(20);
        correct = correct || rng.below(3) == 0;
        records.push_back(round_record("mono", id, round, correct, cum));
      }
    }
    std::vector<long long> targets = {1, 2, 3, 4};
    auto curves = tradeoff_curves(records, {ck}, targets);
    double last = -1;
    for (const auto& curve : curves) {
      if (curve.points.empty()) continue;
      CHECK(curve.points[0].testtime_flops >= last);
      last = curve.points[0].testtime_flops;
    }
  }
}

TEST_CASE("perplexity probe matches the scripted logprob cases") {
  const double l = -std::log(2.0);
  auto model = std::make_shared<ScriptedModel>();
  // question "Q: sum?" + cot "cot " + answers "aaaa" / "bbbb"
  std::vector<TokenLogprob> zeros = {{"Q: sum?", -0.7}, {"cot ", 0.0}, {"aa", 0.0},
                                     {"aa", 0.0}};
  model->add_rule({"cot aaaa", "", "stop", zeros, 0});
  std::vector<TokenLogprob> halves = {{"Q: sum?", -0.7}, {"cot ", l}, {"bb", l},
                                      {"bb", l}};
  model->add_rule({"cot bbbb", "", "stop", halves, 0});
  ModelClient client(model);

  auto probe = perplexity_diff(client, "Q: sum?", "cot ", "aaaa", "bbbb");
  CHECK(probe.ppl_correct == 1.0);    // all-zero logprobs
  CHECK(probe.ppl_incorrect == 2.0);  // uniform -ln 2
  CHECK(probe.diff == -1.0);

  // flipped: incorrect is likelier, the difference turns positive
  auto flipped = perplexity_diff(client, "Q: sum?", "cot ", "bbbb", "aaaa");
  CHECK(flipped.diff == 1.0);
}

TEST_CASE("the perplexity fixture transcript matches hand computation") {
  auto model = std::make_shared<ScriptedModel>();
  std::vector<TokenLogprob> lps = {{"Q", -0.9}, {"X", -0.5}, {"Y", -1.5},
                                   {"Z", -1.0}};
  model->add_rule({"", "", "stop", lps, 0});
  ModelClient client(model);
  auto lp = client.sequence_logprob("Q", "XYZ");
  CHECK(lp.token_count == 3);
  CHECK(lp.total == doctest::Approx(-3.0).epsilon(1e-15));
  // hand sum: (-0.5 - 1.5 - 1.0) / 3 tokens, ppl = exp(1) = e
  auto probe = perplexity_diff(client, "Q", "X", "YZ", "YZ");
  CHECK(probe.ppl_correct == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(probe.diff == 0.0);
}
