#include "reflect/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace reflect {

double pretrain_compute(std::int64_t n_params, std::int64_t t_tokens) {
  if (n_params <= 0 || t_tokens <= 0)
    throw AnalyticsError("pretrain compute needs positive sizes");
  // the product overflows int64 at realistic scales; one rounding at the end
  unsigned __int128 flops = static_cast<unsigned __int128>(6) *
                            static_cast<unsigned __int128>(n_params) *
                            static_cast<unsigned __int128>(t_tokens);
  return static_cast<double>(flops);
}

double testtime_compute(std::int64_t n_params, std::int64_t words) {
  if (n_params <= 0) throw AnalyticsError("testtime compute needs positive n");
  if (words < 0) throw AnalyticsError("testtime compute needs nonnegative words");
  unsigned __int128 flops = static_cast<unsigned __int128>(2) *
                            static_cast<unsigned __int128>(n_params) *
                            static_cast<unsigned __int128>(words);
  return static_cast<double>(flops);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw AnalyticsError("pearson over unequal lengths");
  if (xs.size() < 2) throw AnalyticsError("pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw AnalyticsError("undefined correlation: constant series");
  return sxy / std::sqrt(sxx * syy);
}

ComputePoint make_compute_point(const CheckpointMeta& meta, const MetricsReport& report) {
  ComputePoint p;
  p.checkpoint = meta;
  p.pretrain_flops = pretrain_compute(meta.n_params, meta.t_tokens);
  p.metrics["accuracy"] = report.accuracy().to_double();
  p.metrics["explicit_rate"] = report.explicit_rate().to_double();
  p.metrics["explicit_accuracy"] = report.explicit_accuracy().to_double();
  p.metrics["implicit_accuracy"] = report.implicit_accuracy().to_double();
  return p;
}

double correlate_metric(const std::vector<ComputePoint>& points,
                        const std::string& metric) {
  if (points.size() < 2)
    throw AnalyticsError("correlation needs at least two checkpoints");
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    auto it = p.metrics.find(metric);
    if (it == p.metrics.end()) throw AnalyticsError("unknown metric: " + metric);
    xs.push_back(std::log(p.pretrain_flops));
    ys.push_back(it->second);
  }
  return pearson(xs, ys);
}

AblationTriple ablation_triple(const MetricsReport& wait_run,
                               const MetricsReport& admission_run,
                               const MetricsReport& no_trigger_run) {
  AblationTriple t;
  t.acc_wait = wait_run.accuracy().to_double();
  t.e_wait = wait_run.explicit_rate().to_double();
  t.acc_b = admission_run.accuracy().to_double();
  t.i_acc_a = no_trigger_run.implicit_accuracy().to_double();
  return t;
}

double decomposition_residual(const AblationTriple& triple) {
  return triple.acc_wait -
         (triple.e_wait * triple.acc_b + (1.0 - triple.e_wait) * triple.i_acc_a);
}

std::vector<TradeoffCurve> tradeoff_curves(const std::vector<EvalRecord>& records,
                                           const std::vector<CheckpointMeta>& checkpoints,
                                           const std::vector<long long>& targets) {
  if (targets.empty()) throw AnalyticsError("no targets given");

  std::map<std::string, const CheckpointMeta*> meta_by_name;
  for (const auto& m : checkpoints) meta_by_name[m.name] = &m;

  // per checkpoint, per instance: round -> (correct so far, cumulative words)
  struct Attempt {
    std::map<int, std::pair<bool, long long>> by_round;
  };
  std::map<std::string, std::map<std::string, Attempt>> attempts;
  int max_round = 0;
  for (const auto& r : records) {
    if (!meta_by_name.count(r.checkpoint))
      throw AnalyticsError("record names unknown checkpoint " + r.checkpoint);
    attempts[r.checkpoint][r.base_id].by_round[r.round] = {
        r.correct, static_cast<long long>(r.cumulative_words)};
    max_round = std::max(max_round, r.round);
  }

  // value at round k, holding at the attempt's final round once it stops
  auto at_round = [](const Attempt& a, int k) {
    auto it = a.by_round.upper_bound(k);
    if (it == a.by_round.begin()) return std::pair<bool, long long>{false, 0};
    return std::prev(it)->second;
  };

  std::vector<TradeoffCurve> curves;
  for (long long target : targets) {
    TradeoffCurve curve;
    curve.target = target;
    for (const auto& [ckpt, by_id] : attempts) {
      const CheckpointMeta& meta = *meta_by_name.at(ckpt);
      std::optional<long long> words_needed;
      if (target <= 0) {
        words_needed = 0;
      } else {
        for (int k = 0; k <= max_round && !words_needed; ++k) {
          long long solved = 0;
          long long words = 0;
          for (const auto& [id, attempt] : by_id) {
            bool ever_correct = false;
            for (int j = 0; j <= k; ++j)
              if (at_round(attempt, j).first) ever_correct = true;
            if (ever_correct) ++solved;
            words += at_round(attempt, k).second;
          }
          if (solved >= target) words_needed = words;
        }
      }
      if (!words_needed) continue;  // this checkpoint never reaches the target
      TradeoffCurve::Point p;
      p.checkpoint = ckpt;
      p.pretrain_flops = pretrain_compute(meta.n_params, meta.t_tokens);
      p.testtime_flops = testtime_compute(meta.n_params, *words_needed);
      curve.points.push_back(std::move(p));
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const auto& a, const auto& b) {
                return a.pretrain_flops < b.pretrain_flops;
              });
    curves.push_back(std::move(curve));
  }
  return curves;
}

PerplexityDiff perplexity_diff(const ModelClient& client, const std::string& question,
                               const std::string& adversarial_cot,
                               const std::string& correct_answer,
                               const std::string& incorrect_answer) {
  auto ppl = [&](const std::string& answer) {
    SequenceLogprob lp =
        client.sequence_logprob(question, adversarial_cot + answer);
    if (lp.token_count == 0)
      throw AnalyticsError("no continuation tokens attributed for perplexity");
    return std::exp(-lp.total / static_cast<double>(lp.token_count));
  };
  PerplexityDiff out;
  out.ppl_correct = ppl(correct_answer);
  out.ppl_incorrect = ppl(incorrect_answer);
  out.diff = out.ppl_correct - out.ppl_incorrect;
  return out;
}

}  // namespace reflect
