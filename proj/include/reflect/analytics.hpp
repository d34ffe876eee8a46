#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflect/model_client.hpp"
#include "reflect/scoring.hpp"

namespace reflect {

class AnalyticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 6nt: forward and backward passes over n parameters for t training tokens.
double pretrain_compute(std::int64_t n_params, std::int64_t t_tokens);

// 2nw: a forward pass over n parameters for each of w generated words.
double testtime_compute(std::int64_t n_params, std::int64_t words);

// Product-moment correlation; throws on length mismatch, fewer than two
// points, or a constant series ("undefined correlation").
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct ComputePoint {
  CheckpointMeta checkpoint;
  double pretrain_flops = 0.0;  // 6 * n * t
  std::map<std::string, double> metrics;
};

ComputePoint make_compute_point(const CheckpointMeta& meta, const MetricsReport& report);

// pearson over (ln pretrain_flops, metric value)
double correlate_metric(const std::vector<ComputePoint>& points,
                        const std::string& metric);

struct AblationTriple {
  double acc_wait = 0.0;   // accuracy under the "Wait," trigger
  double e_wait = 0.0;     // explicit reflection rate under "Wait,"
  double acc_b = 0.0;      // accuracy under the admission trigger
  double i_acc_a = 0.0;    // implicit accuracy with no trigger
};

AblationTriple ablation_triple(const MetricsReport& wait_run,
                               const MetricsReport& admission_run,
                               const MetricsReport& no_trigger_run);

// acc_wait - (e_wait * acc_b + (1 - e_wait) * i_acc_a)
double decomposition_residual(const AblationTriple& triple);

struct TradeoffCurve {
  long long target = 0;  // questions answered correctly
  struct Point {
    std::string checkpoint;
    double pretrain_flops = 0.0;
    double testtime_flops = 0.0;  // 2 * n * cumulative words at the target
  };
  std::vector<Point> points;  // sorted by pretrain_flops
};

// Budget-forcing records: per (checkpoint, instance, round) with cumulative
// words. For each target, the earliest round at which that many instances are
// correct fixes the words spent; checkpoints that never reach a target are
// omitted from its curve.
std::vector<TradeoffCurve> tradeoff_curves(const std::vector<EvalRecord>& records,
                                           const std::vector<CheckpointMeta>& checkpoints,
                                           const std::vector<long long>& targets);

struct PerplexityDiff {
  double ppl_correct = 0.0;
  double ppl_incorrect = 0.0;
  double diff = 0.0;  // positive: the incorrect continuation is likelier
};

// Perplexity of (adversarial CoT + answer) conditioned on the question,
// normalized by continuation token count.
PerplexityDiff perplexity_diff(const ModelClient& client, const std::string& question,
                               const std::string& adversarial_cot,
                               const std::string& correct_answer,
                               const std::string& incorrect_answer);

}  // namespace reflect
