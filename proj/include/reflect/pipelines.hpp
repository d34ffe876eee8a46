#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reflect/corpus.hpp"
#include "reflect/executor.hpp"
#include "reflect/model_client.hpp"
#include "reflect/perturb.hpp"
#include "reflect/trigger.hpp"

namespace reflect {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GsmPipelineResult {
  std::vector<AdversarialInstance> instances;
  GenerationStats stats;
};

// Programmatic corruption of the dataset-artifact CoTs; deterministic given
// (dataset, config, trigger).
GsmPipelineResult build_situational_gsm(const std::vector<TaskInstance>& dataset,
                                        const PerturbationConfig& config,
                                        const TriggerSpec& trigger);

struct ConfounderPair {
  std::string question_id;
  std::string confounder_doc_id;
  double similarity = 0.0;       // cosine, in [-1, 1]
  std::string confounder_answer;  // the confounder's parent gold answer
};

struct SkippedInstance {
  std::string id;
  std::string reason;
};

struct TriviaPipelineResult {
  std::vector<AdversarialInstance> instances;
  std::vector<ConfounderPair> pairs;       // one per retained instance
  std::vector<SkippedInstance> skipped;
};

using EmbeddingMap = std::map<std::string, std::vector<double>>;

EmbeddingMap load_embeddings(const std::string& path);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// For each question: the most similar other-question document that does not
// contain the gold answer becomes the confounding passage, presented with its
// parent question's answer. Prompts longer than word_cap words are dropped.
// Ties break to the lexicographically smallest doc id.
TriviaPipelineResult build_situational_trivia(const std::vector<TaskInstance>& dataset,
                                              const EmbeddingMap& embeddings,
                                              const TriggerSpec& trigger,
                                              std::size_t word_cap = 500);

// Versioned prompt templates, rendered by "{name}" substitution.
class TemplateSet {
 public:
  static TemplateSet load(const std::string& dir, const std::vector<std::string>& names);
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const;
  const std::string& raw(const std::string& name) const;
  std::string digest() const;  // folded into manifest config digests

 private:
  std::map<std::string, std::string> templates_;
};

inline const std::vector<std::string> kCruxTemplates = {
    "explain", "correct_cot", "adversarial_answer", "adversarial_cot", "judge_filter"};
inline const std::vector<std::string> kBbhTemplates = {"choose_incorrect",
                                                       "incorrect_cot"};

struct CruxPipelineResult {
  std::vector<AdversarialInstance> instances;
  std::vector<SkippedInstance> skipped;
};

// The five-step pipeline: explanation, verified correct CoT, adversarial
// answer accepted only when its assertion fails, adversarial CoT, judge
// filtering of CoTs that leak the correct answer or admit the error. Client
// calls run as bounded-parallel waves; output order follows the input.
CruxPipelineResult build_situational_crux(const std::vector<TaskInstance>& dataset,
                                          const ModelClient& client,
                                          CodeExecutor& executor,
                                          const TemplateSet& templates,
                                          const TriggerSpec& trigger,
                                          int max_in_flight = 4);

struct BbhPipelineResult {
  std::vector<AdversarialInstance> instances;
  std::vector<SkippedInstance> skipped;
};

// Instances the helper model gets wrong keep its CoT verbatim; instances it
// gets right go through the instructed incorrect-answer/incorrect-CoT prompts.
BbhPipelineResult build_situational_bbh(const std::vector<TaskInstance>& dataset,
                                        const ModelClient& client,
                                        const TemplateSet& templates,
                                        const TriggerSpec& trigger,
                                        bool include_fewshot_in_prompt = true,
                                        int max_in_flight = 4);

struct IncorrectAttempt {
  std::string cot;        // the model's own wrong reasoning, verbatim
  std::string extracted;  // its wrong answer when extraction succeeded
};

struct SelfReflectionSource {
  std::string checkpoint_family;
  // checkpoint id -> instance id -> that checkpoint's incorrect attempt
  std::map<std::string, std::map<std::string, IncorrectAttempt>> per_checkpoint_wrong;
};

std::set<std::string> wrong_id_intersection(const SelfReflectionSource& source);

struct SelfReflectionBuild {
  std::set<std::string> ids;  // intersection over checkpoints
  // each checkpoint receives its own incorrect CoT as adversarial context
  std::map<std::string, std::vector<AdversarialInstance>> per_checkpoint;
};

SelfReflectionBuild build_self_reflection(const SelfReflectionSource& source,
                                          const std::vector<TaskInstance>& base,
                                          const TriggerSpec& trigger);

}  // namespace reflect
