#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflect/corpus.hpp"
#include "reflect/executor.hpp"
#include "reflect/model_client.hpp"

namespace reflect {

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact count arithmetic; metrics stay rational until display.
struct Rational {
  long long num = 0;
  long long den = 1;

  static Rational of(long long num, long long den);
  Rational operator+(const Rational& rhs) const;
  bool operator==(const Rational& rhs) const;
  bool operator<=(const Rational& rhs) const;
  double to_double() const;
  std::string str() const;
};

struct EvalRecord {
  std::string base_id;
  std::string checkpoint;
  std::string response;
  std::optional<std::string> extracted;  // absent => correct is false
  bool correct = false;
  bool explicit_reflection = false;  // classifier output, independent of correct
  std::size_t word_count = 0;
  int repeat = 0;
  int round = 0;                  // budget-forcing continuation round
  std::size_t cumulative_words = 0;  // across rounds of the same attempt
};

struct ReflectionCounts {
  long long correct_explicit = 0;
  long long correct_implicit = 0;
  long long incorrect_explicit = 0;
  long long incorrect_implicit = 0;
  long long total() const {
    return correct_explicit + correct_implicit + incorrect_explicit + incorrect_implicit;
  }
};

struct MetricsReport {
  long long n = 0;
  ReflectionCounts counts;

  Rational accuracy() const;
  Rational explicit_rate() const;
  Rational explicit_accuracy() const;
  Rational implicit_accuracy() const;
};

struct GoldLabelSet {
  std::vector<std::pair<std::string, bool>> labels;  // unique ids
  std::string provenance_note;
};

// Per-task extraction (total: never throws on arbitrary text):
//   gsm*       last number in the response, currency/commas stripped
//   bbh        first match of the configured answer pattern
//   cruxeval*  content between [ANSWER] and [/ANSWER] tags
//   triviaqa   the full response (containment-scored later)
std::optional<std::string> extract_answer(TaskKind kind, const std::string& response);

struct ScoringConfig {
  std::string bbh_answer_pattern = R"(answer is\s*:?\s*([^\n.]+))";
};

// Populates extraction, word count and correctness; the explicit flag is left
// for the classifier. The executor is consulted for cruxeval pass@1 only.
EvalRecord score_instance(const AdversarialInstance& instance,
                          const std::string& response, CodeExecutor* executor,
                          const ScoringConfig& config = {});

bool gsm_answers_equal(const std::string& a, const std::string& b);

enum class ClassifierMode { lexical, judge };

std::vector<std::string> default_reflection_cues();
std::vector<std::string> load_cues(const std::string& path);

// Lexical mode: case-insensitive cue matching (error admissions, prior-claim
// contradictions, re-examination language). Judge mode: renders the few-shot
// judge template and parses a yes/no verdict, reprompting once.
bool classify_explicit(const std::string& response, ClassifierMode mode,
                       const ModelClient* client = nullptr,
                       const std::vector<std::string>& cues = default_reflection_cues(),
                       const std::string& judge_template = "");

// Pools every record (repeats average by pooling). Records must be non-empty
// and share one checkpoint.
MetricsReport compute_metrics(const std::vector<EvalRecord>& records);

struct ClassifierScore {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<Rational> precision;  // absent = undefined (zero denominator)
  std::optional<Rational> recall;
  std::optional<Rational> f1;
};

ClassifierScore validate_classifier(
    const std::vector<std::pair<std::string, bool>>& predictions,
    const GoldLabelSet& gold);

// Records file I/O (line-delimited JSON).
std::vector<EvalRecord> load_records(const std::string& path);
void write_records(const std::vector<EvalRecord>& records, const std::string& path);

}  // namespace reflect
