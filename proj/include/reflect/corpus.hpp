#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reflect {

enum class TaskKind { gsm8k, gsm8k_platinum, cruxeval_i, cruxeval_o, triviaqa, bbh };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);
bool is_gsm(TaskKind kind);
bool is_crux(TaskKind kind);

enum class Provenance { programmatic, llm_generated, self_generated };
const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& name);

enum class Setting { situational, self_reflection };
const char* to_string(Setting s);

struct ContextDoc {
  std::string doc_id;
  std::string text;
};

struct TaskInstance {
  std::string id;
  TaskKind kind = TaskKind::gsm8k;
  std::string question;
  std::string gold_answer;
  std::optional<std::string> correct_cot;
  std::vector<ContextDoc> context_docs;
  std::optional<std::string> subtask;
  std::optional<std::string> fewshot_prefix;
};

struct AdversarialInstance {
  std::string base_id;
  TaskKind kind = TaskKind::gsm8k;
  std::optional<std::string> attack;  // programmatic pipelines only
  std::string question;
  std::string adversarial_cot;
  std::string adversarial_answer;  // the wrong conclusion the CoT reaches
  std::string trigger;
  std::string gold_answer;
  std::string prompt;  // fully rendered, ends with trigger
  Provenance provenance = Provenance::programmatic;
};

struct DatasetManifest {
  std::string name;
  TaskKind kind = TaskKind::gsm8k;
  Setting setting = Setting::situational;
  std::int64_t seed = 0;
  std::size_t instance_count = 0;
  std::string config_digest;
  std::optional<std::string> checkpoint_family;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line-delimited UTF-8 records, one instance per line, order preserving.
// Malformed lines and duplicate ids raise CorpusError naming the line.
std::vector<TaskInstance> load_dataset(const std::string& path, TaskKind kind);

std::vector<AdversarialInstance> load_adversarial(const std::string& path);

// Byte-deterministic: stable field order, stable number formatting. All
// instances must share one kind and one setting (derived from provenance).
// The manifest is written beside the data file as "<path>.manifest.json".
DatasetManifest write_dataset(const std::vector<AdversarialInstance>& instances,
                              const std::string& path, const std::string& name,
                              std::int64_t seed, const std::string& config_digest,
                              const std::optional<std::string>& checkpoint_family = {});

DatasetManifest load_manifest(const std::string& path);

// Empty when every TaskInstance invariant holds; one description per breach.
std::vector<std::string> validate_instance(const TaskInstance& instance);
std::vector<std::string> validate_instance(const AdversarialInstance& instance);

std::string manifest_path_for(const std::string& data_path);

}  // namespace reflect
