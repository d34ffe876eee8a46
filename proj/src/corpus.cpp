#include "reflect/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "reflect/textutil.hpp"

namespace reflect {

using json = nlohmann::ordered_json;

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::gsm8k:
      return "gsm8k";
    case TaskKind::gsm8k_platinum:
      return "gsm8k_platinum";
    case TaskKind::cruxeval_i:
      return "cruxeval_i";
    case TaskKind::cruxeval_o:
      return "cruxeval_o";
    case TaskKind::triviaqa:
      return "triviaqa";
    case TaskKind::bbh:
      return "bbh";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "gsm8k") return TaskKind::gsm8k;
  if (name == "gsm8k_platinum") return TaskKind::gsm8k_platinum;
  if (name == "cruxeval_i") return TaskKind::cruxeval_i;
  if (name == "cruxeval_o") return TaskKind::cruxeval_o;
  if (name == "triviaqa") return TaskKind::triviaqa;
  if (name == "bbh") return TaskKind::bbh;
  throw CorpusError("unknown task kind: " + name);
}

bool is_gsm(TaskKind kind) {
  return kind == TaskKind::gsm8k || kind == TaskKind::gsm8k_platinum;
}

bool is_crux(TaskKind kind) {
  return kind == TaskKind::cruxeval_i || kind == TaskKind::cruxeval_o;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::programmatic:
      return "programmatic";
    case Provenance::llm_generated:
      return "llm_generated";
    case Provenance::self_generated:
      return "self_generated";
  }
  return "?";
}

Provenance provenance_from_string(const std::string& name) {
  if (name == "programmatic") return Provenance::programmatic;
  if (name == "llm_generated") return Provenance::llm_generated;
  if (name == "self_generated") return Provenance::self_generated;
  throw CorpusError("unknown provenance: " + name);
}

const char* to_string(Setting s) {
  return s == Setting::situational ? "situational" : "self_reflection";
}

namespace {

TaskInstance task_from_json(const json& j) {
  TaskInstance t;
  t.id = j.at("id").get<std::string>();
  t.kind = task_kind_from_string(j.at("kind").get<std::string>());
  t.question = j.at("question").get<std::string>();
  t.gold_answer = j.at("gold_answer").get<std::string>();
  if (j.contains("correct_cot") && !j["correct_cot"].is_null())
    t.correct_cot = j["correct_cot"].get<std::string>();
  if (j.contains("context_docs") && !j["context_docs"].is_null()) {
    for (const auto& d : j["context_docs"]) {
      t.context_docs.push_back(
          {d.at("doc_id").get<std::string>(), d.at("text").get<std::string>()});
    }
  }
  if (j.contains("subtask") && !j["subtask"].is_null())
    t.subtask = j["subtask"].get<std::string>();
  if (j.contains("fewshot_prefix") && !j["fewshot_prefix"].is_null())
    t.fewshot_prefix = j["fewshot_prefix"].get<std::string>();
  return t;
}

json adversarial_to_json(const AdversarialInstance& a) {
  json j;
  j["base_id"] = a.base_id;
  j["kind"] = to_string(a.kind);
  if (a.attack)
    j["attack"] = *a.attack;
  else
    j["attack"] = nullptr;
  j["question"] = a.question;
  j["adversarial_cot"] = a.adversarial_cot;
  j["adversarial_answer"] = a.adversarial_answer;
  j["trigger"] = a.trigger;
  j["gold_answer"] = a.gold_answer;
  j["prompt"] = a.prompt;
  j["provenance"] = to_string(a.provenance);
  return j;
}

AdversarialInstance adversarial_from_json(const json& j) {
  AdversarialInstance a;
  a.base_id = j.at("base_id").get<std::string>();
  a.kind = task_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("attack") && !j["attack"].is_null())
    a.attack = j["attack"].get<std::string>();
  a.question = j.at("question").get<std::string>();
  a.adversarial_cot = j.at("adversarial_cot").get<std::string>();
  a.adversarial_answer = j.at("adversarial_answer").get<std::string>();
  a.trigger = j.at("trigger").get<std::string>();
  a.gold_answer = j.at("gold_answer").get<std::string>();
  a.prompt = j.at("prompt").get<std::string>();
  a.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  return a;
}

}  // namespace

std::vector<TaskInstance> load_dataset(const std::string& path, TaskKind kind) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open dataset: " + path);
  std::vector<TaskInstance> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    TaskInstance t;
    try {
      t = task_from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) +
                        ": malformed record: " + e.what());
    }
    if (t.kind != kind)
      throw CorpusError(path + ":" + std::to_string(lineno) + ": expected kind " +
                        std::string(to_string(kind)) + ", got " + to_string(t.kind));
    if (!seen.insert(t.id).second)
      throw CorpusError(path + ":" + std::to_string(lineno) + ": duplicate id " + t.id);
    auto violations = validate_instance(t);
    if (!violations.empty())
      throw CorpusError(path + ":" + std::to_string(lineno) + ": " + violations.front());
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<AdversarialInstance> load_adversarial(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open dataset: " + path);
  std::vector<AdversarialInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(adversarial_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) +
                        ": malformed record: " + e.what());
    }
  }
  return out;
}

std::string manifest_path_for(const std::string& data_path) {
  return data_path + ".manifest.json";
}

DatasetManifest write_dataset(const std::vector<AdversarialInstance>& instances,
                              const std::string& path, const std::string& name,
                              std::int64_t seed, const std::string& config_digest,
                              const std::optional<std::string>& checkpoint_family) {
  DatasetManifest m;
  m.name = name;
  m.seed = seed;
  m.config_digest = config_digest;
  m.checkpoint_family = checkpoint_family;
  m.instance_count = instances.size();
  if (!instances.empty()) {
    m.kind = instances.front().kind;
    m.setting = instances.front().provenance == Provenance::self_generated
                    ? Setting::self_reflection
                    : Setting::situational;
    for (const auto& a : instances) {
      if (a.kind != m.kind)
        throw CorpusError("mixed kinds in dataset: " + std::string(to_string(m.kind)) +
                          " vs " + to_string(a.kind));
      Setting s = a.provenance == Provenance::self_generated ? Setting::self_reflection
                                                             : Setting::situational;
      if (s != m.setting) throw CorpusError("mixed settings in dataset");
    }
  }

  std::ostringstream body;
  for (const auto& a : instances) {
    auto violations = validate_instance(a);
    if (!violations.empty()) throw CorpusError(violations.front());
    body << adversarial_to_json(a).dump() << "\n";
  }
  write_file(path, body.str());

  json mj;
  mj["name"] = m.name;
  mj["kind"] = to_string(m.kind);
  mj["setting"] = to_string(m.setting);
  mj["seed"] = m.seed;
  mj["instance_count"] = m.instance_count;
  mj["config_digest"] = m.config_digest;
  if (m.checkpoint_family)
    mj["checkpoint_family"] = *m.checkpoint_family;
  else
    mj["checkpoint_family"] = nullptr;
  write_file(manifest_path_for(path), mj.dump(2) + "\n");
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  json j = json::parse(read_file(path));
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  m.kind = task_kind_from_string(j.at("kind").get<std::string>());
  m.setting = j.at("setting").get<std::string>() == "self_reflection"
                  ? Setting::self_reflection
                  : Setting::situational;
  m.seed = j.at("seed").get<std::int64_t>();
  m.instance_count = j.at("instance_count").get<std::size_t>();
  m.config_digest = j.at("config_digest").get<std::string>();
  if (j.contains("checkpoint_family") && !j["checkpoint_family"].is_null())
    m.checkpoint_family = j["checkpoint_family"].get<std::string>();
  return m;
}

std::vector<std::string> validate_instance(const TaskInstance& t) {
  std::vector<std::string> v;
  if (t.id.empty()) v.push_back("instance id is empty");
  if (t.gold_answer.empty()) v.push_back("gold_answer is empty for id " + t.id);
  if (t.kind == TaskKind::triviaqa && t.context_docs.empty())
    v.push_back("triviaqa instance " + t.id + " has no context docs");
  return v;
}

std::vector<std::string> validate_instance(const AdversarialInstance& a) {
  std::vector<std::string> v;
  if (a.base_id.empty()) v.push_back("base_id is empty");
  if (a.gold_answer.empty()) v.push_back("gold_answer is empty for " + a.base_id);
  if (a.trigger.empty()) v.push_back("trigger is empty for " + a.base_id);
  if (a.prompt.size() < a.trigger.size() ||
      a.prompt.compare(a.prompt.size() - a.trigger.size(), a.trigger.size(),
                       a.trigger) != 0)
    v.push_back("prompt does not end with trigger for " + a.base_id);
  if (a.provenance == Provenance::programmatic && a.attack &&
      normalize_answer(a.adversarial_answer) == normalize_answer(a.gold_answer))
    v.push_back("adversarial answer equals gold answer for " + a.base_id);
  return v;
}

}  // namespace reflect
