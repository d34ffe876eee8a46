#include "reflect/config.hpp"

#include "json.hpp"
#include "reflect/textutil.hpp"

namespace reflect {

using json = nlohmann::ordered_json;

RunConfig RunConfig::load(const std::string& path) {
  json j = json::parse(read_file(path));
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.trigger.text = j.value("trigger.text", c.trigger.text);
  c.trigger.separator = j.value("trigger.separator", c.trigger.separator);
  c.trigger.repetitions = j.value("trigger.repetitions", c.trigger.repetitions);

  c.perturbation.seed = static_cast<std::uint64_t>(c.seed);
  if (j.contains("var_init_factors"))
    c.perturbation.var_init_factors =
        j["var_init_factors"].get<std::vector<std::int64_t>>();
  c.perturbation.delta_min = j.value("arith_operand_delta.min", c.perturbation.delta_min);
  c.perturbation.delta_max = j.value("arith_operand_delta.max", c.perturbation.delta_max);
  if (j.contains("extraneous_templates")) {
    c.perturbation.extraneous_templates.clear();
    for (const auto& t : j["extraneous_templates"]) {
      ExtraneousTemplate tmpl;
      tmpl.pattern = t.at("text").get<std::string>();
      tmpl.op = t.at("op").get<std::string>().at(0);
      tmpl.operand = t.at("operand").get<std::int64_t>();
      c.perturbation.extraneous_templates.push_back(std::move(tmpl));
    }
  }

  c.scoring.bbh_answer_pattern = j.value("bbh_answer_pattern", c.scoring.bbh_answer_pattern);
  c.endpoint_url = j.value("endpoint.url", c.endpoint_url);
  c.endpoint_path = j.value("endpoint.path", c.endpoint_path);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.retry.max_retries = j.value("retry.max", c.retry.max_retries);
  c.retry.base_ms = j.value("retry.base_ms", c.retry.base_ms);
  c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("stop_sequences"))
    c.stop_sequences = j["stop_sequences"].get<std::vector<std::string>>();
  c.word_cap = j.value("word_cap", c.word_cap);
  c.templates_dir = j.value("templates_dir", c.templates_dir);
  c.executor_command = j.value("executor.command", c.executor_command);
  c.executor_timeout_ms = j.value("executor.timeout_ms", c.executor_timeout_ms);
  c.classifier_mode = j.value("classifier.mode", c.classifier_mode);
  if (j.contains("classifier.cues"))
    c.cues_path = j["classifier.cues"].get<std::string>();
  c.repeats = j.value("repeats", c.repeats);
  c.rounds = j.value("rounds", c.rounds);
  c.include_fewshot = j.value("include_fewshot", c.include_fewshot);
  return c;
}

std::string RunConfig::dump() const {
  json j;
  j["seed"] = seed;
  j["trigger.text"] = trigger.text;
  j["trigger.separator"] = trigger.separator;
  j["trigger.repetitions"] = trigger.repetitions;
  j["var_init_factors"] = perturbation.var_init_factors;
  j["arith_operand_delta.min"] = perturbation.delta_min;
  j["arith_operand_delta.max"] = perturbation.delta_max;
  json templates = json::array();
  for (const auto& t : perturbation.extraneous_templates) {
    json entry;
    entry["text"] = t.pattern;
    entry["op"] = std::string(1, t.op);
    entry["operand"] = t.operand;
    templates.push_back(entry);
  }
  j["extraneous_templates"] = templates;
  j["bbh_answer_pattern"] = scoring.bbh_answer_pattern;
  j["endpoint.url"] = endpoint_url;
  j["endpoint.path"] = endpoint_path;
  j["max_in_flight"] = max_in_flight;
  j["retry.max"] = retry.max_retries;
  j["retry.base_ms"] = retry.base_ms;
  j["max_new_tokens"] = max_new_tokens;
  j["temperature"] = temperature;
  j["stop_sequences"] = stop_sequences;
  j["word_cap"] = word_cap;
  j["templates_dir"] = templates_dir;
  j["executor.command"] = executor_command;
  j["executor.timeout_ms"] = executor_timeout_ms;
  j["classifier.mode"] = classifier_mode;
  if (cues_path)
    j["classifier.cues"] = *cues_path;
  else
    j["classifier.cues"] = nullptr;
  j["repeats"] = repeats;
  j["rounds"] = rounds;
  j["include_fewshot"] = include_fewshot;
  return j.dump(2) + "\n";
}

std::string RunConfig::digest() const { return hex64(fnv1a64(dump())); }

}  // namespace reflect
