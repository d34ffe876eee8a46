#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reflect/model_client.hpp"
#include "reflect/perturb.hpp"
#include "reflect/scoring.hpp"
#include "reflect/trigger.hpp"

namespace reflect {

// Flat, typed key-value configuration shared by every subcommand. Flags
// mirror these keys and win on conflict; the effective config is dumped
// beside outputs and its digest is embedded in manifests and reports.
struct RunConfig {
  std::int64_t seed = 0;

  TriggerSpec trigger;
  PerturbationConfig perturbation;
  ScoringConfig scoring;

  std::string endpoint_url;
  std::string endpoint_path = "/v1/completions";
  int max_in_flight = 4;
  RetryPolicy retry;

  int max_new_tokens = 512;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences = {"Q:"};

  std::size_t word_cap = 500;          // triviaqa prompt budget
  std::string templates_dir = "templates";
  std::string executor_command = "python3 -";
  int executor_timeout_ms = 10000;
  std::string classifier_mode = "lexical";
  std::optional<std::string> cues_path;
  int repeats = 1;
  int rounds = 1;  // budget-forcing continuations per attempt
  bool include_fewshot = true;

  static RunConfig load(const std::string& path);
  std::string dump() const;    // canonical JSON rendering
  std::string digest() const;  // stable hash of the dump
};

}  // namespace reflect
