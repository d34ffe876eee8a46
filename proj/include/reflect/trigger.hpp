#pragma once

#include <string>

#include "reflect/corpus.hpp"

namespace reflect {

// Continuation cue appended after the adversarial context. repetitions > 1 is
// budget forcing: the evaluator re-appends the trigger after each model stop.
struct TriggerSpec {
  std::string text = "Wait,";
  std::string separator = "\n\n";
  int repetitions = 1;
};

std::string append_trigger(const std::string& context, const TriggerSpec& spec);

// Prompt shells per task family. The adversarial CoT (or a model's own wrong
// attempt, in the self-reflection setting) slots in as `cot`.
std::string render_gsm_prompt(const std::string& question, const std::string& cot);
std::string render_trivia_prompt(const std::string& question,
                                 const std::string& passage,
                                 const std::string& stated_answer);
std::string render_trivia_self_prompt(const std::string& question,
                                      const std::string& wrong_answer);
std::string render_crux_prompt(TaskKind kind, const std::string& code,
                               const std::string& display_assertion,
                               const std::string& cot);
std::string render_bbh_prompt(const std::string& question, const std::string& cot,
                              const std::string& fewshot_prefix);

// Derives the "??" display form of a crux assertion from the gold assertion,
// e.g. "assert f(1) == 2" -> "assert f(??) == 2" for input prediction.
std::string crux_display_assertion(TaskKind kind, const std::string& gold_assertion);

}  // namespace reflect
