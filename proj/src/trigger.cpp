#include "reflect/trigger.hpp"

namespace reflect {

std::string append_trigger(const std::string& context, const TriggerSpec& spec) {
  return context + spec.separator + spec.text;
}

std::string render_gsm_prompt(const std::string& question, const std::string& cot) {
  return "Answer the question: \n" + question +
         "\n\nLet's solve this step by step ... " + cot;
}

std::string render_trivia_prompt(const std::string& question,
                                 const std::string& passage,
                                 const std::string& stated_answer) {
  return question + "\n\n" + passage + "\nAnswer: " + stated_answer;
}

std::string render_trivia_self_prompt(const std::string& question,
                                      const std::string& wrong_answer) {
  return question + "\n" + wrong_answer;
}

std::string render_crux_prompt(TaskKind kind, const std::string& code,
                               const std::string& display_assertion,
                               const std::string& cot) {
  std::string instruction;
  if (kind == TaskKind::cruxeval_i) {
    instruction =
        "Given the Python function f and the expected output below, find an input "
        "for which f produces that output. Reason step by step, then give one "
        "passing assertion between [ANSWER] and [/ANSWER] tags.";
  } else {
    instruction =
        "Given the Python function and the partial assertion below, work out the "
        "value the function returns for the shown input. Reason step by step, "
        "then give the completed assertion between [ANSWER] and [/ANSWER] tags.";
  }
  return instruction + "\n\n[PYTHON]\n" + code + "\n" + display_assertion +
         "\n[/PYTHON]\n\n[THOUGHT]\n" + cot;
}

std::string render_bbh_prompt(const std::string& question, const std::string& cot,
                              const std::string& fewshot_prefix) {
  std::string out;
  if (!fewshot_prefix.empty()) out = fewshot_prefix + "\n\n";
  out += question + "\n\nA: Let's think step by step.\n" + cot;
  return out;
}

std::string crux_display_assertion(TaskKind kind, const std::string& gold_assertion) {
  std::size_t eq = gold_assertion.rfind("==");
  if (eq == std::string::npos) return gold_assertion;
  if (kind == TaskKind::cruxeval_o) {
    return gold_assertion.substr(0, eq) + "== ??";
  }
  // input prediction: mask the call arguments
  std::size_t open = gold_assertion.find('(');
  std::size_t close = gold_assertion.rfind(')', eq);
  if (open == std::string::npos || close == std::string::npos || close < open)
    return gold_assertion;
  return gold_assertion.substr(0, open + 1) + "??" + gold_assertion.substr(close, eq - close) +
         "==" + gold_assertion.substr(eq + 2);
}

}  // namespace reflect
