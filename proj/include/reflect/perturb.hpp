#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflect/corpus.hpp"
#include "reflect/cot.hpp"
#include "reflect/trigger.hpp"

namespace reflect {

// The seven structured attacks, in their canonical order: position in the
// reasoning sequence (beginning / middle / end) crossed with the edit type.
enum class AttackKind {
  begin_var_init,
  mid_arith,
  mid_extraneous,
  mid_omit,
  end_arith,
  end_extraneous,
  end_omit,
};

constexpr std::size_t kAttackCount = 7;
const char* to_string(AttackKind a);
AttackKind attack_from_string(const std::string& name);
std::vector<AttackKind> all_attacks();

struct ExtraneousTemplate {
  std::string pattern;  // contains "{annot}", expanded to "<<expr=res>>res"
  char op = '/';
  std::int64_t operand = 2;
};

struct PerturbationConfig {
  std::uint64_t seed = 0;
  std::vector<std::int64_t> var_init_factors = {2, 3, 4};  // excludes 1
  int delta_min = 1;  // operand delta magnitude range, excludes 0
  int delta_max = 5;
  std::vector<ExtraneousTemplate> extraneous_templates = {
      {"Then divide by 2 again, so {annot}.", '/', 2},
      {"Add 10 for the extras: {annot}.", '+', 10},
  };

  void validate() const;  // throws std::invalid_argument on bad ranges
};

class InapplicableAttack : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChangeEntry {
  std::size_t step = 0;
  std::string before;
  std::string after;
};

struct PerturbationOutcome {
  AttackKind attack = AttackKind::begin_var_init;
  ParsedCot perturbed;
  bool changed_final = false;
  std::vector<ChangeEntry> change_log;
};

struct ResultEdit {
  std::size_t step = 0;
  std::size_t ann = 0;
  Decimal new_result;
};

// Applies the edits, then forward-propagates by value matching: a later
// operand is downstream iff it equals an edited result exactly, ties breaking
// to the most recent producer. Touched annotations are re-evaluated and their
// step text rewritten. A final marker whose value matches an edited result is
// updated too. Throws CotError when propagation divides by zero.
ParsedCot recompute_chain(ParsedCot cot, const std::vector<ResultEdit>& edits,
                          std::vector<ChangeEntry>* log = nullptr);

// One structural edit per the attack's definition, then chain recomputation.
// Deterministic given (config.seed, instance_id, attack). Throws
// InapplicableAttack when the attack's precondition is unmet and CotError when
// recomputation divides by zero; callers treat both as "skip this attack".
PerturbationOutcome apply_attack(const ParsedCot& cot, AttackKind attack,
                                 const PerturbationConfig& config,
                                 const std::string& instance_id);

struct GenerationStats {
  std::size_t candidates = 0;
  std::size_t retained = 0;
  std::size_t filtered_unchanged = 0;  // final answer survived the edit
  std::size_t inapplicable = 0;
};

// One AdversarialInstance per applicable, answer-changing attack. The gold
// answer is preserved; the rendered adversarial CoT drops any final-answer
// marker line; prompts end with the trigger.
std::vector<AdversarialInstance> generate_adversarial(
    const TaskInstance& instance, const std::vector<AttackKind>& attacks,
    const PerturbationConfig& config, const TriggerSpec& trigger = {},
    GenerationStats* stats = nullptr);

}  // namespace reflect
