#include "reflect/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "reflect/textutil.hpp"

namespace reflect {

const char* to_string(AttackKind a) {
  switch (a) {
    case AttackKind::begin_var_init:
      return "begin_var_init";
    case AttackKind::mid_arith:
      return "mid_arith";
    case AttackKind::mid_extraneous:
      return "mid_extraneous";
    case AttackKind::mid_omit:
      return "mid_omit";
    case AttackKind::end_arith:
      return "end_arith";
    case AttackKind::end_extraneous:
      return "end_extraneous";
    case AttackKind::end_omit:
      return "end_omit";
  }
  return "?";
}

AttackKind attack_from_string(const std::string& name) {
  for (AttackKind a : all_attacks())
    if (name == to_string(a)) return a;
  throw std::invalid_argument("unknown attack kind: " + name);
}

std::vector<AttackKind> all_attacks() {
  return {AttackKind::begin_var_init, AttackKind::mid_arith,
          AttackKind::mid_extraneous, AttackKind::mid_omit,
          AttackKind::end_arith,      AttackKind::end_extraneous,
          AttackKind::end_omit};
}

void PerturbationConfig::validate() const {
  if (var_init_factors.empty())
    throw std::invalid_argument("var_init_factors must not be empty");
  for (auto f : var_init_factors)
    if (f == 0 || f == 1)
      throw std::invalid_argument("var_init_factors must exclude 0 and 1");
  if (delta_min < 1 || delta_max < delta_min)
    throw std::invalid_argument("arith operand delta range must be within 1..n");
  if (extraneous_templates.empty())
    throw std::invalid_argument("extraneous_templates must not be empty");
  for (const auto& t : extraneous_templates) {
    if (t.pattern.find("{annot}") == std::string::npos)
      throw std::invalid_argument("extraneous template lacks {annot}: " + t.pattern);
    if (t.op == '/' && t.operand == 0)
      throw std::invalid_argument("extraneous template divides by zero");
  }
}

namespace {

struct AnnPos {
  std::size_t step;
  std::size_t ann;
};

std::vector<AnnPos> annotation_positions(const ParsedCot& cot) {
  std::vector<AnnPos> out;
  for (std::size_t s = 0; s < cot.steps.size(); ++s)
    for (std::size_t a = 0; a < cot.steps[s].annotations.size(); ++a)
      out.push_back({s, a});
  return out;
}

struct Sub {
  std::string old_key;
  Decimal value;
};

void log_change(std::vector<ChangeEntry>* log, std::size_t step,
                const std::string& before, const std::string& after) {
  if (log) log->push_back({step, before, after});
}

std::string splice(const std::string& text, std::size_t begin, std::size_t end,
                   const std::string& replacement) {
  return text.substr(0, begin) + replacement + text.substr(end);
}

// Forward propagation by value matching, starting at linear annotation index
// `start` (inclusive). Positions listed in `pinned` keep their results.
void propagate(ParsedCot& cot, std::size_t start, const std::set<std::size_t>& pinned,
               std::vector<Sub>& subs, std::vector<ChangeEntry>* log) {
  auto positions = annotation_positions(cot);
  for (std::size_t p = start; p < positions.size(); ++p) {
    if (pinned.count(p)) continue;
    CotStep& step = cot.steps[positions[p].step];
    const Annotation& ann = step.annotations[positions[p].ann];

    auto tokens = tokenize_expr(ann.raw_expr);
    bool touched = false;
    std::string new_expr = ann.raw_expr;
    // splice right-to-left so earlier token spans stay valid
    for (std::size_t t = tokens.size(); t-- > 0;) {
      if (!tokens[t].is_operand) continue;
      std::string key = tokens[t].value.key();
      for (std::size_t s = subs.size(); s-- > 0;) {
        if (subs[s].old_key == key) {
          new_expr = splice(new_expr, tokens[t].begin, tokens[t].end,
                            subs[s].value.str());
          touched = true;
          break;  // most recent producer wins
        }
      }
    }
    if (!touched) continue;

    Decimal new_result = eval_expr(new_expr);  // may throw on division by zero
    Decimal old_result = ann.result;
    std::string before = step.text;
    rewrite_annotation(step, positions[p].ann, new_expr, new_result);
    log_change(log, positions[p].step, before, step.text);
    if (old_result.key() != new_result.key())
      subs.push_back({old_result.key(), new_result});
  }

  if (cot.marker_value) {
    std::string key = cot.marker_value->key();
    for (std::size_t s = subs.size(); s-- > 0;) {
      if (subs[s].old_key == key) {
        std::string line = *cot.marker_line;
        std::size_t end = line.size();
        while (end > 0 && line[end - 1] == ' ') --end;
        std::size_t begin = end;
        while (begin > 0 && (std::isdigit(static_cast<unsigned char>(line[begin - 1])) ||
                             line[begin - 1] == '.' || line[begin - 1] == ',' ||
                             line[begin - 1] == '-')) {
          --begin;
        }
        cot.marker_line = splice(line, begin, end, subs[s].value.str());
        cot.marker_value = subs[s].value;
        break;
      }
    }
  }
}

std::size_t linear_index(const std::vector<AnnPos>& positions, std::size_t step,
                         std::size_t ann) {
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (positions[i].step == step && positions[i].ann == ann) return i;
  return positions.size();
}

}  // namespace

ParsedCot recompute_chain(ParsedCot cot, const std::vector<ResultEdit>& edits,
                          std::vector<ChangeEntry>* log) {
  if (edits.empty()) return cot;
  std::vector<Sub> subs;
  std::set<std::size_t> pinned;
  auto positions = annotation_positions(cot);
  std::size_t start = positions.size();
  for (const auto& e : edits) {
    if (e.step >= cot.steps.size() ||
        e.ann >= cot.steps[e.step].annotations.size())
      throw CotError("edit target does not exist");
    CotStep& step = cot.steps[e.step];
    Decimal old_result = step.annotations[e.ann].result;
    std::string before = step.text;
    rewrite_annotation(step, e.ann, step.annotations[e.ann].raw_expr, e.new_result);
    log_change(log, e.step, before, step.text);
    if (old_result.key() != e.new_result.key())
      subs.push_back({old_result.key(), e.new_result});
    std::size_t idx = linear_index(positions, e.step, e.ann);
    pinned.insert(idx);
    start = std::min(start, idx + 1);
  }
  propagate(cot, start, pinned, subs, log);
  return cot;
}

namespace {

SplitMix64 attack_rng(const PerturbationConfig& config, const std::string& instance_id,
                      AttackKind attack) {
  std::string material;
  for (int i = 0; i < 8; ++i)
    material.push_back(static_cast<char>((config.seed >> (8 * i)) & 0xFF));
  material += instance_id;
  material += '|';
  material += to_string(attack);
  return SplitMix64(fnv1a64(material));
}

// First number in the CoT that reads as prose (not part of an expression echo,
// an annotation, or a duplicated annotation result).
struct ProseNumber {
  std::size_t step;
  std::size_t begin;
  std::size_t end;
  Decimal value;
};

bool excluded_neighbor(unsigned char c, bool before) {
  switch (c) {
    case '+':
    case '-':
    case '*':
    case '/':
    case '=':
    case '<':
    case '>':
      return true;
    case 'x':
    case 'X':
      return !before;  // "8 x 2": operator use after a number
  }
  return c >= 0x80;  // unicode operator bytes
}

std::optional<ProseNumber> find_prose_number(const ParsedCot& cot) {
  for (std::size_t s = 0; s < cot.steps.size(); ++s) {
    const CotStep& step = cot.steps[s];
    const std::string& text = step.text;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
      std::size_t begin = i;
      std::size_t end = i;
      while (end < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[end])) ||
              (text[end] == ',' && end + 1 < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[end + 1]))) ||
              (text[end] == '.' && end + 1 < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[end + 1]))))) {
        ++end;
      }
      i = end;  // continue scanning after this token either way

      bool inside_annotation = false;
      for (const auto& ann : step.annotations)
        if (begin >= ann.begin && begin < ann.end) inside_annotation = true;
      if (inside_annotation) continue;

      std::size_t pb = begin;
      while (pb > 0 && text[pb - 1] == ' ') --pb;
      if (pb > 0 && excluded_neighbor(static_cast<unsigned char>(text[pb - 1]), true))
        continue;
      std::size_t pa = end;
      while (pa < text.size() && text[pa] == ' ') ++pa;
      if (pa < text.size() &&
          excluded_neighbor(static_cast<unsigned char>(text[pa]), false))
        continue;

      auto value = Decimal::parse(text.substr(begin, end - begin));
      if (!value) continue;
      return ProseNumber{s, begin, end, *value};
    }
  }
  return std::nullopt;
}

std::string expand_template(const ExtraneousTemplate& tmpl, const Decimal& input,
                            const Decimal& output) {
  std::string annot = "<<" + input.str() + std::string(1, tmpl.op) +
                      std::to_string(tmpl.operand) + "=" + output.str() + ">>" +
                      output.str();
  std::string out = tmpl.pattern;
  std::size_t at = out.find("{annot}");
  return out.substr(0, at) + annot + out.substr(at + 7);
}

char cycle_operator(char op) {
  switch (op) {
    case '+':
      return '*';
    case '*':
      return '-';
    case '-':
      return '/';
    case '/':
      return '+';
  }
  return op;
}

// Edits one annotation's expression in place and propagates downstream.
void arith_edit(ParsedCot& cot, std::size_t linear_target, SplitMix64& rng,
                const PerturbationConfig& config, std::vector<ChangeEntry>* log) {
  auto positions = annotation_positions(cot);
  AnnPos pos = positions[linear_target];
  CotStep& step = cot.steps[pos.step];
  const Annotation& ann = step.annotations[pos.ann];
  auto tokens = tokenize_expr(ann.raw_expr);

  std::vector<std::size_t> operand_idx, op_idx;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    (tokens[i].is_operand ? operand_idx : op_idx).push_back(i);

  bool swap_operator = !op_idx.empty() && rng.below(2) == 0;
  std::string new_expr;
  if (swap_operator) {
    const ExprToken& t = tokens[op_idx[0]];
    new_expr = splice(ann.raw_expr, t.begin, t.end,
                      std::string(1, cycle_operator(t.op)));
  } else {
    const ExprToken& t = tokens[operand_idx[rng.below(operand_idx.size())]];
    std::int64_t magnitude =
        config.delta_min +
        static_cast<std::int64_t>(rng.below(config.delta_max - config.delta_min + 1));
    Decimal delta = Decimal::from_int(rng.below(2) == 0 ? magnitude : -magnitude);
    Decimal new_operand = t.value + delta;
    new_expr = splice(ann.raw_expr, t.begin, t.end, new_operand.str());
  }

  Decimal new_result = eval_expr(new_expr);  // division by zero -> CotError
  Decimal old_result = ann.result;
  std::string before = step.text;
  rewrite_annotation(step, pos.ann, new_expr, new_result);
  log_change(log, pos.step, before, step.text);

  std::vector<Sub> subs;
  if (old_result.key() != new_result.key())
    subs.push_back({old_result.key(), new_result});
  propagate(cot, linear_target + 1, {linear_target}, subs, log);
}

}  // namespace

PerturbationOutcome apply_attack(const ParsedCot& original, AttackKind attack,
                                 const PerturbationConfig& config,
                                 const std::string& instance_id) {
  config.validate();
  if (original.annotation_count() == 0)
    throw InapplicableAttack("CoT has no annotations");
  bool mid = attack == AttackKind::mid_arith || attack == AttackKind::mid_extraneous ||
             attack == AttackKind::mid_omit;
  if (mid && original.annotated_step_count() < 2)
    throw InapplicableAttack("mid attacks need at least two annotated steps");
  if (attack == AttackKind::end_omit && original.annotation_count() < 2)
    throw InapplicableAttack("end omission needs at least two annotations");

  SplitMix64 rng = attack_rng(config, instance_id, attack);
  Decimal original_final = final_answer(original);

  PerturbationOutcome outcome;
  outcome.attack = attack;
  ParsedCot cot = original;
  // adversarial CoTs end at the corrupted computation: drop the marker line
  cot.marker_line.reset();
  cot.marker_value.reset();
  cot.marker_leading.clear();

  auto positions = annotation_positions(cot);

  switch (attack) {
    case AttackKind::begin_var_init: {
      std::int64_t factor =
          config.var_init_factors[rng.below(config.var_init_factors.size())];
      Decimal factor_dec = Decimal::from_int(factor);
      auto prose = find_prose_number(cot);
      if (prose) {
        CotStep& step = cot.steps[prose->step];
        Decimal scaled = prose->value * factor_dec;
        std::string raw = step.text.substr(prose->begin, prose->end - prose->begin);
        std::string fragment = raw + " * " + std::to_string(factor) + " = <<" + raw +
                               "*" + std::to_string(factor) + "=" + scaled.str() +
                               ">>" + scaled.str();
        std::size_t before_count = 0;
        for (const auto& ann : step.annotations)
          if (ann.begin < prose->begin) ++before_count;
        std::string before = step.text;
        step.text = splice(step.text, prose->begin, prose->end, fragment);
        rescan_step(step);
        log_change(&outcome.change_log, prose->step, before, step.text);

        std::size_t seed_linear =
            linear_index(annotation_positions(cot), prose->step, before_count);
        std::vector<Sub> subs{{prose->value.key(), scaled}};
        propagate(cot, seed_linear + 1, {seed_linear}, subs, &outcome.change_log);
      } else {
        // no standalone prose quantity: scale the first operand of the first
        // annotation instead
        AnnPos pos = positions.front();
        CotStep& step = cot.steps[pos.step];
        const Annotation& ann = step.annotations[pos.ann];
        auto tokens = tokenize_expr(ann.raw_expr);
        const ExprToken& t = tokens.front();
        std::string new_expr =
            splice(ann.raw_expr, t.begin, t.end,
                   ann.raw_expr.substr(t.begin, t.end - t.begin) + "*" +
                       std::to_string(factor));
        Decimal new_result = eval_expr(new_expr);
        Decimal old_result = ann.result;
        std::string before = step.text;
        rewrite_annotation(step, pos.ann, new_expr, new_result);
        log_change(&outcome.change_log, pos.step, before, step.text);
        std::vector<Sub> subs;
        if (old_result.key() != new_result.key())
          subs.push_back({old_result.key(), new_result});
        propagate(cot, 1, {0}, subs, &outcome.change_log);
      }
      break;
    }

    case AttackKind::mid_arith:
      arith_edit(cot, 0, rng, config, &outcome.change_log);
      break;

    case AttackKind::end_arith:
      arith_edit(cot, positions.size() - 1, rng, config, &outcome.change_log);
      break;

    case AttackKind::mid_extraneous: {
      std::size_t first_annotated = 0;
      while (cot.steps[first_annotated].annotations.empty()) ++first_annotated;
      const ExtraneousTemplate& tmpl =
          config.extraneous_templates[rng.below(config.extraneous_templates.size())];
      Decimal input = cot.steps[first_annotated].annotations.back().result;
      Decimal operand = Decimal::from_int(tmpl.operand);
      Decimal output;
      switch (tmpl.op) {
        case '+':
          output = input + operand;
          break;
        case '-':
          output = input - operand;
          break;
        case '*':
          output = input * operand;
          break;
        default:
          output = input / operand;
          break;
      }
      CotStep inserted;
      inserted.leading = "\n";
      inserted.text = expand_template(tmpl, input, output);
      rescan_step(inserted);
      cot.steps.insert(cot.steps.begin() + static_cast<std::ptrdiff_t>(first_annotated) + 1,
                       std::move(inserted));
      log_change(&outcome.change_log, first_annotated + 1, "",
                 cot.steps[first_annotated + 1].text);

      std::size_t seed_linear =
          linear_index(annotation_positions(cot), first_annotated + 1, 0);
      std::vector<Sub> subs{{input.key(), output}};
      propagate(cot, seed_linear + 1, {seed_linear}, subs, &outcome.change_log);
      break;
    }

    case AttackKind::mid_omit: {
      std::size_t first_annotated = 0;
      while (cot.steps[first_annotated].annotations.empty()) ++first_annotated;
      const CotStep& victim = cot.steps[first_annotated];
      Decimal removed_result = victim.annotations.back().result;
      Decimal bridge = victim.annotations.front().operands.front();
      log_change(&outcome.change_log, first_annotated, victim.text, "");
      std::string leading = victim.leading;
      cot.steps.erase(cot.steps.begin() + static_cast<std::ptrdiff_t>(first_annotated));
      if (first_annotated < cot.steps.size())
        cot.steps[first_annotated].leading = leading;

      // the chain is now incomplete: later uses of the removed result fall
      // back to the quantity it was computed from
      std::vector<Sub> subs;
      if (removed_result.key() != bridge.key())
        subs.push_back({removed_result.key(), bridge});
      std::size_t start = 0;
      auto after = annotation_positions(cot);
      while (start < after.size() && after[start].step < first_annotated) ++start;
      propagate(cot, start, {}, subs, &outcome.change_log);
      break;
    }

    case AttackKind::end_extraneous: {
      const ExtraneousTemplate& tmpl =
          config.extraneous_templates[rng.below(config.extraneous_templates.size())];
      Decimal input = final_answer(cot);
      Decimal operand = Decimal::from_int(tmpl.operand);
      Decimal output;
      switch (tmpl.op) {
        case '+':
          output = input + operand;
          break;
        case '-':
          output = input - operand;
          break;
        case '*':
          output = input * operand;
          break;
        default:
          output = input / operand;
          break;
      }
      CotStep appended;
      appended.leading = cot.steps.empty() ? "" : "\n";
      appended.text = expand_template(tmpl, input, output);
      rescan_step(appended);
      cot.steps.push_back(std::move(appended));
      log_change(&outcome.change_log, cot.steps.size() - 1, "",
                 cot.steps.back().text);
      break;
    }

    case AttackKind::end_omit: {
      std::size_t last_annotated = cot.steps.size();
      while (last_annotated-- > 0)
        if (!cot.steps[last_annotated].annotations.empty()) break;
      CotStep& step = cot.steps[last_annotated];
      if (step.annotations.size() == 1) {
        log_change(&outcome.change_log, last_annotated, step.text, "");
        cot.steps.erase(cot.steps.begin() + static_cast<std::ptrdiff_t>(last_annotated));
      } else {
        // truncate the step right before the last calculation, prose echo
        // included, leaving the sentence unresolved
        const Annotation& ann = step.annotations.back();
        std::size_t begin = ann.begin;
        auto echo = find_expr_echo(step.text, ann.begin, ann.raw_expr);
        if (!echo.empty()) begin = echo.front().first;
        std::string before = step.text;
        step.text = step.text.substr(0, begin);
        while (!step.text.empty() && step.text.back() == ' ') step.text.pop_back();
        rescan_step(step);
        log_change(&outcome.change_log, last_annotated, before, step.text);
      }
      break;
    }
  }

  outcome.perturbed = std::move(cot);
  Decimal perturbed_final = final_answer(outcome.perturbed);
  outcome.changed_final = !Decimal::same_answer(perturbed_final, original_final);
  return outcome;
}

std::vector<AdversarialInstance> generate_adversarial(
    const TaskInstance& instance, const std::vector<AttackKind>& attacks,
    const PerturbationConfig& config, const TriggerSpec& trigger,
    GenerationStats* stats) {
  if (!is_gsm(instance.kind))
    throw std::invalid_argument("programmatic attacks cover the gsm tasks only");
  if (!instance.correct_cot)
    throw CorpusError("instance " + instance.id + " has no correct CoT");

  ParsedCot cot;
  try {
    cot = parse_cot(*instance.correct_cot);
  } catch (const CotError& e) {
    throw CorpusError("instance " + instance.id + ": unparseable CoT: " + e.what());
  }

  std::vector<AdversarialInstance> out;
  for (AttackKind attack : attacks) {
    if (stats) ++stats->candidates;
    PerturbationOutcome outcome;
    try {
      outcome = apply_attack(cot, attack, config, instance.id);
    } catch (const InapplicableAttack&) {
      if (stats) ++stats->inapplicable;
      continue;
    } catch (const CotError&) {
      // propagation failure (division by zero): treated as inapplicable
      if (stats) ++stats->inapplicable;
      continue;
    }
    std::string adversarial_answer = final_answer(outcome.perturbed).str();
    if (!outcome.changed_final ||
        normalize_answer(adversarial_answer) == normalize_answer(instance.gold_answer)) {
      if (stats) ++stats->filtered_unchanged;
      continue;
    }
    AdversarialInstance adv;
    adv.base_id = instance.id;
    adv.kind = instance.kind;
    adv.attack = to_string(attack);
    adv.question = instance.question;
    adv.adversarial_cot = render_cot(outcome.perturbed);
    adv.adversarial_answer = adversarial_answer;
    adv.trigger = trigger.text;
    adv.gold_answer = instance.gold_answer;
    adv.prompt =
        append_trigger(render_gsm_prompt(instance.question, adv.adversarial_cot), trigger);
    adv.provenance = Provenance::programmatic;
    out.push_back(std::move(adv));
    if (stats) ++stats->retained;
  }
  return out;
}

}  // namespace reflect
