#include "reflect/pipelines.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "reflect/scoring.hpp"
#include "reflect/textutil.hpp"

namespace reflect {

using json = nlohmann::json;

GsmPipelineResult build_situational_gsm(const std::vector<TaskInstance>& dataset,
                                        const PerturbationConfig& config,
                                        const TriggerSpec& trigger) {
  GsmPipelineResult result;
  auto attacks = all_attacks();
  for (const auto& instance : dataset) {
    if (!is_gsm(instance.kind))
      throw PipelineError("gsm pipeline got a " +
                          std::string(to_string(instance.kind)) + " instance: " +
                          instance.id);
    auto generated =
        generate_adversarial(instance, attacks, config, trigger, &result.stats);
    for (auto& adv : generated) result.instances.push_back(std::move(adv));
  }
  return result;
}

EmbeddingMap load_embeddings(const std::string& path) {
  EmbeddingMap out;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw PipelineError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    std::vector<double> v = j.at("vector").get<std::vector<double>>();
    if (dim == 0) dim = v.size();
    if (v.empty() || v.size() != dim)
      throw PipelineError(path + ":" + std::to_string(lineno) +
                          ": embedding dimensions disagree");
    out[j.at("doc_id").get<std::string>()] = std::move(v);
  }
  return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw PipelineError("cosine over mismatched vectors");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw PipelineError("cosine over a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

TriviaPipelineResult build_situational_trivia(const std::vector<TaskInstance>& dataset,
                                              const EmbeddingMap& embeddings,
                                              const TriggerSpec& trigger,
                                              std::size_t word_cap) {
  struct DocRef {
    const TaskInstance* owner;
    const ContextDoc* doc;
  };
  std::vector<DocRef> docs;
  for (const auto& instance : dataset) {
    if (instance.kind != TaskKind::triviaqa)
      throw PipelineError("trivia pipeline got a " +
                          std::string(to_string(instance.kind)) + " instance");
    for (const auto& doc : instance.context_docs) docs.push_back({&instance, &doc});
  }
  for (const auto& ref : docs) {
    if (!embeddings.count(ref.doc->doc_id))
      throw PipelineError("no embedding for doc " + ref.doc->doc_id);
  }

  TriviaPipelineResult result;
  for (const auto& instance : dataset) {
    const ContextDoc& own = instance.context_docs.front();
    const auto& own_vec = embeddings.at(own.doc_id);

    const DocRef* best = nullptr;
    double best_sim = 0;
    for (const auto& candidate : docs) {
      if (candidate.owner->id == instance.id) continue;
      if (contains_normalized(candidate.doc->text, instance.gold_answer)) continue;
      double sim = cosine_similarity(own_vec, embeddings.at(candidate.doc->doc_id));
      if (!best || sim > best_sim ||
          (sim == best_sim && candidate.doc->doc_id < best->doc->doc_id)) {
        best = &candidate;
        best_sim = sim;
      }
    }
    if (!best) {
      result.skipped.push_back({instance.id, "no eligible confounder"});
      continue;
    }

    AdversarialInstance adv;
    adv.base_id = instance.id;
    adv.kind = TaskKind::triviaqa;
    adv.question = instance.question;
    adv.adversarial_answer = best->owner->gold_answer;
    adv.adversarial_cot = best->doc->text + "\nAnswer: " + best->owner->gold_answer;
    adv.trigger = trigger.text;
    adv.gold_answer = instance.gold_answer;
    adv.prompt = append_trigger(
        render_trivia_prompt(instance.question, best->doc->text, best->owner->gold_answer),
        trigger);
    adv.provenance = Provenance::llm_generated;

    if (word_count(adv.prompt) > word_cap) {
      result.skipped.push_back({instance.id, "prompt exceeds word cap"});
      continue;
    }
    result.pairs.push_back(
        {instance.id, best->doc->doc_id, best_sim, best->owner->gold_answer});
    result.instances.push_back(std::move(adv));
  }
  return result;
}

TemplateSet TemplateSet::load(const std::string& dir,
                              const std::vector<std::string>& names) {
  TemplateSet set;
  for (const auto& name : names)
    set.templates_[name] = read_file(dir + "/" + name + ".txt");
  return set;
}

std::string TemplateSet::render(const std::string& name,
                                const std::map<std::string, std::string>& values) const {
  std::string out = raw(name);
  for (const auto& [key, value] : values) {
    std::string placeholder = "{" + key + "}";
    std::size_t at = 0;
    while ((at = out.find(placeholder, at)) != std::string::npos) {
      out = out.substr(0, at) + value + out.substr(at + placeholder.size());
      at += value.size();
    }
  }
  return out;
}

const std::string& TemplateSet::raw(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw PipelineError("unknown template: " + name);
  return it->second;
}

std::string TemplateSet::digest() const {
  std::string all;
  for (const auto& [name, body] : templates_) {
    all += name;
    all += '\0';
    all += body;
    all += '\0';
  }
  return hex64(fnv1a64(all));
}

namespace {

// Per-instance pipeline state; client calls run as bounded-parallel waves
// over every instance still alive, and outputs keep the dataset order.
struct CruxState {
  const TaskInstance* instance = nullptr;
  bool alive = true;
  std::string explanation;
  std::string correct_cot_response;
  std::string correct_assertion;
  std::string adv_assertion;
  std::string adversarial_cot;
};

template <typename MakePrompt, typename Consume>
void run_wave(const ModelClient& client, int max_in_flight,
              std::vector<CruxState>& states, MakePrompt make_prompt,
              Consume consume) {
  std::vector<std::size_t> indices;
  std::vector<CompletionRequest> requests;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].alive) continue;
    CompletionRequest request;
    request.prompt = make_prompt(states[i]);
    indices.push_back(i);
    requests.push_back(std::move(request));
  }
  auto completions = client.batch_complete(requests, max_in_flight);
  for (std::size_t k = 0; k < indices.size(); ++k)
    consume(states[indices[k]], completions[k].text);
}

}  // namespace

CruxPipelineResult build_situational_crux(const std::vector<TaskInstance>& dataset,
                                          const ModelClient& client,
                                          CodeExecutor& executor,
                                          const TemplateSet& templates,
                                          const TriggerSpec& trigger,
                                          int max_in_flight) {
  CruxPipelineResult result;
  std::vector<CruxState> states(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!is_crux(dataset[i].kind))
      throw PipelineError("crux pipeline got a " +
                          std::string(to_string(dataset[i].kind)) + " instance");
    states[i].instance = &dataset[i];
  }
  auto drop = [&](CruxState& state, const std::string& reason) {
    state.alive = false;
    result.skipped.push_back({state.instance->id, reason});
  };

  // 1. plain-language explanation of the function
  run_wave(client, max_in_flight, states,
           [&](const CruxState& s) {
             return templates.render("explain", {{"code", s.instance->question}});
           },
           [&](CruxState& s, const std::string& text) { s.explanation = trim(text); });

  // 2. correct CoT, verified by running its assertion
  run_wave(client, max_in_flight, states,
           [&](const CruxState& s) {
             return templates.render("correct_cot", {{"code", s.instance->question},
                                                     {"explanation", s.explanation}});
           },
           [&](CruxState& s, const std::string& text) { s.correct_cot_response = text; });
  for (auto& s : states) {
    if (!s.alive) continue;
    auto assertion = extract_answer(s.instance->kind, s.correct_cot_response);
    if (!assertion) {
      drop(s, "correct CoT carries no assertion");
      continue;
    }
    ExecResult verify = executor.run(s.instance->question + "\n" + *assertion);
    if (verify.status == ExecStatus::timeout)
      drop(s, "executor timeout on correct CoT");
    else if (verify.status != ExecStatus::pass)
      drop(s, "correct CoT assertion does not pass");
    else
      s.correct_assertion = *assertion;
  }

  // 3. adversarial answer, accepted only when its assertion fails
  run_wave(client, max_in_flight, states,
           [&](const CruxState& s) {
             return templates.render("adversarial_answer",
                                     {{"code", s.instance->question},
                                      {"assertion", s.correct_assertion}});
           },
           [&](CruxState& s, const std::string& text) {
             auto assertion = extract_answer(s.instance->kind, text);
             if (assertion)
               s.adv_assertion = *assertion;
             else
               drop(s, "no adversarial assertion produced");
           });
  for (auto& s : states) {
    if (!s.alive) continue;
    ExecResult check = executor.run(s.instance->question + "\n" + s.adv_assertion);
    if (check.status == ExecStatus::timeout)
      drop(s, "executor timeout on adversarial answer");
    else if (check.status == ExecStatus::pass)
      drop(s, "adversarial answer passes the test case");
  }

  // 4. adversarial CoT conditioned on the correct CoT and the bad answer
  run_wave(client, max_in_flight, states,
           [&](const CruxState& s) {
             return templates.render("adversarial_cot",
                                     {{"code", s.instance->question},
                                      {"correct_cot", s.correct_cot_response},
                                      {"adversarial_answer", s.adv_assertion}});
           },
           [&](CruxState& s, const std::string& text) {
             s.adversarial_cot = trim(text);
             if (s.adversarial_cot.empty()) drop(s, "empty adversarial CoT");
           });

  // 5. judge filter: no leaked correct answer, no admission of the error
  run_wave(client, max_in_flight, states,
           [&](const CruxState& s) {
             return templates.render("judge_filter",
                                     {{"adversarial_cot", s.adversarial_cot},
                                      {"gold_assertion", s.instance->gold_answer}});
           },
           [&](CruxState& s, const std::string& text) {
             if (lowercase(trim(text)).rfind("yes", 0) == 0)
               drop(s, "judge rejected the adversarial CoT");
           });

  for (const auto& s : states) {
    if (!s.alive) continue;
    const TaskInstance& instance = *s.instance;
    AdversarialInstance adv;
    adv.base_id = instance.id;
    adv.kind = instance.kind;
    adv.question = instance.question;
    adv.adversarial_cot = s.adversarial_cot;
    adv.adversarial_answer = s.adv_assertion;
    adv.trigger = trigger.text;
    adv.gold_answer = instance.gold_answer;
    std::string display = crux_display_assertion(instance.kind, instance.gold_answer);
    adv.prompt = append_trigger(
        render_crux_prompt(instance.kind, instance.question, display, s.adversarial_cot),
        trigger);
    adv.provenance = Provenance::llm_generated;
    result.instances.push_back(std::move(adv));
  }
  return result;
}

BbhPipelineResult build_situational_bbh(const std::vector<TaskInstance>& dataset,
                                        const ModelClient& client,
                                        const TemplateSet& templates,
                                        const TriggerSpec& trigger,
                                        bool include_fewshot_in_prompt,
                                        int max_in_flight) {
  BbhPipelineResult result;
  for (const auto& instance : dataset) {
    if (instance.kind != TaskKind::bbh)
      throw PipelineError("bbh pipeline got a " +
                          std::string(to_string(instance.kind)) + " instance");
  }

  struct BbhState {
    bool alive = true;
    bool instructed_branch = false;
    std::string adversarial_cot;
    std::string adversarial_answer;
  };
  std::vector<BbhState> states(dataset.size());

  auto batch = [&](const std::vector<std::string>& prompts) {
    std::vector<CompletionRequest> requests(prompts.size());
    for (std::size_t k = 0; k < prompts.size(); ++k) requests[k].prompt = prompts[k];
    return client.batch_complete(requests, max_in_flight);
  };

  // helper run over every instance
  {
    std::vector<std::size_t> indices;
    std::vector<std::string> prompts;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      indices.push_back(i);
      prompts.push_back(render_bbh_prompt(dataset[i].question, "",
                                          dataset[i].fewshot_prefix.value_or("")));
    }
    auto completions = batch(prompts);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const TaskInstance& instance = dataset[indices[k]];
      BbhState& state = states[indices[k]];
      std::string helper_cot = trim(completions[k].text);
      auto extracted = extract_answer(TaskKind::bbh, helper_cot);
      bool helper_correct = extracted && normalize_text(*extracted) ==
                                             normalize_text(instance.gold_answer);
      if (helper_correct) {
        state.instructed_branch = true;
      } else {
        // the helper's own wrong reasoning is the adversarial CoT, verbatim
        state.adversarial_cot = helper_cot;
        state.adversarial_answer = extracted.value_or("");
      }
    }
  }

  // instructed branch: pick an incorrect answer, then argue for it
  std::vector<std::size_t> instructed;
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i].alive && states[i].instructed_branch) instructed.push_back(i);
  if (!instructed.empty()) {
    std::vector<std::string> prompts;
    for (std::size_t i : instructed)
      prompts.push_back(templates.render("choose_incorrect",
                                         {{"question", dataset[i].question},
                                          {"gold", dataset[i].gold_answer}}));
    auto answers = batch(prompts);
    std::vector<std::size_t> writing;
    std::vector<std::string> cot_prompts;
    for (std::size_t k = 0; k < instructed.size(); ++k) {
      std::size_t i = instructed[k];
      std::string incorrect = trim(answers[k].text);
      if (incorrect.empty() ||
          normalize_text(incorrect) == normalize_text(dataset[i].gold_answer)) {
        states[i].alive = false;
        result.skipped.push_back({dataset[i].id, "no usable incorrect answer"});
        continue;
      }
      states[i].adversarial_answer = incorrect;
      writing.push_back(i);
      cot_prompts.push_back(templates.render(
          "incorrect_cot", {{"question", dataset[i].question},
                            {"incorrect_answer", incorrect}}));
    }
    auto cots = batch(cot_prompts);
    for (std::size_t k = 0; k < writing.size(); ++k) {
      std::size_t i = writing[k];
      states[i].adversarial_cot = trim(cots[k].text);
      if (states[i].adversarial_cot.empty()) {
        states[i].alive = false;
        result.skipped.push_back({dataset[i].id, "empty instructed CoT"});
      }
    }
  }

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!states[i].alive) continue;
    const TaskInstance& instance = dataset[i];
    AdversarialInstance adv;
    adv.base_id = instance.id;
    adv.kind = TaskKind::bbh;
    adv.question = instance.question;
    adv.adversarial_cot = states[i].adversarial_cot;
    adv.adversarial_answer = states[i].adversarial_answer;
    adv.trigger = trigger.text;
    adv.gold_answer = instance.gold_answer;
    adv.prompt = append_trigger(
        render_bbh_prompt(instance.question, states[i].adversarial_cot,
                          include_fewshot_in_prompt
                              ? instance.fewshot_prefix.value_or("")
                              : ""),
        trigger);
    adv.provenance = Provenance::llm_generated;
    result.instances.push_back(std::move(adv));
  }
  return result;
}

std::set<std::string> wrong_id_intersection(const SelfReflectionSource& source) {
  std::set<std::string> ids;
  bool first = true;
  for (const auto& [checkpoint, wrong] : source.per_checkpoint_wrong) {
    std::set<std::string> current;
    for (const auto& [id, attempt] : wrong) current.insert(id);
    if (first) {
      ids = std::move(current);
      first = false;
    } else {
      std::set<std::string> kept;
      std::set_intersection(ids.begin(), ids.end(), current.begin(), current.end(),
                            std::inserter(kept, kept.begin()));
      ids = std::move(kept);
    }
  }
  return ids;
}

SelfReflectionBuild build_self_reflection(const SelfReflectionSource& source,
                                          const std::vector<TaskInstance>& base,
                                          const TriggerSpec& trigger) {
  if (source.per_checkpoint_wrong.empty())
    throw PipelineError("self-reflection needs at least one checkpoint");
  SelfReflectionBuild build;
  build.ids = wrong_id_intersection(source);

  std::map<std::string, const TaskInstance*> by_id;
  for (const auto& instance : base) by_id[instance.id] = &instance;

  for (const auto& [checkpoint, wrong] : source.per_checkpoint_wrong) {
    std::vector<AdversarialInstance> instances;
    for (const auto& id : build.ids) {
      auto base_it = by_id.find(id);
      if (base_it == by_id.end())
        throw PipelineError("self-reflection id " + id + " missing from base dataset");
      const TaskInstance& task = *base_it->second;
      const IncorrectAttempt& attempt = wrong.at(id);

      AdversarialInstance adv;
      adv.base_id = id;
      adv.kind = task.kind;
      adv.question = task.question;
      adv.adversarial_cot = attempt.cot;
      adv.adversarial_answer = attempt.extracted;
      adv.trigger = trigger.text;
      adv.gold_answer = task.gold_answer;
      adv.provenance = Provenance::self_generated;

      std::string context;
      switch (task.kind) {
        case TaskKind::gsm8k:
        case TaskKind::gsm8k_platinum:
          context = render_gsm_prompt(task.question, attempt.cot);
          break;
        case TaskKind::triviaqa:
          context = render_trivia_self_prompt(task.question, attempt.cot);
          break;
        case TaskKind::cruxeval_i:
        case TaskKind::cruxeval_o:
          context = render_crux_prompt(
              task.kind, task.question,
              crux_display_assertion(task.kind, task.gold_answer), attempt.cot);
          break;
        case TaskKind::bbh:
          context = render_bbh_prompt(task.question, attempt.cot,
                                      task.fewshot_prefix.value_or(""));
          break;
      }
      adv.prompt = append_trigger(context, trigger);
      instances.push_back(std::move(adv));
    }
    build.per_checkpoint[checkpoint] = std::move(instances);
  }
  return build;
}

}  // namespace reflect
