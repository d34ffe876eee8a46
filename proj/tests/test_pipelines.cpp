#include <algorithm>

#include "doctest.h"
#include "reflect/pipelines.hpp"
#include "reflect/textutil.hpp"

using namespace reflect;

namespace {

const std::string kFixtures = REFLECT_FIXTURE_DIR;
const std::string kTemplates = REFLECT_TEMPLATE_DIR;

bool ends_with_trigger(const AdversarialInstance& adv) {
  return adv.prompt.size() >= adv.trigger.size() &&
         adv.prompt.compare(adv.prompt.size() - adv.trigger.size(),
                            adv.trigger.size(), adv.trigger) == 0;
}

TaskInstance trivia_instance(const std::string& id, const std::string& question,
                             const std::string& gold, const std::string& doc_id,
                             const std::string& text) {
  TaskInstance t;
  t.id = id;
  t.kind = TaskKind::triviaqa;
  t.question = question;
  t.gold_answer = gold;
  t.context_docs.push_back({doc_id, text});
  return t;
}

}  // namespace

TEST_CASE("append_trigger joins context, separator and cue") {
  CHECK(append_trigger("...adversarial CoT", {}) == "...adversarial CoT\n\nWait,");
  TriggerSpec admission{"Wait, I made a mistake", "\n\n", 1};
  CHECK(append_trigger("ctx", admission) == "ctx\n\nWait, I made a mistake");
  TriggerSpec bare{"Wait,", "", 1};
  CHECK(append_trigger("ctx", bare) == "ctxWait,");
}

TEST_CASE("gsm pipeline output stays within construction bounds") {
  auto dataset = load_dataset(kFixtures + "/gsm8k_base.jsonl", TaskKind::gsm8k);
  PerturbationConfig config;
  config.seed = 7;
  auto result = build_situational_gsm(dataset, config, {});
  CHECK(result.instances.size() >= 20);
  CHECK(result.instances.size() <= 140);
  CHECK(result.stats.candidates == 140);
  CHECK(result.stats.retained == result.instances.size());
  for (const auto& adv : result.instances) {
    CHECK(validate_instance(adv).empty());
    CHECK(ends_with_trigger(adv));
    CHECK(adv.provenance == Provenance::programmatic);
  }
  // gold answers never altered
  std::map<std::string, std::string> gold_by_id;
  for (const auto& t : dataset) gold_by_id[t.id] = t.gold_answer;
  for (const auto& adv : result.instances)
    CHECK(adv.gold_answer == gold_by_id.at(adv.base_id));
}

TEST_CASE("an empty gsm dataset produces an empty output") {
  auto result = build_situational_gsm({}, {}, {});
  CHECK(result.instances.empty());
  CHECK(result.stats.candidates == 0);
}

TEST_CASE("trivia confounders match exhaustive cosine ranking") {
  auto dataset = load_dataset(kFixtures + "/trivia_base.jsonl", TaskKind::triviaqa);
  auto embeddings = load_embeddings(kFixtures + "/trivia_embeddings.jsonl");
  auto result = build_situational_trivia(dataset, embeddings, {});
  REQUIRE(result.instances.size() == 3);
  CHECK(result.skipped.empty());

  // exhaustive oracle over the fixture
  for (const auto& instance : dataset) {
    const auto& own = embeddings.at(instance.context_docs.front().doc_id);
    std::string best_doc;
    double best = -2;
    for (const auto& other : dataset) {
      if (other.id == instance.id) continue;
      if (contains_normalized(other.context_docs.front().text, instance.gold_answer))
        continue;
      double sim =
          cosine_similarity(own, embeddings.at(other.context_docs.front().doc_id));
      if (sim > best || (sim == best && other.context_docs.front().doc_id < best_doc)) {
        best = sim;
        best_doc = other.context_docs.front().doc_id;
      }
    }
    auto pair = std::find_if(result.pairs.begin(), result.pairs.end(),
                             [&](const ConfounderPair& p) {
                               return p.question_id == instance.id;
                             });
    REQUIRE(pair != result.pairs.end());
    CHECK(pair->confounder_doc_id == best_doc);
    CHECK(pair->similarity == doctest::Approx(best).epsilon(1e-12));
  }

  std::map<std::string, std::string> gold_by_id;
  for (const auto& t : dataset) gold_by_id[t.id] = t.gold_answer;
  for (const auto& adv : result.instances) {
    CHECK(ends_with_trigger(adv));
    // the confounding passage never contains the gold answer
    CHECK(!contains_normalized(adv.adversarial_cot, adv.gold_answer));
    CHECK(word_count(adv.prompt) <= 500);
    CHECK(adv.gold_answer == gold_by_id.at(adv.base_id));
  }
}

TEST_CASE("prompts over the word cap are dropped") {
  std::string longtext;
  for (int i = 0; i < 600; ++i) longtext += "filler" + std::to_string(i) + " ";
  auto a = trivia_instance("qa", "Short question?", "alpha", "da",
                           "A short passage about gardening.");
  auto b = trivia_instance("qb", "Other question?", "beta", "db", longtext);
  EmbeddingMap embeddings{{"da", {1.0, 0.0}}, {"db", {0.9, 0.1}}};
  auto result = build_situational_trivia({a, b}, embeddings, {});
  // qa's only confounder is the 600-word passage: the rendered prompt blows
  // the cap and the instance drops; qb's confounder is tiny and survives
  REQUIRE(result.instances.size() == 1);
  CHECK(result.instances[0].base_id == "qb");
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].id == "qa");
  CHECK(result.skipped[0].reason == "prompt exceeds word cap");
}

TEST_CASE("confounders containing the gold answer are ineligible") {
  auto a = trivia_instance("qa", "Who wrote the opera?", "Verdi", "da",
                           "A passage about composers in general.");
  auto b = trivia_instance("qb", "Closest question?", "Puccini", "db",
                           "This passage mentions Verdi by name.");
  auto c = trivia_instance("qc", "Father question?", "Wagner", "dc",
                           "A passage about stagecraft.");
  EmbeddingMap embeddings{
      {"da", {1.0, 0.0}}, {"db", {0.99, 0.01}}, {"dc", {0.5, 0.5}}};
  auto result = build_situational_trivia({a, b, c}, embeddings, {});
  auto pair = std::find_if(result.pairs.begin(), result.pairs.end(),
                           [](const ConfounderPair& p) {
                             return p.question_id == "qa";
                           });
  REQUIRE(pair != result.pairs.end());
  // db is closest but leaks the answer, so dc wins
  CHECK(pair->confounder_doc_id == "dc");
}

TEST_CASE("an instance with no eligible confounder is skipped with a reason") {
  auto a = trivia_instance("qa", "Question A?", "shared answer", "da", "Passage A.");
  auto b = trivia_instance("qb", "Question B?", "other", "db",
                           "This passage contains the shared answer verbatim.");
  EmbeddingMap embeddings{{"da", {1.0, 0.0}}, {"db", {0.5, 0.5}}};
  auto result = build_situational_trivia({a, b}, embeddings, {});
  bool skipped_qa = false;
  for (const auto& s : result.skipped)
    if (s.id == "qa" && s.reason == "no eligible confounder") skipped_qa = true;
  CHECK(skipped_qa);
}

namespace {

std::shared_ptr<ScriptedModel> crux_happy_script() {
  auto model = std::make_shared<ScriptedModel>();
  const std::string inc = "def f(x):\n    return x + 1";
  const std::string rev = "def f(s):\n    return s[::-1]";
  model->add_rule({"Describe in plain English what the following Python function "
                   "does.\n\n[PYTHON]\n" + inc,
                   "It increments its argument by one.", "stop", {}, 0});
  model->add_rule({"Describe in plain English what the following Python function "
                   "does.\n\n[PYTHON]\n" + rev,
                   "It reverses the string.", "stop", {}, 0});
  model->add_rule({"then give a passing assertion between [ANSWER] and [/ANSWER] "
                   "tags.\n\n[PYTHON]\n" + inc,
                   "f(1) computes 1 + 1 = 2.\n[ANSWER]assert f(1) == 2[/ANSWER]",
                   "stop", {}, 0});
  model->add_rule({"then give a passing assertion between [ANSWER] and [/ANSWER] "
                   "tags.\n\n[PYTHON]\n" + rev,
                   "f('ab') flips the characters to 'ba'.\n[ANSWER]assert f('ab') == "
                   "'ba'[/ANSWER]",
                   "stop", {}, 0});
  model->add_rule({"Propose a plausible but wrong completion for the assertion "
                   "accompanying this function. Present it as a full assertion "
                   "between [ANSWER] and [/ANSWER] tags.\n\n[PYTHON]\n" + inc,
                   "[ANSWER]assert f(1) == 3[/ANSWER]", "stop", {}, 0});
  model->add_rule({"Propose a plausible but wrong completion for the assertion "
                   "accompanying this function. Present it as a full assertion "
                   "between [ANSWER] and [/ANSWER] tags.\n\n[PYTHON]\n" + rev,
                   "[ANSWER]assert f('ab') == 'ab'[/ANSWER]", "stop", {}, 0});
  model->add_rule({"Rewrite the reasoning below so that it convincingly argues for "
                   "the target assertion instead. Keep the same style and length. "
                   "Never hint that the target is wrong and never mention the "
                   "original conclusion.\n\n[PYTHON]\n" + inc,
                   "f(1) adds the length of the argument list, giving 3.", "stop",
                   {}, 0});
  model->add_rule({"Rewrite the reasoning below so that it convincingly argues for "
                   "the target assertion instead. Keep the same style and length. "
                   "Never hint that the target is wrong and never mention the "
                   "original conclusion.\n\n[PYTHON]\n" + rev,
                   "Slicing with a negative step keeps the order, so f('ab') stays "
                   "'ab'.",
                   "stop", {}, 0});
  model->add_rule({"Answer yes or no. Does the candidate reasoning below mention or "
                   "discuss the correct answer at any point",
                   "no", "stop", {}, 0});
  return model;
}

std::vector<TaskInstance> crux_fixture() {
  TaskInstance c1;
  c1.id = "c1";
  c1.kind = TaskKind::cruxeval_o;
  c1.question = "def f(x):\n    return x + 1";
  c1.gold_answer = "assert f(1) == 2";
  TaskInstance c2;
  c2.id = "c2";
  c2.kind = TaskKind::cruxeval_o;
  c2.question = "def f(s):\n    return s[::-1]";
  c2.gold_answer = "assert f('ab') == 'ba'";
  return {c1, c2};
}

}  // namespace

TEST_CASE("the crux pipeline retains verified failing assertions") {
  ModelClient client(crux_happy_script());
  FakeExecutor executor({{"assert f(1) == 2", ExecStatus::pass},
                         {"assert f('ab') == 'ba'", ExecStatus::pass}},
                        ExecStatus::fail);
  auto templates = TemplateSet::load(kTemplates + "/cruxeval", kCruxTemplates);
  auto result =
      build_situational_crux(crux_fixture(), client, executor, templates, {});
  REQUIRE(result.instances.size() == 2);
  CHECK(result.skipped.empty());
  CHECK(result.instances[0].adversarial_answer == "assert f(1) == 3");
  CHECK(result.instances[1].adversarial_answer == "assert f('ab') == 'ab'");
  for (const auto& adv : result.instances) {
    CHECK(ends_with_trigger(adv));
    CHECK(adv.provenance == Provenance::llm_generated);
    CHECK(adv.prompt.find("[PYTHON]") != std::string::npos);
    CHECK(adv.prompt.find("== ??") != std::string::npos);
  }
  CHECK(result.instances[0].gold_answer == "assert f(1) == 2");
  CHECK(result.instances[1].gold_answer == "assert f('ab') == 'ba'");
}

TEST_CASE("adversarial answers that pass their assertion are rejected") {
  ModelClient client(crux_happy_script());
  // everything passes, including the would-be adversarial assertions
  FakeExecutor executor({}, ExecStatus::pass);
  auto templates = TemplateSet::load(kTemplates + "/cruxeval", kCruxTemplates);
  auto result =
      build_situational_crux(crux_fixture(), client, executor, templates, {});
  CHECK(result.instances.empty());
  REQUIRE(result.skipped.size() == 2);
  CHECK(result.skipped[0].reason == "adversarial answer passes the test case");
}

TEST_CASE("correct CoTs that fail verification are skipped") {
  ModelClient client(crux_happy_script());
  FakeExecutor executor({}, ExecStatus::fail);  // nothing passes
  auto templates = TemplateSet::load(kTemplates + "/cruxeval", kCruxTemplates);
  auto result =
      build_situational_crux(crux_fixture(), client, executor, templates, {});
  CHECK(result.instances.empty());
  CHECK(result.skipped[0].reason == "correct CoT assertion does not pass");
}

TEST_CASE("a judge rejection filters the instance") {
  // specific yes-judge rule first, then the regular pipeline rules
  ScriptedModel merged;
  merged.add_rule({"Answer yes or no. Does the candidate reasoning", "yes", "stop",
                   {}, 0});
  merged.add_rule({"Describe in plain English what the following Python function "
                   "does.\n\n[PYTHON]\ndef f(x):\n    return x + 1",
                   "It increments its argument by one.", "stop", {}, 0});
  merged.add_rule({"then give a passing assertion between [ANSWER] and [/ANSWER] "
                   "tags.\n\n[PYTHON]\ndef f(x):\n    return x + 1",
                   "f(1) computes 1 + 1 = 2.\n[ANSWER]assert f(1) == 2[/ANSWER]",
                   "stop", {}, 0});
  merged.add_rule({"Propose a plausible but wrong completion",
                   "[ANSWER]assert f(1) == 3[/ANSWER]", "stop", {}, 0});
  merged.add_rule({"Rewrite the reasoning below",
                   "f(1) adds the list length, giving 3.", "stop", {}, 0});
  ModelClient client(std::make_shared<ScriptedModel>(merged));
  FakeExecutor executor({{"assert f(1) == 2", ExecStatus::pass}}, ExecStatus::fail);
  auto templates = TemplateSet::load(kTemplates + "/cruxeval", kCruxTemplates);
  auto fixture = crux_fixture();
  fixture.resize(1);
  auto result = build_situational_crux(fixture, client, executor, templates, {});
  CHECK(result.instances.empty());
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].reason == "judge rejected the adversarial CoT");
}

TEST_CASE("bbh branches on helper correctness") {
  TaskInstance q1;
  q1.id = "q1";
  q1.kind = TaskKind::bbh;
  q1.question = "Q: How many objects are on the desk?";
  q1.gold_answer = "10";
  q1.fewshot_prefix = "Q: warm-up?\nA: Let's think step by step.\nSo the answer is 1.";
  TaskInstance q2 = q1;
  q2.id = "q2";
  q2.question = "Q: What color is the cup?";
  q2.gold_answer = "blue";

  ScriptedModel model;
  // helper run: wrong on q1, right on q2
  model.add_rule({"How many objects are on the desk?\n\nA: Let's think step by step.",
                  "Count them all: nine in total. So the answer is 9.", "stop", {}, 0});
  model.add_rule({"What color is the cup?\n\nA: Let's think step by step.",
                  "The cup is clearly blue. So the answer is blue.", "stop", {}, 0});
  // instructed branch for q2
  model.add_rule({"Pick one plausible but incorrect answer", "red", "stop", {}, 0});
  model.add_rule({"Write a short chain of reasoning that concludes",
                  "The cup reflects the tablecloth. So the answer is red.", "stop",
                  {}, 0});
  ModelClient client(std::make_shared<ScriptedModel>(model));
  auto templates = TemplateSet::load(kTemplates + "/bbh", kBbhTemplates);
  auto result = build_situational_bbh({q1, q2}, client, templates, {});
  REQUIRE(result.instances.size() == 2);

  // q1 keeps the helper's wrong CoT verbatim
  CHECK(result.instances[0].base_id == "q1");
  CHECK(result.instances[0].adversarial_cot ==
        "Count them all: nine in total. So the answer is 9.");
  CHECK(result.instances[0].adversarial_answer == "9");
  // q2 goes through the instructed incorrect-CoT branch
  CHECK(result.instances[1].base_id == "q2");
  CHECK(result.instances[1].adversarial_answer == "red");
  CHECK(result.instances[1].adversarial_cot ==
        "The cup reflects the tablecloth. So the answer is red.");
  for (const auto& adv : result.instances) {
    CHECK(ends_with_trigger(adv));
    CHECK(adv.prompt.find(*q1.fewshot_prefix) != std::string::npos);
  }
  CHECK(result.instances[0].gold_answer == "10");
  CHECK(result.instances[1].gold_answer == "blue");
}

TEST_CASE("an empty bbh dataset is a no-op") {
  ModelClient client(std::make_shared<ScriptedModel>());
  auto templates = TemplateSet::load(kTemplates + "/bbh", kBbhTemplates);
  CHECK(build_situational_bbh({}, client, templates, {}).instances.empty());
}

namespace {

SelfReflectionSource source_of(
    const std::map<std::string, std::vector<std::string>>& wrong_sets) {
  SelfReflectionSource source;
  source.checkpoint_family = "toy";
  for (const auto& [checkpoint, ids] : wrong_sets) {
    for (const auto& id : ids)
      source.per_checkpoint_wrong[checkpoint][id] = {"wrong reasoning for " + id,
                                                     "0"};
  }
  return source;
}

std::vector<TaskInstance> base_for(const std::vector<std::string>& ids) {
  std::vector<TaskInstance> base;
  for (const auto& id : ids) {
    TaskInstance t;
    t.id = id;
    t.kind = TaskKind::gsm8k;
    t.question = "question " + id;
    t.gold_answer = "7";
    base.push_back(std::move(t));
  }
  return base;
}

}  // namespace

TEST_CASE("self-reflection keeps the intersection of wrong sets") {
  auto source = source_of({{"ck1", {"A", "B"}}, {"ck2", {"B", "C"}}, {"ck3", {"B"}}});
  CHECK(wrong_id_intersection(source) == std::set<std::string>{"B"});

  auto build = build_self_reflection(source, base_for({"A", "B", "C"}), {});
  CHECK(build.ids == std::set<std::string>{"B"});
  REQUIRE(build.per_checkpoint.size() == 3);
  for (const auto& [checkpoint, instances] : build.per_checkpoint) {
    REQUIRE(instances.size() == 1);
    CHECK(instances[0].base_id == "B");
    CHECK(instances[0].provenance == Provenance::self_generated);
    CHECK(instances[0].adversarial_cot == "wrong reasoning for B");
    CHECK(ends_with_trigger(instances[0]));
    CHECK(instances[0].gold_answer == "7");
  }
}

TEST_CASE("a single checkpoint keeps its full wrong set") {
  auto source = source_of({{"only", {"A", "B", "C"}}});
  auto build = build_self_reflection(source, base_for({"A", "B", "C"}), {});
  CHECK(build.ids == std::set<std::string>{"A", "B", "C"});
  CHECK(build.per_checkpoint.at("only").size() == 3);
}

TEST_CASE("an empty intersection is a valid empty dataset") {
  auto source = source_of({{"ck1", {"A"}}, {"ck2", {"B"}}});
  auto build = build_self_reflection(source, base_for({"A", "B"}), {});
  CHECK(build.ids.empty());
  CHECK(build.per_checkpoint.at("ck1").empty());
}

TEST_CASE("randomized wrong sets always intersect to a subset of each") {
  SplitMix64 rng(31337);
  std::vector<std::string> universe;
  for (int i = 0; i < 12; ++i) universe.push_back("i" + std::to_string(i));
  for (int trial = 0; trial < 300; ++trial) {
    std::map<std::string, std::vector<std::string>> sets;
    std::size_t n_checkpoints = 1 + rng.below(4);
    for (std::size_t c = 0; c < n_checkpoints; ++c) {
      std::vector<std::string> wrong;
      for (const auto& id : universe)
        if (rng.below(2)) wrong.push_back(id);
      if (wrong.empty()) wrong.push_back(universe[rng.below(universe.size())]);
      sets["ck" + std::to_string(c)] = wrong;
    }
    auto source = source_of(sets);
    auto ids = wrong_id_intersection(source);
    for (const auto& [checkpoint, wrong] : sets) {
      std::set<std::string> wrong_set(wrong.begin(), wrong.end());
      for (const auto& id : ids) CHECK(wrong_set.count(id) == 1);
    }
  }
}

TEST_CASE("template digests cover content changes") {
  auto a = TemplateSet::load(kTemplates + "/bbh", kBbhTemplates);
  auto b = TemplateSet::load(kTemplates + "/cruxeval", kCruxTemplates);
  CHECK(a.digest() != b.digest());
  CHECK(a.digest() == TemplateSet::load(kTemplates + "/bbh", kBbhTemplates).digest());
  CHECK(a.render("choose_incorrect", {{"question", "Q?"}, {"gold", "G"}})
            .find("Q: Q?") != std::string::npos);
  CHECK_THROWS_AS(a.raw("nope"), PipelineError);
}
