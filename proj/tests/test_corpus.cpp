#include <unistd.h>

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "reflect/corpus.hpp"
#include "reflect/textutil.hpp"

using namespace reflect;

namespace {

const std::string kFixtures = REFLECT_FIXTURE_DIR;

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("reflect_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

AdversarialInstance sample_adv(const std::string& id) {
  AdversarialInstance a;
  a.base_id = id;
  a.kind = TaskKind::gsm8k;
  a.attack = "end_arith";
  a.question = "How many?";
  a.adversarial_cot = "a <<2+2=5>>5";
  a.adversarial_answer = "5";
  a.trigger = "Wait,";
  a.gold_answer = "4";
  a.prompt = "How many?\n\na <<2+2=5>>5\n\nWait,";
  a.provenance = Provenance::programmatic;
  return a;
}

}  // namespace

TEST_CASE("loading an empty file yields an empty list") {
  TempDir dir;
  write_file(dir.file("empty.jsonl"), "");
  CHECK(load_dataset(dir.file("empty.jsonl"), TaskKind::gsm8k).empty());
}

TEST_CASE("loading a one-line fixture maps fields directly") {
  TempDir dir;
  write_file(dir.file("one.jsonl"),
             R"({"id":"q1","kind":"gsm8k","question":"2+2?","gold_answer":"42"})"
             "\n");
  auto instances = load_dataset(dir.file("one.jsonl"), TaskKind::gsm8k);
  REQUIRE(instances.size() == 1);
  CHECK(instances[0].id == "q1");
  CHECK(instances[0].question == "2+2?");
  CHECK(instances[0].gold_answer == "42");
  CHECK(!instances[0].correct_cot);
}

TEST_CASE("duplicate ids are rejected with the line number") {
  TempDir dir;
  write_file(dir.file("dup.jsonl"),
             R"({"id":"q1","kind":"gsm8k","question":"a","gold_answer":"1"})"
             "\n"
             R"({"id":"q1","kind":"gsm8k","question":"b","gold_answer":"2"})"
             "\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir.file("dup.jsonl"), TaskKind::gsm8k),
                       doctest::Contains("duplicate id q1"), CorpusError);
}

TEST_CASE("malformed lines name their line number") {
  TempDir dir;
  write_file(dir.file("bad.jsonl"),
             R"({"id":"q1","kind":"gsm8k","question":"a","gold_answer":"1"})"
             "\nnot json\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir.file("bad.jsonl"), TaskKind::gsm8k),
                       doctest::Contains(":2:"), CorpusError);
  CHECK_THROWS_AS(load_dataset(dir.file("missing.jsonl"), TaskKind::gsm8k),
                  CorpusError);
}

TEST_CASE("write then load round-trips all fields") {
  TempDir dir;
  std::vector<AdversarialInstance> instances = {sample_adv("a"), sample_adv("b"),
                                                sample_adv("c")};
  instances[1].attack.reset();
  instances[2].adversarial_answer = "7";
  auto manifest = write_dataset(instances, dir.file("adv.jsonl"), "unit", 7, "digest");
  CHECK(manifest.instance_count == 3);
  CHECK(manifest.kind == TaskKind::gsm8k);
  CHECK(manifest.setting == Setting::situational);

  auto loaded = load_adversarial(dir.file("adv.jsonl"));
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].base_id == instances[i].base_id);
    CHECK(loaded[i].kind == instances[i].kind);
    CHECK(loaded[i].attack == instances[i].attack);
    CHECK(loaded[i].question == instances[i].question);
    CHECK(loaded[i].adversarial_cot == instances[i].adversarial_cot);
    CHECK(loaded[i].adversarial_answer == instances[i].adversarial_answer);
    CHECK(loaded[i].trigger == instances[i].trigger);
    CHECK(loaded[i].gold_answer == instances[i].gold_answer);
    CHECK(loaded[i].prompt == instances[i].prompt);
    CHECK(loaded[i].provenance == instances[i].provenance);
  }

  auto reloaded_manifest = load_manifest(manifest_path_for(dir.file("adv.jsonl")));
  CHECK(reloaded_manifest.instance_count == 3);
  CHECK(reloaded_manifest.seed == 7);
  CHECK(reloaded_manifest.config_digest == "digest");
}

TEST_CASE("writing twice is byte-identical") {
  TempDir dir;
  std::vector<AdversarialInstance> instances = {sample_adv("a"), sample_adv("b")};
  write_dataset(instances, dir.file("one.jsonl"), "unit", 7, "digest");
  write_dataset(instances, dir.file("two.jsonl"), "unit", 7, "digest");
  CHECK(read_file(dir.file("one.jsonl")) == read_file(dir.file("two.jsonl")));
  CHECK(read_file(manifest_path_for(dir.file("one.jsonl"))) ==
        read_file(manifest_path_for(dir.file("two.jsonl"))));
}

TEST_CASE("an empty dataset writes an empty file and a zero-count manifest") {
  TempDir dir;
  auto manifest = write_dataset({}, dir.file("empty.jsonl"), "unit", 0, "digest");
  CHECK(manifest.instance_count == 0);
  CHECK(read_file(dir.file("empty.jsonl")).empty());
}

TEST_CASE("mixed kinds are rejected") {
  TempDir dir;
  auto a = sample_adv("a");
  auto b = sample_adv("b");
  b.kind = TaskKind::bbh;
  CHECK_THROWS_WITH_AS(write_dataset({a, b}, dir.file("mixed.jsonl"), "u", 0, "d"),
                       doctest::Contains("mixed kinds"), CorpusError);
}

TEST_CASE("unwritable paths are reported") {
  CHECK_THROWS(write_dataset({sample_adv("a")},
                             "/nonexistent-dir-xyz/adv.jsonl", "u", 0, "d"));
}

TEST_CASE("task instance validation lists each violation") {
  TaskInstance ok;
  ok.id = "q1";
  ok.kind = TaskKind::gsm8k;
  ok.question = "?";
  ok.gold_answer = "42";
  CHECK(validate_instance(ok).empty());

  TaskInstance trivia = ok;
  trivia.kind = TaskKind::triviaqa;
  CHECK(validate_instance(trivia).size() == 1);
  trivia.context_docs.push_back({"d1", "some passage"});
  CHECK(validate_instance(trivia).empty());

  TaskInstance no_gold = ok;
  no_gold.gold_answer.clear();
  CHECK(validate_instance(no_gold).size() == 1);
}

TEST_CASE("adversarial validation enforces the trigger suffix and gold filter") {
  auto good = sample_adv("a");
  CHECK(validate_instance(good).empty());

  auto bad_prompt = good;
  bad_prompt.prompt = "prompt without the cue";
  CHECK(validate_instance(bad_prompt).size() == 1);

  auto equal_gold = good;
  equal_gold.adversarial_answer = equal_gold.gold_answer;
  CHECK(validate_instance(equal_gold).size() == 1);
}

TEST_CASE("randomized instances survive a write-load round trip") {
  TempDir dir;
  SplitMix64 rng(404);
  auto random_text = [&](std::size_t max_len) {
    std::string out;
    std::size_t len = rng.below(max_len);
    for (std::size_t i = 0; i < len; ++i) {
      switch (rng.below(6)) {
        case 0:
          out += '\n';
          break;
        case 1:
          out += "\xc3\xa9";  // é
          break;
        case 2:
          out += '"';
          break;
        default:
          out += static_cast<char>('a' + rng.below(26));
      }
    }
    return out;
  };
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<AdversarialInstance> instances;
    std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      AdversarialInstance a = sample_adv("id" + std::to_string(i));
      a.question = random_text(40);
      a.adversarial_cot = random_text(80);
      a.adversarial_answer = "5" + random_text(6);
      a.gold_answer = "4";
      a.attack = rng.below(2) ? std::optional<std::string>("mid_omit") : std::nullopt;
      a.prompt = a.question + "\n\n" + a.adversarial_cot + "\n\n" + a.trigger;
      instances.push_back(std::move(a));
    }
    write_dataset(instances, dir.file("rt.jsonl"), "rt", 0, "d");
    auto loaded = load_adversarial(dir.file("rt.jsonl"));
    REQUIRE(loaded.size() == instances.size());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(loaded[i].question == instances[i].question);
      CHECK(loaded[i].adversarial_cot == instances[i].adversarial_cot);
      CHECK(loaded[i].adversarial_answer == instances[i].adversarial_answer);
      CHECK(loaded[i].attack == instances[i].attack);
      CHECK(loaded[i].prompt == instances[i].prompt);
    }
  }
}

TEST_CASE("writing an instance that breaks an invariant is rejected") {
  TempDir dir;
  auto bad = sample_adv("a");
  bad.prompt = "prompt missing the cue";
  CHECK_THROWS_AS(write_dataset({bad}, dir.file("bad.jsonl"), "u", 0, "d"),
                  CorpusError);
}

TEST_CASE("the bundled base corpus loads cleanly") {
  auto dataset = load_dataset(kFixtures + "/gsm8k_base.jsonl", TaskKind::gsm8k);
  CHECK(dataset.size() == 20);
  for (const auto& t : dataset) {
    CHECK(validate_instance(t).empty());
    CHECK(t.correct_cot.has_value());
  }
}
