#include "reflect/scoring.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "reflect/decimal.hpp"
#include "reflect/textutil.hpp"

namespace reflect {

using json = nlohmann::ordered_json;

Rational Rational::of(long long num, long long den) {
  if (den == 0) throw ScoringError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long long g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  Rational r;
  r.num = num;
  r.den = den;
  return r;
}

Rational Rational::operator+(const Rational& rhs) const {
  return of(num * rhs.den + rhs.num * den, den * rhs.den);
}

bool Rational::operator==(const Rational& rhs) const {
  return num == rhs.num && den == rhs.den;
}

bool Rational::operator<=(const Rational& rhs) const {
  return num * rhs.den <= rhs.num * den;
}

double Rational::to_double() const {
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Rational::str() const {
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational MetricsReport::accuracy() const {
  return Rational::of(counts.correct_explicit + counts.correct_implicit, n);
}
Rational MetricsReport::explicit_rate() const {
  return Rational::of(counts.correct_explicit + counts.incorrect_explicit, n);
}
Rational MetricsReport::explicit_accuracy() const {
  return Rational::of(counts.correct_explicit, n);
}
Rational MetricsReport::implicit_accuracy() const {
  return Rational::of(counts.correct_implicit, n);
}

namespace {

// scans for number tokens like 1,234.56 with optional leading - or $
std::vector<std::string> number_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    bool negative = false;
    if (begin > 0 && text[begin - 1] == '-') {
      // a minus bound to the number, not an infix operator: "x -5" yes, "3-5" no
      std::size_t before = begin - 1;
      if (before == 0 || !std::isdigit(static_cast<unsigned char>(text[before - 1])))
        negative = true;
    }
    std::size_t end = i;
    while (end < text.size()) {
      char c = text[end];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++end;
      } else if ((c == ',' || c == '.') && end + 1 < text.size() &&
                 std::isdigit(static_cast<unsigned char>(text[end + 1]))) {
        ++end;
      } else {
        break;
      }
    }
    std::string token = text.substr(begin, end - begin);
    if (negative) token.insert(token.begin(), '-');
    out.push_back(token);
    i = end;
  }
  return out;
}

std::optional<std::string> extract_gsm(const std::string& response) {
  auto tokens = number_tokens(response);
  if (tokens.empty()) return std::nullopt;
  auto d = Decimal::parse(tokens.back());
  if (!d) return std::nullopt;
  return d->str();
}

std::optional<std::string> extract_crux(const std::string& response) {
  std::size_t open = response.find("[ANSWER]");
  if (open == std::string::npos) return std::nullopt;
  std::size_t close = response.find("[/ANSWER]", open + 8);
  if (close == std::string::npos) return std::nullopt;
  std::string inner = trim(response.substr(open + 8, close - open - 8));
  if (inner.empty()) return std::nullopt;
  return inner;
}

std::optional<std::string> extract_bbh(const std::string& response,
                                       const std::string& pattern) {
  try {
    std::regex re(pattern, std::regex::icase);
    std::smatch m;
    if (std::regex_search(response, m, re) && m.size() > 1) {
      std::string captured = trim(m[1].str());
      while (!captured.empty() &&
             (captured.back() == ',' || captured.back() == ';' || captured.back() == ':'))
        captured.pop_back();
      if (!captured.empty()) return captured;
    }
  } catch (const std::regex_error&) {
    // bad user pattern: treat as no match rather than failing the run
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_answer(TaskKind kind, const std::string& response) {
  switch (kind) {
    case TaskKind::gsm8k:
    case TaskKind::gsm8k_platinum:
      return extract_gsm(response);
    case TaskKind::cruxeval_i:
    case TaskKind::cruxeval_o:
      return extract_crux(response);
    case TaskKind::bbh:
      return extract_bbh(response, ScoringConfig{}.bbh_answer_pattern);
    case TaskKind::triviaqa: {
      if (trim(response).empty()) return std::nullopt;
      return response;
    }
  }
  return std::nullopt;
}

bool gsm_answers_equal(const std::string& a, const std::string& b) {
  auto da = Decimal::parse(normalize_answer(a));
  auto db = Decimal::parse(normalize_answer(b));
  if (da && db) return Decimal::same_answer(*da, *db);
  return normalize_answer(a) == normalize_answer(b);
}

EvalRecord score_instance(const AdversarialInstance& instance,
                          const std::string& response, CodeExecutor* executor,
                          const ScoringConfig& config) {
  EvalRecord record;
  record.base_id = instance.base_id;
  record.response = response;
  record.word_count = word_count(response);

  std::optional<std::string> extracted;
  switch (instance.kind) {
    case TaskKind::gsm8k:
    case TaskKind::gsm8k_platinum:
      extracted = extract_gsm(response);
      record.correct = extracted && gsm_answers_equal(*extracted, instance.gold_answer);
      break;
    case TaskKind::bbh:
      extracted = extract_bbh(response, config.bbh_answer_pattern);
      record.correct =
          extracted && normalize_text(*extracted) == normalize_text(instance.gold_answer);
      break;
    case TaskKind::triviaqa:
      extracted = trim(response).empty() ? std::nullopt
                                         : std::optional<std::string>(response);
      record.correct = extracted && contains_normalized(response, instance.gold_answer);
      break;
    case TaskKind::cruxeval_i:
    case TaskKind::cruxeval_o: {
      extracted = extract_crux(response);
      if (extracted) {
        if (!executor)
          throw ScoringError("cruxeval scoring needs a code executor");
        ExecResult r = executor->run(instance.question + "\n" + *extracted);
        if (r.status == ExecStatus::error)
          throw ScoringError("executor failed on instance " + instance.base_id);
        record.correct = r.status == ExecStatus::pass;
      }
      break;
    }
  }
  record.extracted = std::move(extracted);
  if (!record.extracted) record.correct = false;
  return record;
}

std::vector<std::string> default_reflection_cues() {
  return {
      // error admissions
      "i made a mistake",
      "i got it wrong",
      "that's not right",
      "i was wrong",
      "is incorrect",
      "i forgot",
      "we forgot",
      // prior-claim contradictions
      "i thought it was",
      "i thought that",
      "is not the answer",
      "is not correct",
      "is not a valid",
      "is not a whole number",
      "is not a multiple",
      // re-examination
      "let's check our work",
      "what did i do wrong",
      "i am not sure",
  };
}

std::vector<std::string> load_cues(const std::string& path) {
  std::vector<std::string> cues;
  for (const auto& line : read_lines(path)) {
    std::string t = trim(line);
    if (!t.empty() && t[0] != '#') cues.push_back(t);
  }
  if (cues.empty()) throw ScoringError("cue list is empty: " + path);
  return cues;
}

namespace {

bool judge_verdict(const std::string& text, bool* verdict) {
  std::string t = lowercase(text);
  std::size_t yes = t.find("yes");
  std::size_t no = t.find("no");
  if (yes == std::string::npos && no == std::string::npos) return false;
  *verdict = yes != std::string::npos && (no == std::string::npos || yes < no);
  return true;
}

}  // namespace

bool classify_explicit(const std::string& response, ClassifierMode mode,
                       const ModelClient* client, const std::vector<std::string>& cues,
                       const std::string& judge_template) {
  if (mode == ClassifierMode::lexical) {
    std::string normalized = normalize_for_cues(response);
    for (const auto& cue : cues) {
      if (normalized.find(normalize_for_cues(cue)) != std::string::npos) return true;
    }
    return false;
  }

  if (!client) throw ScoringError("judge mode needs a completion client");
  std::string prompt = judge_template;
  std::size_t at = prompt.find("{response}");
  if (at == std::string::npos)
    throw ScoringError("judge template lacks a {response} placeholder");
  prompt = prompt.substr(0, at) + response + prompt.substr(at + 10);

  CompletionRequest request;
  request.prompt = prompt;
  request.max_new_tokens = 8;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Completion c = client->complete(request);
    bool verdict = false;
    if (judge_verdict(c.text, &verdict)) return verdict;
    request.prompt = prompt + "\n\nAnswer strictly yes or no.";
  }
  throw ScoringError("judge verdict unparseable after reprompt");
}

MetricsReport compute_metrics(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ScoringError("no records to aggregate");
  const std::string& checkpoint = records.front().checkpoint;
  MetricsReport report;
  for (const auto& r : records) {
    if (r.checkpoint != checkpoint)
      throw ScoringError("records mix checkpoints: " + checkpoint + " vs " +
                         r.checkpoint);
    if (!r.extracted && r.correct)
      throw ScoringError("record " + r.base_id + " is correct without an extraction");
    if (r.correct) {
      ++(r.explicit_reflection ? report.counts.correct_explicit
                               : report.counts.correct_implicit);
    } else {
      ++(r.explicit_reflection ? report.counts.incorrect_explicit
                               : report.counts.incorrect_implicit);
    }
  }
  report.n = report.counts.total();
  return report;
}

ClassifierScore validate_classifier(
    const std::vector<std::pair<std::string, bool>>& predictions,
    const GoldLabelSet& gold) {
  std::map<std::string, bool> gold_by_id;
  for (const auto& [id, label] : gold.labels) {
    if (!gold_by_id.emplace(id, label).second)
      throw ScoringError("duplicate gold label id: " + id);
  }
  std::set<std::string> seen;
  std::vector<std::string> missing;
  ClassifierScore score;
  for (const auto& [id, predicted] : predictions) {
    auto it = gold_by_id.find(id);
    if (it == gold_by_id.end()) {
      missing.push_back(id);
      continue;
    }
    seen.insert(id);
    bool actual = it->second;
    if (predicted && actual)
      ++score.tp;
    else if (predicted && !actual)
      ++score.fp;
    else if (!predicted && actual)
      ++score.fn;
    else
      ++score.tn;
  }
  for (const auto& [id, label] : gold.labels)
    if (!seen.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "prediction/gold id mismatch:";
    for (const auto& id : missing) msg += " " + id;
    throw ScoringError(msg);
  }
  if (score.tp + score.fp > 0)
    score.precision = Rational::of(score.tp, score.tp + score.fp);
  if (score.tp + score.fn > 0) score.recall = Rational::of(score.tp, score.tp + score.fn);
  if (score.precision && score.recall && (score.precision->num || score.recall->num)) {
    // f1 = 2pr / (p + r)
    long long pn = score.precision->num, pd = score.precision->den;
    long long rn = score.recall->num, rd = score.recall->den;
    score.f1 = Rational::of(2 * pn * rn, pn * rd + rn * pd);
  }
  return score;
}

std::vector<EvalRecord> load_records(const std::string& path) {
  std::vector<EvalRecord> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ScoringError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    EvalRecord r;
    r.base_id = j.at("base_id").get<std::string>();
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.response = j.at("response").get<std::string>();
    if (j.contains("extracted") && !j["extracted"].is_null())
      r.extracted = j["extracted"].get<std::string>();
    r.correct = j.at("correct").get<bool>();
    r.explicit_reflection = j.at("explicit").get<bool>();
    r.word_count = j.at("word_count").get<std::size_t>();
    r.repeat = j.value("repeat", 0);
    r.round = j.value("round", 0);
    r.cumulative_words = j.value("cum_words", r.word_count);
    out.push_back(std::move(r));
  }
  return out;
}

void write_records(const std::vector<EvalRecord>& records, const std::string& path) {
  std::ostringstream body;
  for (const auto& r : records) {
    json j;
    j["base_id"] = r.base_id;
    j["checkpoint"] = r.checkpoint;
    j["response"] = r.response;
    if (r.extracted)
      j["extracted"] = *r.extracted;
    else
      j["extracted"] = nullptr;
    j["correct"] = r.correct;
    j["explicit"] = r.explicit_reflection;
    j["word_count"] = r.word_count;
    j["repeat"] = r.repeat;
    j["round"] = r.round;
    j["cum_words"] = r.cumulative_words;
    body << j.dump() << "\n";
  }
  write_file(path, body.str());
}

}  // namespace reflect
