#include "reflect/model_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "reflect/textutil.hpp"

namespace reflect {

using json = nlohmann::json;

std::vector<CheckpointMeta> load_checkpoints(const std::string& path) {
  std::vector<CheckpointMeta> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ProtocolError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    CheckpointMeta m;
    m.name = j.at("name").get<std::string>();
    m.n_params = j.at("n_params").get<std::int64_t>();
    m.t_tokens = j.at("t_tokens").get<std::int64_t>();
    m.family = j.value("family", "");
    m.endpoint = j.value("endpoint", "");
    if (m.n_params <= 0 || m.t_tokens <= 0)
      throw ProtocolError(path + ":" + std::to_string(lineno) +
                          ": checkpoint sizes must be positive");
    out.push_back(std::move(m));
  }
  return out;
}

ScriptedModel ScriptedModel::load(const std::string& path) {
  ScriptedModel model;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ProtocolError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ScriptedRule rule;
    rule.match = j.value("match", "");
    rule.completion = j.value("completion", "");
    rule.finish_reason = j.value("finish_reason", "stop");
    rule.delay_ms = j.value("delay_ms", 0);
    rule.transport_error = j.value("transport_error", false);
    if (j.contains("logprobs") && !j["logprobs"].is_null()) {
      std::vector<TokenLogprob> lps;
      for (const auto& entry : j["logprobs"]) {
        lps.push_back({entry.at(0).get<std::string>(), entry.at(1).get<double>()});
      }
      rule.logprobs = std::move(lps);
    }
    model.add_rule(std::move(rule));
  }
  return model;
}

Completion ScriptedModel::complete(const CompletionRequest& request) {
  for (const auto& rule : rules_) {
    if (!rule.match.empty() && request.prompt.find(rule.match) == std::string::npos)
      continue;
    if (rule.delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(rule.delay_ms));
    if (rule.transport_error)
      throw TransportError("scripted transport failure for: " +
                           request.prompt.substr(0, 60));
    Completion c;
    c.text = rule.completion;
    c.finish_reason = rule.finish_reason;
    c.word_count = word_count(c.text);
    if (request.want_logprobs || request.echo_prompt_logprobs) {
      if (!rule.logprobs)
        throw CapabilityError("scripted rule has no logprobs for prompt: " +
                              request.prompt.substr(0, 60));
      c.token_logprobs = rule.logprobs;
    }
    return c;
  }
  // no rule matched: deterministic empty completion
  Completion c;
  c.text = "";
  c.finish_reason = "stop";
  c.word_count = 0;
  if (request.want_logprobs || request.echo_prompt_logprobs)
    throw CapabilityError("scripted model has no logprob rule for this prompt");
  return c;
}

namespace {

class HttpBackend : public CompletionBackend {
 public:
  HttpBackend(std::string base_url, std::string path)
      : base_url_(std::move(base_url)), path_(std::move(path)) {}

  Completion complete(const CompletionRequest& request) override {
    json body;
    body["prompt"] = request.prompt;
    body["max_tokens"] = request.max_new_tokens;
    body["temperature"] = request.temperature;
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    if (request.want_logprobs || request.echo_prompt_logprobs) body["logprobs"] = 0;
    if (request.echo_prompt_logprobs) body["echo"] = true;
    if (request.seed) body["seed"] = *request.seed;

    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    httplib::Headers headers;
    if (const char* key = std::getenv("REFLECT_API_KEY"))
      headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw TransportError("no response from " + base_url_ + path_);
    if (res->status >= 500)
      throw TransportError("server error " + std::to_string(res->status));
    if (res->status >= 400) {
      std::string detail = res->body.substr(0, 200);
      throw ProtocolError("endpoint rejected request (" + std::to_string(res->status) +
                          "): " + detail);
    }
    json j;
    try {
      j = json::parse(res->body);
    } catch (const std::exception& e) {
      throw ProtocolError(std::string("malformed response body: ") + e.what());
    }
    try {
      const json& choice = j.at("choices").at(0);
      Completion c;
      c.text = choice.value("text", "");
      c.finish_reason = choice.value("finish_reason", "stop");
      c.word_count = word_count(c.text);
      if (choice.contains("logprobs") && !choice["logprobs"].is_null()) {
        const json& lp = choice["logprobs"];
        std::vector<TokenLogprob> lps;
        const auto& tokens = lp.at("tokens");
        const auto& values = lp.at("token_logprobs");
        for (std::size_t i = 0; i < tokens.size(); ++i) {
          double v = values[i].is_null() ? 0.0 : values[i].get<double>();
          lps.push_back({tokens[i].get<std::string>(), v});
        }
        c.token_logprobs = std::move(lps);
      }
      return c;
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("unexpected response shape: ") + e.what());
    }
  }

 private:
  std::string base_url_;
  std::string path_;
};

}  // namespace

std::shared_ptr<CompletionBackend> make_backend(const std::string& endpoint,
                                                const std::string& api_path) {
  if (endpoint.rfind("mock:", 0) == 0) {
    return std::make_shared<ScriptedModel>(ScriptedModel::load(endpoint.substr(5)));
  }
  return std::make_shared<HttpBackend>(endpoint, api_path);
}

ModelClient::ModelClient(const CheckpointMeta& meta, RetryPolicy retry)
    : backend_(make_backend(meta.endpoint)), retry_(retry) {}

ModelClient::ModelClient(std::shared_ptr<CompletionBackend> backend, RetryPolicy retry)
    : backend_(std::move(backend)), retry_(retry) {}

Completion ModelClient::complete(const CompletionRequest& request) const {
  int attempt = 0;
  while (true) {
    try {
      return backend_->complete(request);
    } catch (const TransportError&) {
      if (attempt >= retry_.max_retries) throw;
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(retry_.base_ms) << attempt));
      ++attempt;
      ++retries_;
    }
  }
}

std::vector<Completion> ModelClient::batch_complete(
    const std::vector<CompletionRequest>& requests, int max_in_flight) const {
  if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
  std::vector<std::optional<Completion>> results(requests.size());
  std::vector<std::optional<std::string>> errors(requests.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i] = complete(requests[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), requests.size());
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  BatchFailure failure;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (errors[i]) {
      failure.failed_indices.push_back(i);
      failure.errors.push_back(*errors[i]);
    }
  }
  if (!failure.failed_indices.empty()) {
    failure.partial = std::move(results);
    std::string message = "batch failed at index " +
                          std::to_string(failure.failed_indices.front()) + " (" +
                          std::to_string(failure.failed_indices.size()) + " of " +
                          std::to_string(requests.size()) + " requests failed)";
    throw BatchError(message, std::move(failure));
  }

  std::vector<Completion> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

SequenceLogprob ModelClient::sequence_logprob(const std::string& prefix,
                                              const std::string& continuation) const {
  CompletionRequest request;
  request.prompt = prefix + continuation;
  request.max_new_tokens = 1;
  request.want_logprobs = true;
  request.echo_prompt_logprobs = true;
  Completion c = complete(request);
  if (!c.token_logprobs)
    throw CapabilityError("endpoint returned no logprobs for echoed prompt");

  SequenceLogprob out;
  std::size_t offset = 0;
  for (const auto& tl : *c.token_logprobs) {
    if (offset >= prefix.size()) {
      out.total += tl.logprob;
      ++out.token_count;
    }
    offset += tl.token.size();
  }
  return out;
}

}  // namespace reflect
