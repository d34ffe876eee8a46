#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reflect {

struct CompletionRequest {
  std::string prompt;
  int max_new_tokens = 512;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences;
  bool want_logprobs = false;
  bool echo_prompt_logprobs = false;
  std::optional<std::int64_t> seed;  // per-repeat seed for stochastic decoding
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct Completion {
  std::string text;
  std::string finish_reason = "stop";  // stop | length | error
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  std::size_t word_count = 0;
};

struct CheckpointMeta {
  std::string name;
  std::int64_t n_params = 0;   // parameter count
  std::int64_t t_tokens = 0;   // training tokens
  std::string family;
  std::string endpoint;  // http(s)://... or mock:<script path>
};

std::vector<CheckpointMeta> load_checkpoints(const std::string& path);

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BatchFailure {
  std::vector<std::size_t> failed_indices;               // 0-based
  std::vector<std::optional<Completion>> partial;        // successes preserved
  std::vector<std::string> errors;                       // aligned with indices
};

class BatchError : public std::runtime_error {
 public:
  BatchError(std::string message, BatchFailure failure)
      : std::runtime_error(std::move(message)), failure(std::move(failure)) {}
  BatchFailure failure;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

// Deterministic offline stand-in: ordered substring rules, first match wins.
struct ScriptedRule {
  std::string match;  // substring of the prompt; empty matches everything
  std::string completion;
  std::string finish_reason = "stop";
  std::optional<std::vector<TokenLogprob>> logprobs;  // echoed prompt tokens
  int delay_ms = 0;
  bool transport_error = false;  // simulate an unreachable endpoint
};

class ScriptedModel : public CompletionBackend {
 public:
  ScriptedModel() = default;
  explicit ScriptedModel(std::vector<ScriptedRule> rules) : rules_(std::move(rules)) {}
  static ScriptedModel load(const std::string& path);  // JSONL, one rule per line

  Completion complete(const CompletionRequest& request) override;
  void add_rule(ScriptedRule rule) { rules_.push_back(std::move(rule)); }

 private:
  std::vector<ScriptedRule> rules_;
};

struct RetryPolicy {
  int max_retries = 3;
  int base_ms = 100;  // exponential backoff: base_ms * 2^attempt
};

struct SequenceLogprob {
  double total = 0.0;
  std::size_t token_count = 0;
};

// Uniform front door: transport retries, bounded-concurrency batching, and
// continuation logprob accounting over any backend.
class ModelClient {
 public:
  ModelClient(const CheckpointMeta& meta, RetryPolicy retry = {});
  ModelClient(std::shared_ptr<CompletionBackend> backend, RetryPolicy retry = {});

  // Retries transient transport failures with exponential backoff; a
  // well-formed error response is surfaced immediately as ProtocolError.
  Completion complete(const CompletionRequest& request) const;

  // Input order preserved regardless of completion order; at most
  // max_in_flight requests outstanding. Throws BatchError naming failed
  // indices; completed responses ride along in the failure payload.
  std::vector<Completion> batch_complete(const std::vector<CompletionRequest>& requests,
                                         int max_in_flight) const;

  // Sum of token logprobs attributed to the continuation (tokens starting at
  // or after the prefix boundary), plus the token count for normalization.
  SequenceLogprob sequence_logprob(const std::string& prefix,
                                   const std::string& continuation) const;

  std::uint64_t total_retries() const { return retries_.load(); }

 private:
  std::shared_ptr<CompletionBackend> backend_;
  RetryPolicy retry_;
  mutable std::atomic<std::uint64_t> retries_{0};
};

// Builds the backend for an endpoint URL: "mock:<path>" loads a ScriptedModel,
// anything else speaks the open completion API over HTTP.
std::shared_ptr<CompletionBackend> make_backend(const std::string& endpoint,
                                                const std::string& api_path = "/v1/completions");

}  // namespace reflect
