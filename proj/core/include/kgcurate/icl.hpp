#pragma once

// Few-shot prompting: prompt construction, a chat-completions client, verdict
// parsing and repeated, resumable runs with agreement scoring.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcurate/metrics.hpp"
#include "kgcurate/taskgen.hpp"

namespace kgc {

enum class PromptVariant { Base, DontKnow, Shuffled };

std::string_view to_string(PromptVariant v);
PromptVariant parse_variant(std::string_view text);

inline constexpr std::string_view kTaskLine = "Your task is to classify triples as True or False.";
inline constexpr std::string_view kDontKnowSentence = "If you do not know the answer, state 'I don't know'.";

struct PromptSpec {
  PromptVariant variant = PromptVariant::Base;
  std::vector<LabeledTriple> examples;  // 3 positives then 3 negatives
  Triple query;
  std::uint64_t seed = 0;  // ordering for Shuffled
};

/// "(subject name, relation_id, object name)"
std::string render_triple(const KnowledgeGraph& kg, const Triple& t);

/// Throws Error(InvalidArgument) if the examples are not 3 + 3 distinct
/// triples or include the query.
std::string build_prompt(const KnowledgeGraph& kg, const PromptSpec& spec);

/// Seeded draw of 3 positive and 3 negative examples from `source`, distinct
/// and never equal to `query`.
std::vector<LabeledTriple> select_examples(std::span<const LabeledTriple> source, const Triple& query,
                                           std::uint64_t seed);

struct EndpointConfig {
  std::string url = "http://127.0.0.1:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 16;
  /// Environment variable holding the bearer token; empty sends no credential.
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_retries = 5;
  double backoff_initial_ms = 500.0;
  double backoff_max_ms = 30000.0;
  double timeout_s = 60.0;
  double requests_per_minute = 0.0;  // 0: unlimited
  std::size_t concurrency = 1;
};

struct ChatResponse {
  bool ok = false;
  std::string text;
  int status = 0;
  double latency_ms = 0.0;
  std::size_t retries = 0;
  std::string error;
};

/// JSON request body for one user message.
std::string chat_request_body(const EndpointConfig& config, const std::string& prompt);

/// POSTs prompts to a chat-completions endpoint. Retries 429, 5xx and
/// connection failures with exponential backoff; 401/403 throws Error(Auth).
/// Construction throws Error(Config) if the named credential is unset.
class ChatClient {
 public:
  explicit ChatClient(EndpointConfig config);
  ~ChatClient();
  ChatClient(ChatClient&&) noexcept;
  ChatClient& operator=(ChatClient&&) noexcept;

  ChatResponse send(const std::string& prompt) const;
  const EndpointConfig& config() const { return config_; }

 private:
  struct Limiter;
  EndpointConfig config_;
  std::string token_;
  std::unique_ptr<Limiter> limiter_;
};

using ChatFn = std::function<ChatResponse(const std::string& prompt)>;

/// True/False when exactly one appears as a word (after the last
/// "classification" marker if any); refusals and anything else Unclassified.
Verdict parse_verdict(std::string_view text);

/// True or False on a strict majority of repeats, else Unclassified.
Verdict majority(std::span<const Verdict> row);

struct IclRunOptions {
  PromptVariant variant = PromptVariant::Base;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::string out_dir;                 // empty: nothing persisted, no resume
  std::optional<std::size_t> stop_after;  // stop after this many new cells
  std::size_t concurrency = 1;
  bool two_category_kappa = false;
};

struct MetricSpread {
  double mean = 0.0;
  double sd = 0.0;
};

struct IclRun {
  std::vector<LabeledTriple> pool;
  PromptVariant variant = PromptVariant::Base;
  std::size_t repeats = 0;
  std::vector<std::string> prompts;
  std::vector<std::vector<Verdict>> table;        // pool x repeats
  std::vector<std::vector<std::string>> reasons;  // "transport" for failed cells
  std::vector<std::vector<bool>> filled;
  bool complete = false;
  std::size_t transport_failures = 0;
  EvalReport report;  // majority vote per item, with kappa
  std::vector<EvalReport> per_repeat;
  MetricSpread accuracy, precision, recall, f1;

  std::string verdicts_tsv() const;
  std::string report_json() const;
};

/// Issues |pool| x repeats requests (one prompt per item, examples re-drawn
/// per item from `example_source`), persisting as it goes. An existing
/// responses.jsonl in out_dir is resumed rather than re-asked.
IclRun run_icl(const KnowledgeGraph& kg, std::span<const LabeledTriple> pool,
               std::span<const LabeledTriple> example_source, const ChatFn& chat, const IclRunOptions& options);

enum class MockMode { Constant, Hash, Alternating };

struct MockOptions {
  MockMode mode = MockMode::Constant;
  std::string constant_text = "True";
  std::size_t fail_first = 0;  // answer this many requests with fail_status first
  int fail_status = 429;
  std::string required_token;  // non-empty: 401 unless "Bearer <token>"
};

/// In-process chat-completions stand-in on 127.0.0.1. Hash mode answers
/// True/False from a hash of the last prompt line; Alternating flips per
/// request for the same prompt.
class MockChatServer {
 public:
  explicit MockChatServer(MockOptions options, int port = 0);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  int port() const { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t requests() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace kgc
