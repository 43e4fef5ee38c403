#include "kgcurate/icl.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "kgcurate/common.hpp"

namespace kgc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::DontKnow: return "dont_know";
    case PromptVariant::Shuffled: return "shuffled";
    default: return "base";
  }
}

PromptVariant parse_variant(std::string_view text) {
  if (text == "base") return PromptVariant::Base;
  if (text == "dont_know") return PromptVariant::DontKnow;
  if (text == "shuffled") return PromptVariant::Shuffled;
  throw Error(ErrorKind::Config, "unknown prompt variant: " + std::string(text));
}

std::string render_triple(const KnowledgeGraph& kg, const Triple& t) {
  return "(" + kg.entity(t.subject).name + ", " + relation_id(t.relation) + ", " + kg.entity(t.object).name + ")";
}

std::string build_prompt(const KnowledgeGraph& kg, const PromptSpec& spec) {
  if (spec.examples.size() != 6) throw Error(ErrorKind::InvalidArgument, "a prompt needs exactly 6 examples");
  std::set<Triple> seen;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& e = spec.examples[i];
    if (e.label != (i < 3)) throw Error(ErrorKind::InvalidArgument, "examples must be 3 positives then 3 negatives");
    if (e.triple == spec.query) throw Error(ErrorKind::InvalidArgument, "an example equals the query triple");
    if (!seen.insert(e.triple).second) throw Error(ErrorKind::InvalidArgument, "duplicate example triple");
  }
  std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5};
  if (spec.variant == PromptVariant::Shuffled) {
    Rng rng(spec.seed);
    rng.shuffle(order);
  }
  std::string out(kTaskLine);
  if (spec.variant == PromptVariant::DontKnow) {
    out += ' ';
    out += kDontKnowSentence;
  }
  out += '\n';
  for (auto i : order) {
    const auto& e = spec.examples[i];
    out += "<triple>: " + render_triple(kg, e.triple) + "\n";
    out += std::string("<classification>: ") + (e.label ? "True" : "False") + "\n";
  }
  out += "<triple>: " + render_triple(kg, spec.query);
  return out;
}

std::vector<LabeledTriple> select_examples(std::span<const LabeledTriple> source, const Triple& query,
                                           std::uint64_t seed) {
  std::vector<LabeledTriple> pos, neg;
  std::set<Triple> seen;
  for (const auto& item : source) {
    if (item.triple == query || !seen.insert(item.triple).second) continue;
    (item.label ? pos : neg).push_back(item);
  }
  if (pos.size() < 3 || neg.size() < 3)
    throw Error(ErrorKind::InvalidArgument, "example source needs at least 3 positives and 3 negatives");
  Rng rng(seed);
  std::vector<LabeledTriple> out;
  for (auto i : rng.sample_indices(pos.size(), 3)) out.push_back(pos[i]);
  for (auto i : rng.sample_indices(neg.size(), 3)) out.push_back(neg[i]);
  return out;
}

std::string chat_request_body(const EndpointConfig& config, const std::string& prompt) {
  json j;
  j["model"] = config.model;
  j["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  j["temperature"] = config.temperature;
  j["max_tokens"] = config.max_tokens;
  return j.dump();
}

struct ChatClient::Limiter {
  std::mutex mutex;
  std::chrono::steady_clock::time_point next = std::chrono::steady_clock::now();

  void acquire(double rpm) {
    if (rpm <= 0.0) return;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(60.0 / rpm));
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mutex);
      slot = std::max(next, std::chrono::steady_clock::now());
      next = slot + interval;
    }
    std::this_thread::sleep_until(slot);
  }
};

ChatClient::ChatClient(EndpointConfig config) : config_(std::move(config)), limiter_(std::make_unique<Limiter>()) {
  if (!config_.api_key_env.empty()) {
    const char* v = std::getenv(config_.api_key_env.c_str());
    if (v == nullptr || *v == '\0')
      throw Error(ErrorKind::Config, "credential environment variable " + config_.api_key_env + " is not set");
    token_ = v;
  }
}

ChatClient::~ChatClient() = default;
ChatClient::ChatClient(ChatClient&&) noexcept = default;
ChatClient& ChatClient::operator=(ChatClient&&) noexcept = default;

ChatResponse ChatClient::send(const std::string& prompt) const {
  ChatResponse resp;
  const auto body = chat_request_body(config_, prompt);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t attempt = 0;; ++attempt) {
    limiter_->acquire(config_.requests_per_minute);
    httplib::Client cli(config_.url);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post(config_.path, headers, body, "application/json");
    bool retry = false;
    if (!res) {
      resp.status = 0;
      resp.error = "transport: " + httplib::to_string(res.error());
      retry = true;
    } else {
      resp.status = res->status;
      if (res->status == 401 || res->status == 403)
        throw Error(ErrorKind::Auth, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
      if (res->status == 429 || res->status >= 500) {
        resp.error = "transport: HTTP " + std::to_string(res->status);
        retry = true;
      } else if (res->status != 200) {
        resp.error = "HTTP " + std::to_string(res->status);
      } else {
        try {
          const auto j = json::parse(res->body);
          resp.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
          resp.ok = true;
          resp.error.clear();
        } catch (const json::exception& e) {
          resp.error = std::string("malformed response: ") + e.what();
        }
      }
    }
    if (!retry || attempt >= config_.max_retries) break;
    ++resp.retries;
    const double delay = std::min(config_.backoff_max_ms, config_.backoff_initial_ms * std::pow(2.0, attempt));
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
  }
  resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return resp;
}

Verdict parse_verdict(std::string_view text) {
  std::string lower = to_lower_ascii(text);
  if (const auto pos = lower.rfind("classification"); pos != std::string::npos)
    lower = lower.substr(pos + std::string_view("classification").size());
  for (std::string_view refusal : {"i don't know", "i do not know", "i don\xe2\x80\x99t know", "i dont know"})
    if (lower.find(refusal) != std::string::npos) return Verdict::Unclassified;
  bool has_true = false, has_false = false;
  std::size_t i = 0;
  while (i < lower.size()) {
    if (!std::isalnum(static_cast<unsigned char>(lower[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lower.size() && std::isalnum(static_cast<unsigned char>(lower[j]))) ++j;
    const std::string_view word(lower.data() + i, j - i);
    if (word == "true") has_true = true;
    if (word == "false") has_false = true;
    i = j;
  }
  if (has_true == has_false) return Verdict::Unclassified;
  return has_true ? Verdict::True : Verdict::False;
}

Verdict majority(std::span<const Verdict> row) {
  std::size_t t = 0, f = 0, u = 0;
  for (auto v : row) (v == Verdict::True ? t : v == Verdict::False ? f : u)++;
  if (t > f && t > u) return Verdict::True;
  if (f > t && f > u) return Verdict::False;
  return Verdict::Unclassified;
}

namespace {

MetricSpread spread(const std::vector<double>& xs) {
  MetricSpread s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

json triple_json(const Triple& t) { return {{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}}; }

}  // namespace

std::string IclRun::verdicts_tsv() const {
  std::ostringstream out;
  out << "item\tsubject\trelation\tobject\tlabel";
  for (std::size_t r = 0; r < repeats; ++r) out << "\tr" << r + 1;
  out << "\tmajority\n";
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& t = pool[i].triple;
    out << i << '\t' << t.subject << '\t' << relation_id(t.relation) << '\t' << t.object << '\t'
        << (pool[i].label ? 1 : 0);
    for (std::size_t r = 0; r < repeats; ++r) out << '\t' << (filled[i][r] ? to_string(table[i][r]) : "-");
    out << '\t' << to_string(majority(table[i])) << '\n';
  }
  return out.str();
}

std::string IclRun::report_json() const {
  json j;
  j["variant"] = std::string(to_string(variant));
  j["items"] = pool.size();
  j["repeats"] = repeats;
  j["complete"] = complete;
  j["transport_failures"] = transport_failures;
  j["majority"] = json::parse(report.to_json());
  j["per_repeat"] = json::array();
  for (const auto& r : per_repeat) j["per_repeat"].push_back(json::parse(r.to_json()));
  const auto sp = [](const MetricSpread& s) { return json{{"mean", s.mean}, {"sd", s.sd}}; };
  j["repeat_spread"] = {{"accuracy", sp(accuracy)}, {"precision", sp(precision)}, {"recall", sp(recall)}, {"f1", sp(f1)}};
  return j.dump(2) + "\n";
}

IclRun run_icl(const KnowledgeGraph& kg, std::span<const LabeledTriple> pool,
               std::span<const LabeledTriple> example_source, const ChatFn& chat, const IclRunOptions& options) {
  if (options.repeats < 1) throw Error(ErrorKind::InvalidArgument, "repeats must be >= 1");
  IclRun run;
  run.pool.assign(pool.begin(), pool.end());
  run.variant = options.variant;
  run.repeats = options.repeats;
  const std::size_t n = pool.size();
  run.table.assign(n, std::vector<Verdict>(options.repeats, Verdict::Unclassified));
  run.reasons.assign(n, std::vector<std::string>(options.repeats));
  run.filled.assign(n, std::vector<bool>(options.repeats, false));

  for (std::size_t i = 0; i < n; ++i) {
    PromptSpec spec;
    spec.variant = options.variant;
    spec.query = pool[i].triple;
    spec.examples = select_examples(example_source, spec.query, mix_seed(options.seed, i));
    spec.seed = mix_seed(mix_seed(options.seed, "order"), i);
    run.prompts.push_back(build_prompt(kg, spec));
  }

  const bool persist = !options.out_dir.empty();
  const fs::path dir(options.out_dir);
  if (persist) {
    fs::create_directories(dir);
    std::ostringstream prompts;
    for (std::size_t i = 0; i < n; ++i) {
      json j = {{"item", i}, {"query", triple_json(pool[i].triple)}, {"label", pool[i].label}, {"prompt", run.prompts[i]}};
      prompts << j.dump() << '\n';
    }
    write_file((dir / "prompts.jsonl").string(), prompts.str());
    // Resume: cells already answered keep their recorded response.
    std::ifstream in(dir / "responses.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        continue;  // torn final line from an interrupted run
      }
      const auto i = j.value("item", n);
      const auto r = j.value("repeat", options.repeats);
      if (i >= n || r >= options.repeats || j.value("prompt_hash", std::string()) != hex64(fnv1a64(run.prompts[i])))
        continue;
      run.filled[i][r] = true;
      if (j.value("ok", false)) {
        run.table[i][r] = parse_verdict(j.value("text", std::string()));
      } else {
        run.table[i][r] = Verdict::Unclassified;
        run.reasons[i][r] = "transport";
      }
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> todo;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < options.repeats; ++r)
      if (!run.filled[i][r]) todo.emplace_back(i, r);
  const std::size_t limit = options.stop_after ? std::min(*options.stop_after, todo.size()) : todo.size();

  std::ofstream responses;
  if (persist) responses.open(dir / "responses.jsonl", std::ios::app);
  std::mutex write_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  const auto worker = [&] {
    for (;;) {
      const auto k = next.fetch_add(1);
      if (k >= limit) return;
      const auto [i, r] = todo[k];
      ChatResponse resp;
      try {
        resp = chat(run.prompts[i]);
      } catch (...) {
        std::lock_guard lock(write_mutex);
        if (!failure) failure = std::current_exception();
        next = limit;
        return;
      }
      std::lock_guard lock(write_mutex);
      run.filled[i][r] = true;
      if (resp.ok) {
        run.table[i][r] = parse_verdict(resp.text);
      } else {
        run.table[i][r] = Verdict::Unclassified;
        run.reasons[i][r] = "transport";
      }
      if (persist) {
        json j = {{"item", i},          {"repeat", r},           {"prompt_hash", hex64(fnv1a64(run.prompts[i]))},
                  {"ok", resp.ok},      {"text", resp.text},     {"status", resp.status},
                  {"retries", resp.retries}, {"latency_ms", resp.latency_ms}, {"error", resp.error}};
        responses << j.dump() << '\n';
        responses.flush();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, options.concurrency);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool_threads;
    for (std::size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
    for (auto& th : pool_threads) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  run.complete = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < options.repeats; ++r) {
      if (!run.filled[i][r]) run.complete = false;
      if (run.reasons[i][r] == "transport") ++run.transport_failures;
    }
  if (!run.complete || n == 0) return run;

  std::vector<Label> truths(n);
  std::vector<Verdict> heads(n);
  for (std::size_t i = 0; i < n; ++i) {
    truths[i] = pool[i].label ? 1 : 0;
    heads[i] = majority(run.table[i]);
  }
  run.report = verdict_report(heads, truths);
  try {
    run.report.kappa = fleiss_kappa(verdict_counts(run.table, options.two_category_kappa));
  } catch (const Error&) {
    // Too few ratings, or ragged rows after dropping refusals.
  }
  std::vector<double> acc, pre, rec, f1s;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    std::vector<Verdict> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = run.table[i][r];
    run.per_repeat.push_back(verdict_report(col, truths));
    acc.push_back(run.per_repeat.back().accuracy);
    pre.push_back(run.per_repeat.back().precision);
    rec.push_back(run.per_repeat.back().recall);
    f1s.push_back(run.per_repeat.back().f1);
  }
  run.accuracy = spread(acc);
  run.precision = spread(pre);
  run.recall = spread(rec);
  run.f1 = spread(f1s);

  if (persist) {
    write_file((dir / "verdicts.tsv").string(), run.verdicts_tsv());
    write_file((dir / "report.json").string(), run.report_json());
  }
  return run;
}

struct MockChatServer::Impl {
  MockOptions options;
  httplib::Server server;
  std::thread thread;
  std::mutex mutex;
  std::size_t requests = 0;
  std::map<std::uint64_t, std::size_t> seen;
};

MockChatServer::MockChatServer(MockOptions options, int port) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  auto* impl = impl_.get();
  impl->server.Post(".*", [impl](const httplib::Request& req, httplib::Response& res) {
    std::string prompt;
    std::size_t n;
    std::size_t nth = 0;
    {
      std::lock_guard lock(impl->mutex);
      n = impl->requests++;
      if (!impl->options.required_token.empty() &&
          req.get_header_value("Authorization") != "Bearer " + impl->options.required_token) {
        res.status = 401;
        res.set_content(R"({"error":"unauthorized"})", "application/json");
        return;
      }
      if (n < impl->options.fail_first) {
        res.status = impl->options.fail_status;
        res.set_content(R"({"error":"try again"})", "application/json");
        return;
      }
      try {
        prompt = json::parse(req.body).at("messages").back().at("content").get<std::string>();
      } catch (const json::exception&) {
        res.status = 400;
        return;
      }
      nth = impl->seen[fnv1a64(prompt)]++;
    }
    std::string text;
    switch (impl->options.mode) {
      case MockMode::Constant: text = impl->options.constant_text; break;
      case MockMode::Hash: text = (fnv1a64(prompt) & 1) ? "True" : "False"; break;
      case MockMode::Alternating: text = nth % 2 == 0 ? "True" : "False"; break;
    }
    json body = {{"id", "mock-" + std::to_string(n)},
                 {"object", "chat.completion"},
                 {"choices", json::array({{{"index", 0},
                                           {"message", {{"role", "assistant"}, {"content", text}}},
                                           {"finish_reason", "stop"}}})}};
    res.set_content(body.dump(), "application/json");
  });
  if (port == 0) {
    port_ = impl->server.bind_to_any_port("127.0.0.1");
  } else {
    port_ = impl->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorKind::Io, "mock server could not bind a port");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

MockChatServer::~MockChatServer() { stop(); }

std::size_t MockChatServer::requests() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->requests;
}

void MockChatServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace kgc
