#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"
#include "kgcurate/icl.hpp"
#include "kgcurate/synthetic.hpp"
#include "kgcurate/tokenizer.hpp"
#include "support.hpp"

using namespace kgc;

namespace {

KnowledgeGraph names_graph() {
  std::vector<Entity> e;
  for (const char* id : {"A", "B", "C", "D", "E", "F", "G", "H", "Q", "R"}) e.push_back({id, std::string("name ") + id});
  return KnowledgeGraph::build(e, {{"A", "is a", "B"}, {"C", "has role", "D"}, {"E", "is a", "F"}, {"Q", "is a", "R"}});
}

PromptSpec spec_of(PromptVariant v) {
  PromptSpec s;
  s.variant = v;
  s.examples = {{{"A", "is a", "B"}, true, Origin::Positive},
                {{"C", "has role", "D"}, true, Origin::Positive},
                {{"E", "is a", "F"}, true, Origin::Positive},
                {{"B", "is a", "A"}, false, Origin::FlippedNegative},
                {{"G", "is a", "H"}, false, Origin::RandomNegative},
                {{"D", "has role", "C"}, false, Origin::FlippedNegative}};
  s.query = {"Q", "is a", "R"};
  s.seed = 4;
  return s;
}

EndpointConfig endpoint(const MockChatServer& s) {
  EndpointConfig e;
  e.url = s.url();
  e.api_key_env = "";
  e.backoff_initial_ms = 1;
  e.backoff_max_ms = 4;
  return e;
}

struct Fixture {
  KnowledgeGraph kg;
  std::vector<LabeledTriple> pool, source;
};

Fixture fixture(std::size_t per_class) {
  SyntheticOptions o;
  o.chemicals = 300;
  Fixture f;
  f.kg = remove_relation(synthetic_ontology(o), kIsConjugateAcidOf);
  const auto ds = stratified_split(build_task_dataset(f.kg, TaskId::Task1, 1), std::vector<double>{0.8, 0.2}, 1).dataset;
  IclPoolOptions p;
  p.n_pos = p.n_neg = per_class;
  p.split = SplitTag::Test;
  f.pool = sample_icl_pool(ds, f.kg, Tokenizer(), p, 2);
  for (auto i : ds.indices(SplitTag::Train)) f.source.push_back(ds.items[i]);
  return f;
}

ChatFn chat_for(const MockChatServer& s) {
  auto client = std::make_shared<ChatClient>(endpoint(s));
  return [client](const std::string& p) { return client->send(p); };
}

}  // namespace

TEST(Prompt, BaseTemplateExact) {
  const auto p = build_prompt(names_graph(), spec_of(PromptVariant::Base));
  const std::string expected =
      "Your task is to classify triples as True or False.\n"
      "<triple>: (name A, is_a, name B)\n<classification>: True\n"
      "<triple>: (name C, has_role, name D)\n<classification>: True\n"
      "<triple>: (name E, is_a, name F)\n<classification>: True\n"
      "<triple>: (name B, is_a, name A)\n<classification>: False\n"
      "<triple>: (name G, is_a, name H)\n<classification>: False\n"
      "<triple>: (name D, has_role, name C)\n<classification>: False\n"
      "<triple>: (name Q, is_a, name R)";
  EXPECT_EQ(p, expected);
}

TEST(Prompt, DontKnowSentence) {
  const auto p = build_prompt(names_graph(), spec_of(PromptVariant::DontKnow));
  EXPECT_NE(p.find("If you do not know the answer, state 'I don't know'"), std::string::npos);
  EXPECT_EQ(p.rfind(std::string(kTaskLine), 0), 0u);
}

TEST(Prompt, ShuffledDeterministicPermutation) {
  const auto kg = names_graph();
  const auto a = build_prompt(kg, spec_of(PromptVariant::Shuffled));
  EXPECT_EQ(a, build_prompt(kg, spec_of(PromptVariant::Shuffled)));
  const auto base = build_prompt(kg, spec_of(PromptVariant::Base));
  EXPECT_EQ(a.size(), base.size());
  std::set<std::string> differ;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto spec = spec_of(PromptVariant::Shuffled);
    spec.seed = s;
    differ.insert(build_prompt(kg, spec));
  }
  EXPECT_GT(differ.size(), 1u);
}

TEST(Prompt, RejectsBadExamples) {
  const auto kg = names_graph();
  auto s = spec_of(PromptVariant::Base);
  s.examples.pop_back();
  EXPECT_THROW(build_prompt(kg, s), Error);
  s = spec_of(PromptVariant::Base);
  s.query = s.examples[0].triple;
  EXPECT_THROW(build_prompt(kg, s), Error);
}

TEST(Prompt, SelectExamplesExcludesQuery) {
  const auto f = fixture(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto q = f.source[seed].triple;
    const auto ex = select_examples(f.source, q, seed);
    ASSERT_EQ(ex.size(), 6u);
    std::set<Triple> distinct;
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(ex[i].label, i < 3);
      EXPECT_FALSE(ex[i].triple == q);
      distinct.insert(ex[i].triple);
    }
    EXPECT_EQ(distinct.size(), 6u);
  }
}

TEST(Verdict, Parsing) {
  EXPECT_EQ(parse_verdict("<classification>: True"), Verdict::True);
  EXPECT_EQ(parse_verdict("False."), Verdict::False);
  EXPECT_EQ(parse_verdict("I don't know"), Verdict::Unclassified);
  EXPECT_EQ(parse_verdict("It could be true or false."), Verdict::Unclassified);
  EXPECT_EQ(parse_verdict("untrue"), Verdict::Unclassified);
  EXPECT_EQ(parse_verdict("The example said True. <classification>: False"), Verdict::False);
}

TEST(Verdict, Majority) {
  using V = Verdict;
  EXPECT_EQ(majority(std::vector<V>{V::True, V::True, V::False}), V::True);
  EXPECT_EQ(majority(std::vector<V>{V::True, V::False, V::Unclassified, V::Unclassified}), V::Unclassified);
  EXPECT_EQ(majority(std::vector<V>{V::True, V::False}), V::Unclassified);
}

TEST(Client, RequestBody) {
  EndpointConfig e;
  e.model = "m";
  const auto j = nlohmann::json::parse(chat_request_body(e, "hi"));
  EXPECT_EQ(j.at("model"), "m");
  EXPECT_EQ(j.at("temperature"), 0.0);
  EXPECT_EQ(j.at("messages").at(0).at("role"), "user");
  EXPECT_EQ(j.at("messages").at(0).at("content"), "hi");
}

TEST(Client, ConstantMock) {
  MockChatServer s(MockOptions{});
  const auto r = ChatClient(endpoint(s)).send("anything");
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.text, "True");
  EXPECT_EQ(r.retries, 0u);
}

TEST(Client, RetriesRateLimits) {
  MockOptions o;
  o.fail_first = 2;
  o.fail_status = 429;
  MockChatServer s(o);
  const auto r = ChatClient(endpoint(s)).send("x");
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.retries, 2u);
  EXPECT_EQ(s.requests(), 3u);
}

TEST(Client, GivesUpAfterMaxRetries) {
  MockOptions o;
  o.fail_first = 100;
  o.fail_status = 503;
  MockChatServer s(o);
  auto e = endpoint(s);
  e.max_retries = 2;
  const auto r = ChatClient(e).send("x");
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.retries, 2u);
  EXPECT_EQ(r.status, 503);
}

TEST(Client, ConnectionFailureIsTransport) {
  EndpointConfig e;
  e.url = "http://127.0.0.1:1";
  e.api_key_env = "";
  e.max_retries = 1;
  e.backoff_initial_ms = 1;
  e.timeout_s = 1;
  const auto r = ChatClient(e).send("x");
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.status, 0);
}

TEST(Client, Credentials) {
  MockOptions o;
  o.required_token = "sekrit";
  MockChatServer s(o);
  auto e = endpoint(s);
  e.api_key_env = "KGCURATE_TEST_TOKEN_UNSET";
  ::unsetenv("KGCURATE_TEST_TOKEN_UNSET");
  try {
    ChatClient c(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::Config);
  }
  EXPECT_EQ(s.requests(), 0u);
  e.api_key_env = "KGCURATE_TEST_TOKEN";
  ::setenv("KGCURATE_TEST_TOKEN", "wrong", 1);
  try {
    ChatClient(e).send("x");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::Auth);
  }
  ::setenv("KGCURATE_TEST_TOKEN", "sekrit", 1);
  EXPECT_TRUE(ChatClient(e).send("x").ok);
}

TEST(Run, ConstantRaterOnBalancedPool) {
  const auto f = fixture(10);
  MockChatServer s(MockOptions{});
  IclRunOptions o;
  o.repeats = 3;
  const auto run = run_icl(f.kg, f.pool, f.source, chat_for(s), o);
  EXPECT_TRUE(run.complete);
  EXPECT_DOUBLE_EQ(run.report.accuracy, 0.5);
  ASSERT_TRUE(run.report.kappa);
  EXPECT_DOUBLE_EQ(*run.report.kappa, 1.0);
  EXPECT_EQ(s.requests(), 60u);
  EXPECT_EQ(run.per_repeat.size(), 3u);
  EXPECT_DOUBLE_EQ(run.accuracy.sd, 0.0);
}

TEST(Run, AlternatingRaterKappaMatchesOracle) {
  const auto f = fixture(5);
  MockOptions mo;
  mo.mode = MockMode::Alternating;
  MockChatServer s(mo);
  IclRunOptions o;
  o.repeats = 5;
  const auto run = run_icl(f.kg, f.pool, f.source, chat_for(s), o);
  std::vector<std::vector<std::size_t>> counts;
  for (const auto& row : run.table) {
    std::vector<std::size_t> c(3);
    for (auto v : row) ++c[v == Verdict::True ? 0 : v == Verdict::False ? 1 : 2];
    EXPECT_EQ(c[0], 3u);
    EXPECT_EQ(c[1], 2u);
    counts.push_back(c);
  }
  // Every row {3, 2, 0}: Pbar = (9 + 4 - 5) / 20 = 0.4, Pe = 0.36 + 0.16 = 0.52.
  ASSERT_TRUE(run.report.kappa);
  EXPECT_NEAR(*run.report.kappa, (0.4 - 0.52) / (1 - 0.52), 1e-12);
  EXPECT_LT(*run.report.kappa, 0.0);
}

TEST(Run, TransportFailuresAreUnclassified) {
  const auto f = fixture(3);
  MockOptions mo;
  mo.fail_first = 1000;
  mo.fail_status = 500;
  MockChatServer s(mo);
  auto e = endpoint(s);
  e.max_retries = 0;
  auto client = std::make_shared<ChatClient>(e);
  IclRunOptions o;
  o.repeats = 2;
  const auto run = run_icl(f.kg, f.pool, f.source, [client](const std::string& p) { return client->send(p); }, o);
  EXPECT_EQ(run.transport_failures, 12u);
  EXPECT_EQ(run.report.n_unclassified, 6u);
  EXPECT_EQ(run.reasons[0][0], "transport");
}

TEST(Run, ResumeSkipsFinishedCellsAndTornLines) {
  const auto f = fixture(6);
  MockOptions mo;
  mo.mode = MockMode::Hash;
  MockChatServer s(mo);
  const auto chat = chat_for(s);
  const auto full_dir = oracle::scratch_dir("icl_unit_full"), part_dir = oracle::scratch_dir("icl_unit_part");
  IclRunOptions o;
  o.repeats = 3;
  o.seed = 5;
  o.out_dir = full_dir.string();
  const auto full = run_icl(f.kg, f.pool, f.source, chat, o);
  o.out_dir = part_dir.string();
  o.stop_after = 10;
  EXPECT_FALSE(run_icl(f.kg, f.pool, f.source, chat, o).complete);
  {
    std::ofstream torn(part_dir / "responses.jsonl", std::ios::app);
    torn << "{\"item\": 3, \"rep";
  }
  o.stop_after.reset();
  const auto before = s.requests();
  const auto resumed = run_icl(f.kg, f.pool, f.source, chat, o);
  EXPECT_EQ(s.requests() - before, 36u - 10u);
  EXPECT_EQ(resumed.verdicts_tsv(), full.verdicts_tsv());
  EXPECT_EQ(read_file((part_dir / "verdicts.tsv").string()), read_file((full_dir / "verdicts.tsv").string()));
  EXPECT_EQ(resumed.report_json(), full.report_json());
}

TEST(Run, PromptsChangeWithVariantNotWithRepeat) {
  const auto f = fixture(3);
  MockChatServer s(MockOptions{});
  IclRunOptions o;
  o.repeats = 2;
  const auto base = run_icl(f.kg, f.pool, f.source, chat_for(s), o);
  o.variant = PromptVariant::DontKnow;
  const auto dk = run_icl(f.kg, f.pool, f.source, chat_for(s), o);
  ASSERT_EQ(base.prompts.size(), f.pool.size());
  for (std::size_t i = 0; i < base.prompts.size(); ++i) {
    EXPECT_NE(base.prompts[i], dk.prompts[i]);
    EXPECT_EQ(base.prompts[i].rfind(std::string(kTaskLine) + "\n", 0), 0u);
  }
}
