#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "fixtures.hpp"
#include "matchbench/error.hpp"
#include "matchbench/llm.hpp"
#include "matchbench/parse.hpp"

using namespace matchbench;
using nlohmann::json;

namespace {

CompletionRequest request_for(const Benchmark& b, const std::string& dataset, TaskScope scope, std::size_t job,
                              std::size_t run = 1, std::size_t vote = 1) {
  const auto& d = b.dataset(dataset);
  const auto jobs = build_jobs(d, scope);
  CompletionRequest req;
  req.model = "test-model";
  req.messages = render_messages(jobs.at(job), b, PromptTemplate::default_template());
  req.key = ResponseKey{dataset, scope, req.model, run, vote, job};
  req.job = jobs.at(job);
  return req;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no matchbench::Error thrown";
  return ErrorKind::InvalidArgument;
}

HttpConfig test_config() {
  HttpConfig cfg;
  cfg.base_url = "http://example.invalid/v1/";
  cfg.api_key = "sk-test";
  cfg.max_retries = 3;
  cfg.initial_backoff = std::chrono::milliseconds(100);
  cfg.max_backoff = std::chrono::milliseconds(250);
  return cfg;
}

std::string ok_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
              {"usage", {{"total_tokens", 12}}}}
      .dump();
}

}  // namespace

TEST(MockPolicy, Parsing) {
  const auto p = parse_mock_policy("oracle:eps=0.25,omit=0.1,seed=7");
  EXPECT_EQ(p.mode, MockPolicy::Mode::Oracle);
  EXPECT_DOUBLE_EQ(p.flip_prob, 0.25);
  EXPECT_DOUBLE_EQ(p.omit_prob, 0.1);
  EXPECT_EQ(p.seed, 7u);
  EXPECT_EQ(parse_mock_policy("oracle").flip_prob, 0.0);
  EXPECT_EQ(parse_mock_policy("constant:YES").constant_answer, "yes");
  EXPECT_EQ(*parse_mock_policy("constant-text:hello").constant_text, "hello");
  for (const char* bad : {"oracle:eps=1.5", "oracle:eps=x", "oracle:noise=0.1", "constant:maybe", "random",
                          "scripted:/nonexistent.json"})
    EXPECT_EQ(kind_of([&] { parse_mock_policy(bad); }), ErrorKind::InvalidArgument) << bad;
}

TEST(MockBackend, OracleEncodesTheGroundTruth) {
  const auto& b = fixtures::mini();
  MockBackend mock(b, parse_mock_policy("oracle:eps=0"));
  for (const auto& d : b.datasets) {
    for (auto scope : kAllScopes) {
      const auto jobs = build_jobs(d, scope);
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto text = mock.complete(request_for(b, d.id, scope, j)).text;
        const auto v = parse_response(text, jobs[j], d);
        EXPECT_TRUE(v.diagnostics.empty());
        for (const auto& [idx, vote] : v.votes) {
          const auto p = d.pair_at(idx);
          const auto& m = b.truth(d.id).matches;
          const bool match = std::find(m.begin(), m.end(), p) != m.end();
          EXPECT_EQ(vote, match ? VoteValue::Yes : VoteValue::No);
        }
      }
    }
  }
}

TEST(MockBackend, SeededOutputIsByteIdenticalAndVotesDiffer) {
  const auto& b = fixtures::mini();
  MockBackend a(b, parse_mock_policy("oracle:eps=0.5,omit=0.2,seed=3"));
  MockBackend c(b, parse_mock_policy("oracle:eps=0.5,omit=0.2,seed=3"));
  const auto r1 = request_for(b, "ADVO", TaskScope::NToM, 0, 1, 1);
  const auto r2 = request_for(b, "ADVO", TaskScope::NToM, 0, 1, 2);
  EXPECT_EQ(a.complete(r1).text, c.complete(r1).text);
  EXPECT_NE(a.complete(r1).text, a.complete(r2).text);
  EXPECT_EQ(a.requests_issued(), 3u);
}

TEST(MockBackend, ConstantAndScripted) {
  const auto& b = fixtures::mini();
  const auto& d = b.dataset("LAME");
  MockBackend yes(b, parse_mock_policy("constant:yes"));
  const auto req = request_for(b, "LAME", TaskScope::OneToN, 1);
  const auto v = parse_response(yes.complete(req).text, *req.job, d);
  for (const auto& [idx, vote] : v.votes) EXPECT_EQ(vote, VoteValue::Yes);

  MockPolicy scripted;
  scripted.mode = MockPolicy::Mode::Scripted;
  scripted.script = {"first", "second"};
  MockBackend s(b, scripted);
  EXPECT_EQ(s.complete(request_for(b, "LAME", TaskScope::OneToN, 3)).text, "second");
}

TEST(MockBackend, NeedsJobMetadata) {
  MockBackend mock(fixtures::mini(), parse_mock_policy("oracle"));
  CompletionRequest req;
  req.model = "m";
  EXPECT_EQ(kind_of([&] { mock.complete(req); }), ErrorKind::InvalidArgument);
}

TEST(Budget, CapsRequests) {
  RequestBudget budget(2);
  MockBackend mock(fixtures::mini(), parse_mock_policy("constant:no"), &budget);
  const auto req = request_for(fixtures::mini(), "PAPE", TaskScope::NToM, 0);
  mock.complete(req);
  mock.complete(req);
  EXPECT_EQ(kind_of([&] { mock.complete(req); }), ErrorKind::BudgetExceeded);
  EXPECT_EQ(budget.used(), 2u);
}

TEST(HttpBackend, RequestShape) {
  std::string seen_url, seen_body;
  std::vector<std::pair<std::string, std::string>> seen_headers;
  HttpBackend backend(
      test_config(), nullptr,
      [&](const std::string& url, const std::string& body, const auto& headers) {
        seen_url = url;
        seen_body = body;
        seen_headers = headers;
        return HttpResponse{200, ok_body("hi"), {}};
      },
      [](auto) {});
  CompletionRequest req;
  req.model = "gpt-x";
  req.messages = {{"user", "hello"}};
  req.key = ResponseKey{"D", TaskScope::NToM, "gpt-x", 1, 1, 0};
  const auto c = backend.complete(req);
  EXPECT_EQ(c.text, "hi");
  EXPECT_EQ(c.usage["total_tokens"], 12);
  EXPECT_EQ(seen_url, "http://example.invalid/v1/chat/completions");
  const auto body = json::parse(seen_body);
  EXPECT_EQ(body["model"], "gpt-x");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
  EXPECT_FALSE(body.contains("key"));
  EXPECT_NE(std::find(seen_headers.begin(), seen_headers.end(),
                      std::pair<std::string, std::string>{"Authorization", "Bearer sk-test"}),
            seen_headers.end());
}

TEST(HttpBackend, RetriesTransientFailuresWithGrowingBackoff) {
  int calls = 0;
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(
      test_config(), nullptr,
      [&](const auto&, const auto&, const auto&) {
        ++calls;
        if (calls == 1) return HttpResponse{429, "slow down", {}};
        if (calls == 2) return HttpResponse{503, "", {}};
        if (calls == 3) return HttpResponse{0, "", "timeout"};
        return HttpResponse{200, ok_body("done"), {}};
      },
      [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  CompletionRequest req;
  req.model = "m";
  EXPECT_EQ(backend.complete(req).text, "done");
  EXPECT_EQ(calls, 4);
  ASSERT_EQ(sleeps.size(), 3u);
  EXPECT_GE(sleeps[0].count(), 50);
  EXPECT_LE(sleeps[0].count(), 100);
  EXPECT_GE(sleeps[1].count(), 100);
  EXPECT_LE(sleeps[1].count(), 200);
  EXPECT_LE(sleeps[2].count(), 250);  // capped
}

TEST(HttpBackend, AuthFailsWithoutRetry) {
  int calls = 0;
  HttpBackend backend(
      test_config(), nullptr,
      [&](const auto&, const auto&, const auto&) {
        ++calls;
        return HttpResponse{401, "bad key", {}};
      },
      [](auto) {});
  CompletionRequest req;
  req.model = "m";
  EXPECT_EQ(kind_of([&] { backend.complete(req); }), ErrorKind::AuthError);
  EXPECT_EQ(calls, 1);
}

TEST(HttpBackend, MissingKeyIsAuthError) {
  auto cfg = test_config();
  cfg.api_key.clear();
  HttpBackend backend(cfg, nullptr, [](const auto&, const auto&, const auto&) { return HttpResponse{}; },
                      [](auto) {});
  CompletionRequest req;
  req.model = "m";
  EXPECT_EQ(kind_of([&] { backend.complete(req); }), ErrorKind::AuthError);
}

TEST(HttpBackend, ExhaustedRetries) {
  auto always = [](int status) {
    return [status](const auto&, const auto&, const auto&) { return HttpResponse{status, "", "down"}; };
  };
  CompletionRequest req;
  req.model = "m";
  HttpBackend limited(test_config(), nullptr, always(429), [](auto) {});
  EXPECT_EQ(kind_of([&] { limited.complete(req); }), ErrorKind::RateLimitExhausted);
  EXPECT_EQ(limited.requests_issued(), 4u);
  HttpBackend broken(test_config(), nullptr, always(502), [](auto) {});
  EXPECT_EQ(kind_of([&] { broken.complete(req); }), ErrorKind::TransportError);
  HttpBackend bad_request(test_config(), nullptr, always(400), [](auto) {});
  EXPECT_EQ(kind_of([&] { bad_request.complete(req); }), ErrorKind::TransportError);
  EXPECT_EQ(bad_request.requests_issued(), 1u);
}

TEST(HttpBackend, MalformedPayloadIsTransportError) {
  HttpBackend backend(
      test_config(), nullptr, [](const auto&, const auto&, const auto&) { return HttpResponse{200, "{}", {}}; },
      [](auto) {});
  CompletionRequest req;
  req.model = "m";
  EXPECT_EQ(kind_of([&] { backend.complete(req); }), ErrorKind::TransportError);
}

TEST(HttpBackend, BudgetCountsLogicalRequests) {
  RequestBudget budget(1);
  HttpBackend backend(
      test_config(), &budget,
      [](const auto&, const auto&, const auto&) { return HttpResponse{200, ok_body("x"), {}}; }, [](auto) {});
  CompletionRequest req;
  req.model = "m";
  backend.complete(req);
  EXPECT_EQ(kind_of([&] { backend.complete(req); }), ErrorKind::BudgetExceeded);
}

TEST(HttpBackend, TalksToALocalServer) {
  httplib::Server server;
  std::string auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
    auth = rq.get_header_value("Authorization");
    const auto body = json::parse(rq.body);
    rs.set_content(ok_body("echo:" + body["messages"][0]["content"].get<std::string>()), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto cfg = test_config();
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.timeout = std::chrono::seconds(5);
  HttpBackend backend(cfg);
  CompletionRequest req;
  req.model = "m";
  req.messages = {{"user", "ping"}};
  const auto text = backend.complete(req).text;
  server.stop();
  t.join();
  EXPECT_EQ(text, "echo:ping");
  EXPECT_EQ(auth, "Bearer sk-test");
}

TEST(HttpBackend, UnreachableServerIsTransportError) {
  auto cfg = test_config();
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.max_retries = 1;
  cfg.timeout = std::chrono::seconds(1);
  HttpBackend backend(cfg, nullptr, {}, [](auto) {});
  CompletionRequest req;
  req.model = "m";
  EXPECT_EQ(kind_of([&] { backend.complete(req); }), ErrorKind::TransportError);
}

TEST(Store, PutGetRoundTripAndAppendOnly) {
  fixtures::TempDir dir;
  ResponseStore store(dir.path());
  RawResponse r{{"PAPE", TaskScope::OneToN, "gpt/x", 2, 3, 1}, "text with \"quotes\"\nand newline", "t", json()};
  EXPECT_FALSE(store.get(r.key).has_value());
  EXPECT_TRUE(store.put(r));
  auto changed = r;
  changed.text = "other";
  EXPECT_FALSE(store.put(changed));
  EXPECT_EQ(store.get(r.key)->text, r.text);
  EXPECT_TRUE(std::filesystem::exists(dir / "gpt_x" / "1-to-N" / "PAPE" / "run2.jsonl"));

  ResponseStore reopened(dir.path());
  EXPECT_EQ(reopened.get(r.key)->text, r.text);
  EXPECT_FALSE(reopened.put(changed));
  EXPECT_EQ(reopened.load_run(r.key).size(), 1u);
}

TEST(Store, ChecksumMismatchIsCorrupt) {
  fixtures::TempDir dir;
  RawResponse r{{"PAPE", TaskScope::NToM, "m", 1, 1, 0}, "original", "t", json()};
  {
    ResponseStore store(dir.path());
    store.put(r);
  }
  const auto file = ResponseStore(dir.path()).run_file(r.key);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  in.close();
  line.replace(line.find("original"), 8, "tampered");
  std::ofstream(file, std::ios::trunc) << line << '\n';
  ResponseStore store(dir.path());
  EXPECT_EQ(kind_of([&] { store.get(r.key); }), ErrorKind::StoreCorrupt);
}

TEST(Store, GarbageLineIsCorrupt) {
  fixtures::TempDir dir;
  ResponseStore store(dir.path());
  const ResponseKey key{"PAPE", TaskScope::NToM, "m", 1, 1, 0};
  std::filesystem::create_directories(store.run_file(key).parent_path());
  std::ofstream(store.run_file(key)) << "{not json\n";
  EXPECT_EQ(kind_of([&] { store.get(key); }), ErrorKind::StoreCorrupt);
}

TEST(Store, ConcurrentPutsAreSerialized) {
  fixtures::TempDir dir;
  ResponseStore store(dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (std::size_t j = 0; j < 50; ++j)
        store.put({{"D", TaskScope::OneToOne, "m", 1, static_cast<std::size_t>(t % 3) + 1, j}, "x", "t", json()});
    });
  for (auto& th : threads) th.join();
  ResponseStore reopened(dir.path());
  EXPECT_EQ(reopened.load_run({"D", TaskScope::OneToOne, "m", 1, 1, 0}).size(), 150u);
}

TEST(Store, PathComponentsAreSanitized) {
  EXPECT_EQ(sanitize_path_component("gpt-4/0125 preview"), "gpt-4_0125_preview");
  EXPECT_EQ(sanitize_path_component(".."), "_..");
  EXPECT_EQ(sanitize_path_component(""), "_");
}
