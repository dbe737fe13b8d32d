#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "matchbench/cli.hpp"

using namespace matchbench;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class EnvGuard {
 public:
  EnvGuard(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value)
      setenv(name, value, 1);
    else
      unsetenv(name);
  }
  ~EnvGuard() {
    if (old_)
      setenv(name_, old_->c_str(), 1);
    else
      unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

// Answers every chat request with a fixed vote for every pair.
class FakeEndpoint {
 public:
  FakeEndpoint() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request&, httplib::Response& rs) {
      ++hits;
      const nlohmann::json body = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "{\"answer\": \"no\", \"matches\": []}"}}}}}}};
      rs.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::atomic<int> hits{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

const std::string kMini = fixtures::mini_path().string();

}  // namespace

TEST(Cli, ValidateMini) {
  const auto r = cli({"validate", kMini});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("total,,,87,13"), std::string::npos);
}

TEST(Cli, ValidateReportsErrors) {
  fixtures::TempDir dir;
  std::ofstream(dir / "benchmark.json") << R"({"datasets":[{"id":"D","source":{"table":"a","attributes":[{"name":"x"}]},
    "target":{"table":"b","attributes":[{"name":"y"}]}}],"truth":[{"dataset":"D","matches":[["x","z"]]}]})";
  const auto r = cli({"validate", dir.path().string()});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("unknown target attribute 'z'"), std::string::npos);
  EXPECT_EQ(cli({"validate", (dir / "missing").string()}).code, kExitDomain);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"baseline", "--metric"}).code, kExitUsage);
  EXPECT_EQ(cli({"baseline", "--metric", "cosine", "--benchmark", kMini}).code, kExitUsage);
  EXPECT_EQ(cli({"baseline", "--metric", "ngram"}).code, kExitUsage);  // no --benchmark
  EXPECT_EQ(cli({"run", "--benchmark", kMini, "--votes", "2", "--runs-dir", "/tmp/unused"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--benchmark", kMini, "--votes", "many"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--benchmark", kMini, "--backend", "magic"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--benchmark", kMini, "--mock-policy", "oracle:eps=2"}).code, kExitUsage);
}

TEST(Cli, HelpListsEveryDocumentedFlag) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* flag : {"validate", "import-benchmark", "baseline", "run", "evaluate", "combine", "report",
                           "--metric", "--benchmark", "--out", "--pr-curve", "--scope", "--model", "--runs",
                           "--votes", "--backend", "--mock-policy", "--budget", "--concurrency", "--runs-dir",
                           "--template", "--methods", "--config", "--base-url", "MATCHBENCH_API_KEY",
                           "MATCHBENCH_BASE_URL"})
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  EXPECT_EQ(cli({"run", "--help"}).code, kExitOk);
}

TEST(Cli, BaselineCsvAndCurve) {
  fixtures::TempDir dir;
  const auto r = cli({"baseline", "--metric", "ngram", "--benchmark", kMini, "--out", (dir / "b.csv").string(),
                      "--pr-curve", (dir / "pr.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = slurp(dir / "b.csv");
  EXPECT_EQ(csv.rfind("dataset,metric,theta,f1,precision,recall,tp,candidates\n", 0), 0u);
  EXPECT_NE(csv.find("PAPE,ngram,"), std::string::npos);
  EXPECT_EQ(slurp(dir / "pr.csv").rfind("threshold,precision,recall\n", 0), 0u);
  EXPECT_NE(r.err.find("AUC"), std::string::npos);
  // stdout when --out is absent
  EXPECT_NE(cli({"baseline", "--benchmark", kMini}).out.find("LAME,ngram"), std::string::npos);
}

TEST(Cli, OracleRunEvaluatesToPerfectScores) {
  fixtures::TempDir dir;
  const auto runs = (dir / "runs").string();
  const auto reports = dir / "reports";
  auto r = cli({"run", "--benchmark", kMini, "--backend", "mock", "--mock-policy", "oracle:eps=0", "--runs", "3",
                "--runs-dir", runs, "--scope", "1-to-N,N-to-1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  r = cli({"evaluate", "--runs-dir", runs, "--benchmark", kMini, "--out", reports.string(), "--baseline", "none"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream csv(slurp(reports / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  int n = 0;
  while (std::getline(csv, line)) {
    ++n;
    EXPECT_NE(line.find(",1,1,1,1,"), std::string::npos) << line;
  }
  EXPECT_EQ(n, 3 * 2 * 3);
  for (const char* f : {"f1_table.md", "f1_table.csv", "decisiveness.md", "consistency.md", "consistency.csv"})
    EXPECT_TRUE(std::filesystem::exists(reports / f)) << f;
}

TEST(Cli, CombineAndReportAreIdempotent) {
  fixtures::TempDir dir;
  const auto runs = (dir / "runs").string();
  ASSERT_EQ(cli({"run", "--benchmark", kMini, "--mock-policy", "oracle:eps=0.2,seed=5", "--runs", "5", "--runs-dir",
                 runs, "--scope", "1-to-N", "--scope", "N-to-1", "--model", "mock"})
                .code,
            kExitOk);
  const auto out = dir / "combo";
  auto r = cli({"combine", "--methods", "ngram,1-to-N,N-to-1", "--runs-dir", runs, "--benchmark", kMini, "--out",
                out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto first = slurp(out / "combination.csv");
  EXPECT_NE(first.find("ngram,mock/1-to-N,ALL,"), std::string::npos);
  ASSERT_EQ(cli({"combine", "--methods", "ngram,mock/1-to-N,N-to-1", "--runs-dir", runs, "--benchmark", kMini,
                 "--out", out.string()})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(out / "combination.csv"), first);

  const auto rep = dir / "report";
  ASSERT_EQ(cli({"report", "--runs-dir", runs, "--benchmark", kMini, "--out", rep.string()}).code, kExitOk);
  const auto tables = slurp(rep / "f1_table.csv");
  ASSERT_EQ(cli({"report", "--runs-dir", runs, "--benchmark", kMini, "--out", rep.string()}).code, kExitOk);
  EXPECT_EQ(slurp(rep / "f1_table.csv"), tables);
  EXPECT_TRUE(std::filesystem::exists(rep / "combination_tp.md"));

  // Re-running the suite is served from the store.
  r = cli({"run", "--benchmark", kMini, "--mock-policy", "oracle:eps=0.2,seed=5", "--runs", "5", "--runs-dir", runs,
           "--scope", "1-to-N,N-to-1", "--model", "mock", "--budget", "0"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST(Cli, CombineNeedsAnUnambiguousModel) {
  fixtures::TempDir dir;
  const auto runs = (dir / "runs").string();
  for (const char* model : {"a", "b"})
    ASSERT_EQ(cli({"run", "--benchmark", kMini, "--runs", "1", "--runs-dir", runs, "--scope", "N-to-M", "--model",
                   model})
                  .code,
              kExitOk);
  EXPECT_EQ(cli({"combine", "--methods", "N-to-M,ngram", "--runs-dir", runs, "--benchmark", kMini, "--out",
                 (dir / "o").string()})
                .code,
            kExitUsage);
  EXPECT_EQ(cli({"combine", "--methods", "N-to-M,ngram", "--model", "b", "--runs-dir", runs, "--benchmark", kMini,
                 "--out", (dir / "o").string()})
                .code,
            kExitOk);
  // Unknown stored method is a domain error.
  EXPECT_EQ(cli({"combine", "--methods", "1-to-1", "--model", "b", "--runs-dir", runs, "--benchmark", kMini, "--out",
                 (dir / "o").string()})
                .code,
            kExitDomain);
}

TEST(Cli, BudgetExhaustionIsADomainError) {
  fixtures::TempDir dir;
  const auto r = cli({"run", "--benchmark", kMini, "--runs-dir", (dir / "runs").string(), "--budget", "5"});
  EXPECT_EQ(r.code, kExitDomain);
  EXPECT_NE(r.err.find("BudgetExceeded"), std::string::npos);
}

TEST(Cli, ConfigFileSuppliesDefaults) {
  fixtures::TempDir dir;
  std::ofstream(dir / "cfg.json") << R"({"benchmark": ")" << kMini << R"(", "runs-dir": ")"
                                  << (dir / "runs").string()
                                  << R"(", "run": {"model": "from-config", "runs": 1, "scope": ["N-to-M"]}})";
  const auto cfg = (dir / "cfg.json").string();
  ASSERT_EQ(cli({"--config", cfg, "run"}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "from-config" / "N-to-M"));
  ASSERT_EQ(cli({"--config", cfg, "run", "--model", "from-flag"}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "from-flag" / "N-to-M"));
  EXPECT_FALSE(std::filesystem::exists(dir / "runs" / "from-config" / "1-to-1"));
  EXPECT_EQ(cli({"--config", (dir / "absent.json").string(), "run"}).code, kExitUsage);
}

TEST(Cli, BaseUrlPrecedenceFlagOverEnvOverConfig) {
  FakeEndpoint endpoint;
  fixtures::TempDir dir;
  EnvGuard key("MATCHBENCH_API_KEY", "sk-test");
  const std::string dead = "http://127.0.0.1:1/v1";
  std::ofstream(dir / "cfg.json") << R"({"base-url": ")" << dead << R"("})";
  const auto cfg = (dir / "cfg.json").string();
  auto run = [&](std::vector<std::string> extra, const std::string& model) {
    std::vector<std::string> args = {"--config", cfg, "run", "--benchmark", kMini, "--backend", "live",
                                     "--runs", "1", "--votes", "1", "--scope", "N-to-M", "--dataset", "PAPE",
                                     "--runs-dir", (dir / "runs").string(), "--model", model};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  };
  {
    // Env beats the config file.
    EnvGuard url("MATCHBENCH_BASE_URL", endpoint.url().c_str());
    EXPECT_EQ(run({}, "m1").code, kExitOk);
    EXPECT_EQ(endpoint.hits.load(), 1);
  }
  {
    // The flag beats env.
    EnvGuard url("MATCHBENCH_BASE_URL", dead.c_str());
    EXPECT_EQ(run({"--base-url", endpoint.url()}, "m2").code, kExitOk);
    EXPECT_EQ(endpoint.hits.load(), 2);
  }
  {
    EnvGuard url("MATCHBENCH_BASE_URL", nullptr);
    EnvGuard nokey("MATCHBENCH_API_KEY", nullptr);
    const auto r = run({"--base-url", endpoint.url()}, "m3");
    EXPECT_EQ(r.code, kExitDomain);
    EXPECT_NE(r.err.find("AuthError"), std::string::npos);
  }
}

TEST(Cli, ImportBenchmark) {
  fixtures::TempDir dir;
  std::ofstream(dir / "datasets.csv") << "id,source_table,target_table\nD1,a,b\n";
  std::ofstream(dir / "tables.csv") << "table,description\na,A\nb,B\n";
  std::ofstream(dir / "attributes.csv") << "table,name,description\na,id,\nb,pid,\nb,other,\n";
  std::ofstream(dir / "matches.csv") << "dataset,source,target\nD1,id,pid\n";
  const auto out = dir / "out" / "benchmark.json";
  ASSERT_EQ(cli({"import-benchmark", "--from", dir.path().string(), "--out", out.string()}).code, kExitOk);
  const auto r = cli({"validate", out.string()});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("D1,1,2,2,1"), std::string::npos);
}
