#include "nllvm/cli.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/parallel.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

using namespace nllvm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  fs::path dir = fs::temp_directory_path() / "nllvm_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body)
{
  auto p = scratch(name);
  std::ofstream(p) << body;
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args, const std::string& env = "")
{
  std::string cmd = env + " " + NLLVM_LAB_BINARY + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p)
{
  return nlohmann::json::parse(slurp(p));
}

} // namespace

TEST(LoadCsv, HeaderAndHeaderless)
{
  EXPECT_EQ(load_csv(write_file("a.csv", "y\n0.1\n0.2\n")), (std::vector<double>{ 0.1, 0.2 }));
  EXPECT_EQ(load_csv(write_file("b.csv", "0.5\n")), (std::vector<double>{ 0.5 }));
  EXPECT_EQ(load_csv(write_file("c.csv", "y\r\n-1e-3\r\n\r\n")), (std::vector<double>{ -1e-3 }));
}

TEST(LoadCsv, Rejections)
{
  try {
    load_csv(write_file("nan.csv", "y\n0.1\nnan\n"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(load_csv(write_file("word.csv", "0.1\nabc\n")), ParseError);
  EXPECT_THROW(load_csv(write_file("two.csv", "0.1,0.2\n")), ParseError);
  EXPECT_THROW(load_csv(write_file("inf.csv", "inf\n")), ParseError);
  EXPECT_THROW(load_csv(write_file("empty.csv", "y\n")), EmptyDataError);
  EXPECT_THROW(load_csv(scratch("does_not_exist.csv")), IoError);
}

TEST(Report, RoundTrip)
{
  Report r;
  r.command = "verify chi2-limit";
  r.config = { { "grid_n", 1024 }, { "params", { { "n", 10000.0 } } } };
  r.metrics = { { "ks", 0.123456789012345678 }, { "missing", std::numeric_limits<double>::quiet_NaN() } };
  r.pass = false;
  r.runtime_ms = 42;
  r.seed = 3;
  r.artifacts["trials"] = { "r.trials.csv", { "rep", "kl" } };
  auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_TRUE(back == r);
  EXPECT_TRUE(to_json(r)["metrics"]["missing"].is_null());

  Report open;
  open.command = "estimate";
  EXPECT_TRUE(report_from_json(to_json(open)) == open);
  auto bad = to_json(open);
  bad["schema_version"] = "2";
  EXPECT_THROW(report_from_json(bad), ParseError);
}

TEST(Report, SidecarNames)
{
  EXPECT_EQ(sidecar_path("out/post.json", "predictive"), fs::path("out/post.predictive.csv"));
  EXPECT_EQ(check_names().size(), 11u);
}

TEST(Cli, UsageErrorsExitTwo)
{
  auto out = scratch("u.json").string();
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate --out " + out), 2);
  EXPECT_EQ(run("verify --out " + out), 2);
  EXPECT_EQ(run("verify no-such-check --out " + out), 2);
  EXPECT_EQ(run("verify fbeta-closed-form --densities 1"), 2);
  EXPECT_EQ(run("verify fbeta-closed-form -o " + out), 2);
  EXPECT_EQ(run("verify fbeta-closed-form --densities x --out " + out), 2);
  EXPECT_EQ(run("verify fbeta-closed-form --grid 10 --out " + out), 2);
  EXPECT_EQ(run("verify hellinger-bound --trials 50 --out " + out), 2);
  EXPECT_EQ(run("estimate --out " + out), 2);
}

TEST(Cli, PassingCheckWritesReportAndSidecar)
{
  auto out = scratch("fb.json");
  ASSERT_EQ(run("verify fbeta-closed-form --densities 2 --seed 5 --out " + out.string()), 0);
  auto j = read_json(out);
  EXPECT_EQ(j["schema_version"], "1");
  EXPECT_EQ(j["command"], "verify fbeta-closed-form");
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(j["metrics"]["violations"], 0.0);
  EXPECT_EQ(j["config"]["params"]["densities"], 2.0);
  auto csv = out.parent_path() / j["artifacts"]["trials"]["file"].get<std::string>();
  ASSERT_TRUE(fs::exists(csv));
  EXPECT_EQ(slurp(csv).substr(0, 22), "density,sigma,j,sup_di");
}

TEST(Cli, FailingCheckExitsOne)
{
  auto out = scratch("chi.json");
  EXPECT_EQ(run("verify chi2-limit --n 1000 --reps 500 --seed 3 --out " + out.string()), 1);
  auto j = read_json(out);
  EXPECT_TRUE(j["metrics"].contains("ks"));
  EXPECT_EQ(j["pass"], false);
}

TEST(Cli, ReportsAreReproducible)
{
  auto a = scratch("rep_a.json"), b = scratch("rep_b.json");
  std::string args = "verify mixture-identity --densities 2 --seed 9 --out ";
  ASSERT_EQ(run(args + a.string(), "NLLVM_LAB_THREADS=1"), 0);
  ASSERT_EQ(run(args + b.string(), "NLLVM_LAB_THREADS=3"), 0);
  auto ja = read_json(a), jb = read_json(b);
  for (auto* j : { &ja, &jb }) {
    (*j)["runtime_ms"] = 0;
    (*j)["config"]["output_path"] = "";
    (*j)["artifacts"] = nullptr;
  }
  EXPECT_EQ(ja, jb);
  EXPECT_EQ(slurp(sidecar_path(a, "trials")), slurp(sidecar_path(b, "trials")));
}

TEST(Cli, EstimateWritesPredictive)
{
  std::string body = "y\n";
  for (int i = 0; i < 40; ++i)
    body += std::to_string(0.3 + 0.4 * ((i * 37) % 40) / 40.0) + "\n";
  auto data = write_file("est.csv", body);
  auto out = scratch("post.json");
  ASSERT_EQ(run("estimate --data " + data.string() + " --iters 60 --burn 20 --thin 4 --grid 512 --seed 7 --out " +
                out.string()),
            0);
  auto j = read_json(out);
  EXPECT_TRUE(j["pass"].is_null());
  EXPECT_EQ(j["metrics"]["states"], 10.0);
  EXPECT_EQ(j["config"]["input_path"], data.string());
  auto pred = sidecar_path(out, "predictive");
  ASSERT_TRUE(fs::exists(pred));
  EXPECT_EQ(j["artifacts"]["predictive"]["columns"], nlohmann::json({ "x", "density" }));

  EXPECT_EQ(run("estimate --data " + scratch("missing.csv").string() + " --out " + out.string()), 1);
  EXPECT_TRUE(read_json(out).contains("error"));
}

TEST(Cli, VariationalFit)
{
  auto out = scratch("vi.json");
  ASSERT_EQ(run("vi --n 100 --alpha 0.99 --grid 512 --seed 2 --out " + out.string()), 0);
  auto j = read_json(out);
  EXPECT_LT(j["metrics"]["kl_to_exact"].get<double>(), 0.05);
  EXPECT_EQ(j["pass"], true);
  EXPECT_TRUE(fs::exists(sidecar_path(out, "q")));
}

TEST(Cli, ThreadCap)
{
  ::setenv("NLLVM_LAB_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  ::setenv("NLLVM_LAB_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  ::unsetenv("NLLVM_LAB_THREADS");
}
