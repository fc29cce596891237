#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "kpzss/json_io.hpp"
#include "kpzss/runner.hpp"

using namespace kpzss;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kpzss_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::string payload(const std::string& doc) {
  auto j = json::parse(doc);
  j.erase("metadata");
  return j.dump();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) v.push_back(line);
  return v;
}

}  // namespace

TEST_CASE("profile command writes a 512-row CSV and a record") {
  const auto dir = scratch("profile");
  const auto r = run({"profile", "--lambda", "1", "--q", "3", "--f0", "-1", "--xi-max", "1e6",
                      "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitOk);
  const auto csv = lines_of(slurp(dir / "profile_lambda1_q3_f0-1.csv"));
  REQUIRE(csv.size() == 513);
  CHECK(csv[0] == "xi,f,fp,fpp");
  const auto rec = json::parse(slurp(dir / "profile_lambda1_q3_f0-1.json"));
  CHECK(rec["schema_version"] == 1);
  CHECK(rec["command"] == "profile");
  CHECK(rec["invariant_failures"].empty());
  CHECK(rec["inputs"]["xi_max"] == 1e6);
  CHECK(rec["inputs"]["rtol"] == 1e-10);
  CHECK(rec["metadata"].contains("wall_time"));
  CHECK(rec["artifact_paths"].size() == 2);
  CHECK(payload(r.out) == payload(slurp(dir / "profile_lambda1_q3_f0-1.json")));
}

TEST_CASE("usage errors exit with 2") {
  const auto dir = scratch("usage").string();
  CHECK(run({"profile", "--q", "2", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"profile", "--f0", "0", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"profile", "--lambda", "-1", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"blowup", "--f0", "-1", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"profile", "--seedless", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"pde-check", "--N", "1024", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"pde-check", "--t-end", "1", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"profile", "--lambda", "abc"}).code == cli::kExitUsage);
  CHECK(run({"sweep", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"sweep", "--which", "nope", "--out-dir", dir}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"profile", "--help"}).code == cli::kExitOk);
}

TEST_CASE("asymptotics command") {
  const auto dir = scratch("asym").string();
  auto r = run({"asymptotics", "--lambda", "1", "--q", "3", "--out-dir", dir});
  CHECK(r.code == cli::kExitOk);
  auto rec = json::parse(r.out);
  CHECK(std::abs(rec["outputs"]["ratio"]["exact"].get<double>() - 0.3849002) < 1e-7);
  CHECK(rec["outputs"]["ratio"]["rel_error"].get<double>() < 1e-2);
  CHECK(rec["inputs"]["tol"] == 2e-2);

  r = run({"asymptotics", "--lambda", "2", "--q", "3", "--out-dir", dir});
  CHECK(r.code == cli::kExitOk);
  CHECK(std::abs(json::parse(r.out)["outputs"]["ratio"]["exact"].get<double>() - 0.2721655) < 1e-7);

  r = run({"asymptotics", "--lambda", "1", "--q", "3", "--report-g", "--out-dir", dir});
  CHECK(r.code == cli::kExitOk);
  rec = json::parse(r.out);
  CHECK(std::abs(rec["outputs"]["g"]["exact"].get<double>() - 0.5773503) < 1e-7);

  // A threshold below the achievable error is a tolerance failure.
  r = run({"asymptotics", "--tol", "1e-16", "--out-dir", dir});
  CHECK(r.code == cli::kExitFailure);
  CHECK_FALSE(json::parse(r.out)["invariant_failures"].empty());
}

TEST_CASE("blowup command") {
  const auto dir = scratch("blowup");
  auto r = run({"blowup", "--lambda", "1", "--q", "3", "--f0", "1", "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitOk);
  const auto rec = json::parse(slurp(dir / "blowup_lambda1_q3_f01.json"));
  const double lo = rec["outputs"]["blowup"]["xi_star_bracket"]["lo"];
  const double hi = rec["outputs"]["blowup"]["xi_star_bracket"]["hi"];
  CHECK(lo < hi);
  r = run({"blowup", "--lambda", "0.5", "--q", "4", "--f0", "2", "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitOk);
}

TEST_CASE("small pde-check run") {
  const auto dir = scratch("pde");
  const auto r = run({"pde-check", "--N", "129", "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitOk);
  const auto rec = json::parse(r.out);
  const double ratio = rec["outputs"]["refinement_ratio"];
  CHECK(ratio >= 3.0);
  CHECK(ratio <= 5.0);
  CHECK(rec["outputs"]["max_rel_err"].get<double>() < 1e-2);
  CHECK(fs::exists(dir / "pde_lambda1_q3_f0-1_N129.csv"));
  CHECK(fs::exists(dir / "pde_lambda1_q3_f0-1_N129.json"));
  CHECK(lines_of(slurp(dir / "pde_lambda1_q3_f0-1_N129.csv")).size() == 130);
}

TEST_CASE("identical invocations give identical payloads") {
  const auto dir = scratch("determinism");
  const std::vector<std::string> cmds[] = {
      {"profile", "--lambda", "0.5", "--q", "2.5"},
      {"asymptotics", "--report-g"},
      {"blowup", "--f0", "2"},
      {"pde-check", "--N", "65", "--t-end", "0.1"},
  };
  for (auto args : cmds) {
    args.push_back("--out-dir");
    args.push_back(dir.string());
    const auto a = run(args);
    std::string csv_a;
    if (args[0] == "profile") csv_a = slurp(dir / "profile_lambda0.5_q2.5_f0-1.csv");
    const auto b = run(args);
    CAPTURE(args[0]);
    CHECK(a.code == cli::kExitOk);
    CHECK(a.code == b.code);
    CHECK(payload(a.out) == payload(b.out));
    if (args[0] == "profile") CHECK(csv_a == slurp(dir / "profile_lambda0.5_q2.5_f0-1.csv"));
  }
}

TEST_CASE("sweep order and parallelism do not change the output") {
  const auto dir = scratch("sweep");
  const auto base = std::vector<std::string>{"sweep", "--which", "asymptotics", "--out-dir",
                                             dir.string()};
  auto args1 = base;
  for (auto s : {"--lambdas", "1,0.5,2", "--qs", "4,2.5,3", "--parallelism", "1"}) args1.push_back(s);
  auto args8 = base;
  for (auto s : {"--lambdas", "2,1,0.5,1", "--qs", "3,4,2.5", "--parallelism", "8"}) args8.push_back(s);

  const auto r1 = run(args1);
  const auto jsonl1 = slurp(dir / "sweep_asymptotics.jsonl");
  const auto r8 = run(args8);
  const auto jsonl8 = slurp(dir / "sweep_asymptotics.jsonl");
  CHECK(r1.code == cli::kExitOk);
  CHECK(r8.code == cli::kExitOk);
  CHECK(jsonl1 == jsonl8);
  CHECK(payload(r1.out) == payload(r8.out));

  const auto lines = lines_of(jsonl1);
  REQUIRE(lines.size() == 9);
  std::vector<std::pair<double, double>> keys;
  for (const auto& l : lines) {
    const auto j = json::parse(l);
    CHECK_FALSE(j.contains("metadata"));
    keys.emplace_back(j["params"]["lambda"], j["params"]["q"]);
  }
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(keys.front() == std::pair{0.5, 2.5});
  CHECK(keys.back() == std::pair{2.0, 4.0});
}

TEST_CASE("sweep edge cases") {
  const auto dir = scratch("sweep_edges");
  auto r = run({"sweep", "--which", "profile", "--qs", "2.1,3", "--xi-max", "1e4", "--out-dir",
                dir.string()});
  CHECK(r.code != cli::kExitUsage);
  CHECK(lines_of(slurp(dir / "sweep_profile.jsonl")).size() == 2);

  std::string many;
  for (int i = 1; i <= 101; ++i) many += (i > 1 ? "," : "") + std::to_string(i);
  std::string qs;
  for (int i = 0; i < 100; ++i) qs += (i ? "," : "") + std::to_string(2.5 + 0.01 * i);
  r = run({"sweep", "--which", "profile", "--lambdas", many, "--qs", qs, "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitUsage);

  r = run({"sweep", "--which", "blowup", "--f0s", "-1,1", "--out-dir", dir.string()});
  CHECK(r.code == cli::kExitUsage);

  r = run({"sweep", "--which", "asymptotics", "--qs", "3,4", "--tol", "1e-16", "--out-dir",
           dir.string()});
  CHECK(r.code == cli::kExitFailure);
  CHECK(json::parse(r.out)["outputs"]["failing_cells"].size() == 2);
}

TEST_CASE("output directory: flag over environment over cwd") {
  const auto flag_dir = scratch("flag");
  const auto env_dir = scratch("env");
  ::setenv("KPZ_SELFSIM_OUT", env_dir.c_str(), 1);
  CHECK(run({"blowup", "--out-dir", flag_dir.string()}).code == cli::kExitOk);
  CHECK(fs::exists(flag_dir / "blowup_lambda1_q3_f01.json"));
  CHECK_FALSE(fs::exists(env_dir / "blowup_lambda1_q3_f01.json"));
  CHECK(run({"blowup"}).code == cli::kExitOk);
  CHECK(fs::exists(env_dir / "blowup_lambda1_q3_f01.json"));
  ::unsetenv("KPZ_SELFSIM_OUT");
}
