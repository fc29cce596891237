#include "kpzss/runner.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "kpzss/asymptotics.hpp"
#include "kpzss/blowup.hpp"
#include "kpzss/csv.hpp"
#include "kpzss/error.hpp"
#include "kpzss/json_io.hpp"
#include "kpzss/pde.hpp"
#include "kpzss/profile.hpp"

namespace kpzss::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  double lambda = 1.0;
  double q = 3.0;
  std::optional<double> f0;
  double xi_max = kDefaultXiMax;
  double rtol = 1e-10;
  double atol = 1e-12;
  std::optional<double> tol;
  std::string out_dir;
  bool seedless = false;
  // asymptotics
  bool report_g = false;
  // pde-check
  double T0 = 1.0;
  double L = 8.0;
  std::size_t N = 1025;
  double t_end = 0.5;
  // sweep
  std::string which;
  std::vector<double> lambdas;
  std::vector<double> qs;
  std::vector<double> f0s;
  std::size_t parallelism = 1;
};

// One run of a single-cell command. `record` holds everything but metadata.
struct Cell {
  json record;
  std::vector<std::string> failures;
};

ode::Tolerances tolerances(const Options& o) {
  ode::Tolerances t;
  t.rel_tol = o.rtol;
  t.abs_tol = o.atol;
  t.validate();
  return t;
}

ModelParams params_of(const Options& o) {
  ModelParams p{o.lambda, o.q, o.T0};
  p.validate();
  return p;
}

std::string tag(const ModelParams& p, double f0) {
  return "lambda" + format_double(p.lambda) + "_q" + format_double(p.q) + "_f0" +
         format_double(f0);
}

// Artifacts go to `dir` when set; sweep cells pass nullopt.
struct Sink {
  std::optional<fs::path> dir;

  std::optional<std::string> write(const std::string& name, const std::string& body) const {
    if (!dir) return std::nullopt;
    const fs::path path = *dir / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << body;
    if (!os) throw std::runtime_error("write failed: " + path.string());
    return path.generic_string();
  }
};

json base_record(const std::string& command, const ModelParams& p, json inputs) {
  json r;
  r["schema_version"] = kSchemaVersion;
  r["command"] = command;
  r["params"] = to_json(p);
  r["inputs"] = std::move(inputs);
  return r;
}

json common_inputs(const Options& o, double f0) {
  return {{"lambda", o.lambda}, {"q", o.q},       {"f0", f0},
          {"xi_max", o.xi_max}, {"rtol", o.rtol}, {"atol", o.atol}};
}

void finish_record(Cell& cell, json outputs, std::vector<std::string> artifacts) {
  cell.record["outputs"] = std::move(outputs);
  cell.record["invariant_failures"] = cell.failures;
  cell.record["artifact_paths"] = std::move(artifacts);
}

void add_check(Cell& cell, json& checks, const CheckReport& c) {
  checks.push_back(to_json(c));
  if (!c.passed()) {
    std::ostringstream os;
    os << c.name << ": " << c.violations.size() << " violation(s), first at xi="
       << c.violations.front().xi << " (" << c.violations.front().what << ")";
    cell.failures.push_back(os.str());
  }
}

Cell cmd_profile(const Options& o, const Sink& sink) {
  const auto p = params_of(o);
  const double f0 = o.f0.value_or(-1.0);
  const auto tol = tolerances(o);
  Cell cell;
  cell.record = base_record("profile", p, common_inputs(o, f0));

  const auto sol = solve_profile(p, f0, o.xi_max, tol);
  for (const auto& v : sol.invariant_violations) cell.failures.push_back(v);

  json checks = json::array();
  if (f0 < 0.0) {
    add_check(cell, checks, check_lemma_monotonicity(sol));
    if (sol.xi0) {
      add_check(cell, checks, check_gradient_bound(sol));
    } else {
      cell.failures.push_back("f has no zero on (0, xi_max): expected exactly one sign change");
    }
    const auto changes = count_sign_changes(sol);
    checks.push_back({{"name", "sign changes of f"}, {"count", changes}, {"passed", changes == 1}});
    if (changes != 1)
      cell.failures.push_back("expected exactly one sign change of f, found " +
                              std::to_string(changes));
  } else {
    add_check(cell, checks, check_differential_inequality(sol));
  }
  const auto residual = check_ode_residual(sol);
  if (!residual.passed()) {
    std::ostringstream os;
    os << "ODE residual " << residual.max_scaled << " at xi=" << residual.xi_at_max
       << " exceeds " << residual.threshold;
    cell.failures.push_back(os.str());
  }

  json outputs = {{"profile", profile_summary(sol)},
                  {"checks", checks},
                  {"ode_residual", to_json(residual)}};
  std::vector<std::string> artifacts;
  const std::string stem = "profile_" + tag(p, f0);
  if (sink.dir) {
    std::ostringstream csv;
    write_profile_csv(csv, sol);
    artifacts.push_back(*sink.write(stem + ".csv", csv.str()));
    artifacts.push_back((*sink.dir / (stem + ".json")).generic_string());
  }
  finish_record(cell, std::move(outputs), std::move(artifacts));
  return cell;
}

Cell cmd_asymptotics(const Options& o, const Sink& sink) {
  const auto p = params_of(o);
  const double f0 = o.f0.value_or(-1.0);
  const double gate = o.tol.value_or(2e-2);
  const auto tol = tolerances(o);
  Cell cell;
  auto inputs = common_inputs(o, f0);
  inputs["tol"] = gate;
  inputs["report_g"] = o.report_g;
  cell.record = base_record("asymptotics", p, std::move(inputs));

  if (!(f0 < 0.0)) throw UsageError("asymptotics requires f0 < 0");
  const auto sol = solve_profile(p, f0, o.xi_max, tol);
  for (const auto& v : sol.invariant_violations) cell.failures.push_back(v);
  if (!cell.failures.empty()) {
    finish_record(cell, {{"profile", profile_summary(sol)}}, {});
    return cell;
  }
  const auto c = constants(p);
  const auto ratio = estimate_ratio_limit(sol, c);
  json outputs = {{"profile", profile_summary(sol)}, {"ratio", to_json(ratio)}};
  auto gate_check = [&](const AsymptoticEstimate& e) {
    if (!(e.rel_error < gate)) {
      std::ostringstream os;
      os << to_string(e.target) << " rel_error " << e.rel_error << " >= tol " << gate;
      cell.failures.push_back(os.str());
    }
  };
  gate_check(ratio);
  if (o.report_g) {
    const auto g = estimate_g_limit(to_log_trace(sol), c);
    gate_check(g);
    const auto cross = check_cross_identity(ratio, g, p, c);
    outputs["g"] = to_json(g);
    outputs["cross_identity"] = {
        {"difference", cross.difference}, {"allowed", cross.allowed}, {"passed", cross.passed()}};
    if (!cross.passed()) {
      std::ostringstream os;
      os << "cross identity: |ratio - g (q-1)/q| / C = " << cross.difference << " > "
         << cross.allowed;
      cell.failures.push_back(os.str());
    }
  }
  std::vector<std::string> artifacts;
  if (sink.dir)
    artifacts.push_back((*sink.dir / ("asymptotics_" + tag(p, f0) + ".json")).generic_string());
  finish_record(cell, std::move(outputs), std::move(artifacts));
  return cell;
}

Cell cmd_blowup(const Options& o, const Sink& sink) {
  const auto p = params_of(o);
  const double f0 = o.f0.value_or(1.0);
  const auto tol = tolerances(o);
  Cell cell;
  cell.record = base_record("blowup", p, common_inputs(o, f0));

  if (!(f0 > 0.0)) throw UsageError("blowup requires f0 > 0");
  const auto rep = detect_blowup(p, f0, tol, o.xi_max);
  for (const auto& v : rep.invariant_violations) cell.failures.push_back(v);
  json checks = json::array();
  add_check(cell, checks, check_differential_inequality(rep));
  if (!std::isfinite(rep.xi_star_bracket.hi))
    cell.failures.push_back("no finite upper edge for the xi_star bracket");

  json outputs = {{"blowup", to_json(rep)}, {"checks", checks}};
  std::vector<std::string> artifacts;
  if (sink.dir)
    artifacts.push_back((*sink.dir / ("blowup_" + tag(p, f0) + ".json")).generic_string());
  finish_record(cell, std::move(outputs), std::move(artifacts));
  return cell;
}

Cell cmd_pde_check(const Options& o, const Sink& sink) {
  const auto p = params_of(o);
  const double f0 = o.f0.value_or(-1.0);
  const double gate = o.tol.value_or(1e-2);
  const auto tol = tolerances(o);
  Cell cell;
  auto inputs = common_inputs(o, f0);
  inputs["tol"] = gate;
  inputs["T0"] = o.T0;
  inputs["L"] = o.L;
  inputs["N"] = o.N;
  inputs["t_end"] = o.t_end;
  cell.record = base_record("pde-check", p, std::move(inputs));

  if (!(f0 < 0.0)) throw UsageError("pde-check needs a global profile (f0 < 0)");
  auto profile = std::make_shared<const ProfileSolution>(solve_profile(p, f0, o.xi_max, tol));
  for (const auto& v : profile->invariant_violations) cell.failures.push_back(v);
  const auto ref = refinement_study(p, profile, o.L, o.N, o.t_end, tol);

  for (const auto* run : {&ref.coarse, &ref.fine}) {
    if (!run->completed) {
      std::ostringstream os;
      os << "N=" << run->N << ": discrete system broke down at t=" << run->collapse_t.value_or(0);
      cell.failures.push_back(os.str());
    }
  }
  if (!(ref.coarse.max_rel_err < gate)) {
    std::ostringstream os;
    os << "max_rel_err " << ref.coarse.max_rel_err << " >= tol " << gate;
    cell.failures.push_back(os.str());
  }
  if (o.t_end > 0.0 && !(ref.ratio >= 3.0 && ref.ratio <= 5.0)) {
    std::ostringstream os;
    os << "refinement ratio " << ref.ratio << " outside [3, 5]";
    cell.failures.push_back(os.str());
  }

  json outputs = pde_summary(p, ref);
  std::vector<std::string> artifacts;
  const std::string stem = "pde_" + tag(p, f0) + "_N" + std::to_string(o.N);
  if (sink.dir) {
    std::ostringstream csv;
    write_pde_csv(csv, ref.coarse);
    artifacts.push_back(*sink.write(stem + ".csv", csv.str()));
    artifacts.push_back((*sink.dir / (stem + ".json")).generic_string());
  }
  finish_record(cell, std::move(outputs), std::move(artifacts));
  return cell;
}

using CommandFn = Cell (*)(const Options&, const Sink&);

CommandFn command_fn(const std::string& name) {
  if (name == "profile") return cmd_profile;
  if (name == "asymptotics") return cmd_asymptotics;
  if (name == "blowup") return cmd_blowup;
  if (name == "pde-check") return cmd_pde_check;
  throw UsageError("unknown sweep command: " + name);
}

std::string json_file_name(const std::string& command, const Options& o) {
  const ModelParams p{o.lambda, o.q, o.T0};
  const double f0 = o.f0.value_or(command == "blowup" ? 1.0 : -1.0);
  if (command == "pde-check") return "pde_" + tag(p, f0) + "_N" + std::to_string(o.N) + ".json";
  return command + "_" + tag(p, f0) + ".json";
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct SweepOutcome {
  json record;
  std::vector<std::string> failures;
  std::optional<std::string> usage_error;
};

json cmd_sweep(const Options& o, const Sink& sink, std::vector<std::string>& failures,
               std::ostream& err) {
  const auto fn = command_fn(o.which);
  const auto lambdas = sorted_unique(o.lambdas.empty() ? std::vector<double>{1.0} : o.lambdas);
  const auto qs = sorted_unique(o.qs.empty() ? std::vector<double>{3.0} : o.qs);
  const auto f0s = sorted_unique(
      o.f0s.empty() ? std::vector<double>{o.which == "blowup" ? 1.0 : -1.0} : o.f0s);
  const std::size_t total = lambdas.size() * qs.size() * f0s.size();
  if (total > kMaxSweepCells)
    throw UsageError("sweep grid has " + std::to_string(total) + " cells (limit 10000)");
  if (o.parallelism == 0) throw UsageError("parallelism must be >= 1");

  std::vector<Options> cells;
  cells.reserve(total);
  for (double l : lambdas)
    for (double q : qs)
      for (double f0 : f0s) {
        Options c = o;
        c.lambda = l;
        c.q = q;
        c.f0 = f0;
        cells.push_back(c);
      }

  std::vector<SweepOutcome> results(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    const Sink none;
    for (std::size_t i = next++; i < total; i = next++) {
      auto& r = results[i];
      try {
        auto cell = fn(cells[i], none);
        r.record = std::move(cell.record);
        r.failures = std::move(cell.failures);
      } catch (const UsageError& e) {
        r.usage_error = e.what();
      } catch (const RangeError& e) {
        r.usage_error = e.what();
      } catch (const std::exception& e) {
        r.failures.push_back(std::string("error: ") + e.what());
        r.record = base_record(o.which, ModelParams{cells[i].lambda, cells[i].q, cells[i].T0},
                               common_inputs(cells[i], *cells[i].f0));
        r.record["outputs"] = json::object();
        r.record["invariant_failures"] = r.failures;
        r.record["artifact_paths"] = json::array();
      }
    }
  };
  {
    const std::size_t n_threads = std::min(o.parallelism, total);
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t i = 0; i < total; ++i) {
    if (results[i].usage_error) {
      std::ostringstream os;
      os << "cell (lambda=" << cells[i].lambda << ", q=" << cells[i].q
         << ", f0=" << *cells[i].f0 << "): " << *results[i].usage_error;
      throw UsageError(os.str());
    }
  }

  std::string lines;
  json failing = json::array();
  for (std::size_t i = 0; i < total; ++i) {
    lines += results[i].record.dump();
    lines += '\n';
    if (!results[i].failures.empty()) {
      const auto& c = cells[i];
      failing.push_back({{"lambda", c.lambda}, {"q", c.q}, {"f0", *c.f0},
                         {"failures", results[i].failures}});
      for (const auto& f : results[i].failures) {
        std::ostringstream os;
        os << "cell (lambda=" << c.lambda << ", q=" << c.q << ", f0=" << *c.f0 << "): " << f;
        failures.push_back(os.str());
      }
    }
  }
  for (const auto& f : failures) err << f << '\n';

  json outputs = {{"which", o.which}, {"cells", total}, {"failing_cells", failing}};
  std::vector<std::string> artifacts;
  const auto path = sink.write("sweep_" + o.which + ".jsonl", lines);
  outputs["jsonl"] = path ? json(*path) : json(nullptr);
  if (path) artifacts.push_back(*path);

  json inputs = {{"which", o.which},      {"lambdas", lambdas},   {"qs", qs},
                 {"f0s", f0s},            {"xi_max", o.xi_max},   {"rtol", o.rtol},
                 {"atol", o.atol},        {"tol", o.tol ? json(*o.tol) : json(nullptr)},
                 {"report_g", o.report_g}, {"T0", o.T0},           {"L", o.L},
                 {"N", o.N},              {"t_end", o.t_end}};
  // parallelism is an execution detail and stays out of the payload.
  json record;
  record["schema_version"] = kSchemaVersion;
  record["command"] = "sweep";
  record["params"] = nullptr;
  record["inputs"] = std::move(inputs);
  record["outputs"] = std::move(outputs);
  record["invariant_failures"] = failures;
  record["artifact_paths"] = std::move(artifacts);
  return record;
}

void add_common(CLI::App* sub, Options& o, bool with_tol) {
  sub->add_option("--lambda", o.lambda, "gradient coefficient lambda > 0")->capture_default_str();
  sub->add_option("--q", o.q, "gradient exponent q > 2")->capture_default_str();
  sub->add_option("--f0", o.f0, "initial value f(0), nonzero");
  sub->add_option("--xi-max", o.xi_max, "integration range in xi")->capture_default_str();
  sub->add_option("--rtol", o.rtol, "relative tolerance")->capture_default_str();
  sub->add_option("--atol", o.atol, "absolute tolerance")->capture_default_str();
  if (with_tol) sub->add_option("--tol", o.tol, "pass/fail threshold on the reported error");
  sub->add_option("--out-dir", o.out_dir, "artifact directory (else $KPZ_SELFSIM_OUT, else .)");
  sub->add_flag("--seedless", o.seedless, "reserved; rejected (nothing here is random)");
}

void add_pde(CLI::App* sub, Options& o) {
  sub->add_option("--T0", o.T0, "blow-up time")->capture_default_str();
  sub->add_option("--L", o.L, "domain half-width")->capture_default_str();
  sub->add_option("--N", o.N, "grid nodes (odd, >= 65)")->capture_default_str();
  sub->add_option("--t-end", o.t_end, "final time (< T0)")->capture_default_str();
}

fs::path resolve_out_dir(const Options& o) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (const char* env = std::getenv("KPZ_SELFSIM_OUT"); env && *env) return env;
  return ".";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Self-similar profiles of u_t = u_xx + lambda |u_x|^q", "kpz-selfsim"};
  app.require_subcommand(1);
  auto* profile = app.add_subcommand("profile", "integrate one profile, write CSV, check lemmas");
  auto* asym = app.add_subcommand("asymptotics", "accelerated limits against closed forms");
  auto* blow = app.add_subcommand("blowup", "finite-xi breakdown for f0 > 0");
  auto* pde = app.add_subcommand("pde-check", "method-of-lines cross-check of the ansatz");
  auto* sweep = app.add_subcommand("sweep", "run a command over a (lambda, q, f0) grid");
  add_common(profile, o, false);
  add_common(asym, o, true);
  asym->add_flag("--report-g", o.report_g, "also estimate the g limit against C0");
  add_common(blow, o, false);
  add_common(pde, o, true);
  add_pde(pde, o);
  add_common(sweep, o, true);
  add_pde(sweep, o);
  sweep->add_flag("--report-g", o.report_g, "asymptotics cells: also estimate the g limit");
  sweep->add_option("--which", o.which, "command to sweep")
      ->required()
      ->check(CLI::IsMember({"profile", "asymptotics", "blowup", "pde-check"}));
  sweep->add_option("--lambdas", o.lambdas, "comma-separated lambda values")->delimiter(',');
  sweep->add_option("--qs", o.qs, "comma-separated q values")->delimiter(',');
  sweep->add_option("--f0s", o.f0s, "comma-separated f0 values")->delimiter(',');
  sweep->add_option("--parallelism", o.parallelism, "worker threads")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (o.seedless) {
    err << "error: --seedless is reserved; every run is deterministic and uses no RNG\n";
    return kExitUsage;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const fs::path dir = resolve_out_dir(o);
    fs::create_directories(dir);
    const Sink sink{dir};
    json record;
    std::vector<std::string> failures;
    std::string command;
    if (sweep->parsed()) {
      command = "sweep";
      record = cmd_sweep(o, sink, failures, err);
    } else {
      command = profile->parsed()  ? "profile"
                : asym->parsed()  ? "asymptotics"
                : blow->parsed()  ? "blowup"
                                  : "pde-check";
      auto cell = command_fn(command)(o, sink);
      failures = cell.failures;
      record = std::move(cell.record);
      for (const auto& f : failures) err << "INVARIANT FAILURE: " << f << '\n';
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record["metadata"] = {{"wall_time", wall}};
    const std::string doc = record.dump(2) + "\n";
    if (command != "sweep") sink.write(json_file_name(command, o), doc);
    out << doc;
    return failures.empty() ? kExitOk : kExitFailure;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RangeError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace kpzss::cli
