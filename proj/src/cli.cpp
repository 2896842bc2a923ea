#include "occplan/cli.hpp"

#include "occplan/acceptance.hpp"
#include "occplan/parallel.hpp"
#include "occplan/scenario_io.hpp"
#include "occplan/scenarios.hpp"
#include "occplan/simloop.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace occplan {

namespace fs = std::filesystem;

namespace {

struct Args {
  std::string scenario;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::vector<std::string> overrides;
  std::string sweep;
  bool fail_on_collision = false;
  double corrupt_gradient = 1.0;
  unsigned threads = 0;
};

void write_run(const SimLog& log, const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  write_log_csv(log, (dir / "log.csv").string());
  write_vehicles_csv(log, (dir / "vehicles.csv").string());
  write_pt_analysis_csv(log, (dir / "pt_analysis.csv").string());
  write_summary_json(log, (dir / "summary.json").string(), seed);
}

std::string opt_num(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

int cmd_run(const Args& a) {
  const WorldState w = load_scenario(a.scenario, a.overrides);
  const SimLog log = run(w, a.seed);
  write_run(log, a.out, a.seed);
  const auto& s = log.summary;
  const std::string gap = std::isfinite(s.min_gap) ? num(s.min_gap) + " m" : std::string("n/a");
  std::cout << "collisions " << s.collisions << ", min gap " << gap << ", speed at MP "
            << (s.speed_at_merge ? opt_num(s.speed_at_merge) + " m/s" : std::string("n/a")) << ", terminal speed "
            << num(s.terminal_speed) << " m/s, fallbacks " << s.fallback_count << "\n";
  if (a.fail_on_collision && s.collisions > 0) return kExitCollision;
  return kExitOk;
}

int cmd_sweep(const Args& a) {
  const auto eq = a.sweep.find('=');
  if (eq == std::string::npos || eq == 0) throw ScenarioError("--sweep expects KEY=v1,v2,...");
  const std::string key = a.sweep.substr(0, eq);
  std::vector<std::string> values;
  std::stringstream ss(a.sweep.substr(eq + 1));
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    try {
      (void)std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw ScenarioError("sweep value '" + item + "' for " + key + " is not numeric");
    values.push_back(item);
  }
  if (values.empty()) throw ScenarioError("--sweep has no values");

  std::vector<WorldState> worlds;
  for (const auto& v : values) {
    auto ov = a.overrides;
    ov.push_back(key + "=" + v);
    try {
      worlds.push_back(load_scenario(a.scenario, ov));
    } catch (const std::exception& e) {
      throw ScenarioError(key + "=" + v + ": " + e.what());
    }
  }

  std::vector<SimSummary> out(values.size());
  parallel_for(values.size(), [&](std::size_t i) {
    try {
      const SimLog log = run(worlds[i], a.seed);
      write_run(log, fs::path(a.out) / (key + "=" + values[i]), a.seed);
      out[i] = log.summary;
    } catch (const std::exception& e) {
      throw std::runtime_error(key + "=" + values[i] + ": " + e.what());
    }
  }, a.threads);

  fs::create_directories(a.out);
  std::ostringstream csv;
  csv << "value,speed_at_mp,min_speed,terminal_speed,collisions,gap_checks,gap_accepts\n";
  int collisions = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& s = out[i];
    csv << values[i] << ',' << opt_num(s.speed_at_merge) << ',' << num(s.min_speed) << ',' << num(s.terminal_speed)
        << ',' << s.collisions << ',' << s.gap_checks << ',' << s.gap_accepts << '\n';
    collisions += s.collisions;
  }
  const fs::path path = fs::path(a.out) / "sweep.csv";
  {
    std::ofstream f(path.string() + ".tmp");
    f << csv.str();
  }
  fs::rename(path.string() + ".tmp", path);
  std::cout << csv.str();
  if (a.fail_on_collision && collisions > 0) return kExitCollision;
  return kExitOk;
}

int cmd_check(const Args& a) {
  acceptance::Options opt;
  opt.gradient_scale = a.corrupt_gradient;
  opt.threads = a.threads;
  const auto results = acceptance::run_all(opt, std::cout);
  const bool ok = acceptance::all_passed(results);
  std::cout << (ok ? "all criteria passed" : "acceptance FAILED") << std::endl;
  return ok ? kExitOk : kExitAcceptance;
}

int cmd_export(const Args& a) {
  fs::create_directories(a.out);
  for (const auto& [name, w] : scenarios::catalog()) {
    const fs::path p = fs::path(a.out) / (name + ".json");
    save_scenario(w, p.string());
    std::cout << p.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Occlusion-aware longitudinal planner simulation"};
  app.require_subcommand(1);
  Args a;

  auto* run = app.add_subcommand("run", "Run one scenario and write log.csv, vehicles.csv, pt_analysis.csv, summary.json");
  auto* sweep = app.add_subcommand("sweep", "Run a scenario for each value of one parameter");
  auto* check = app.add_subcommand("check", "Run the acceptance suite");
  auto* exp = app.add_subcommand("export", "Write the built-in scenarios as JSON files");

  for (auto* sc : {run, sweep}) {
    sc->add_option("--scenario", a.scenario, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", a.out, "Output directory");
    sc->add_option("--seed", a.seed, "Measurement noise seed");
    sc->add_option("--override", a.overrides, "dotted.key=value, repeatable")->take_all();
    sc->add_flag("--fail-on-collision", a.fail_on_collision, "Exit with code 2 if any collision occurs");
  }
  sweep->add_option("--sweep", a.sweep, "KEY=v1,v2,...")->required();
  for (auto* sc : {sweep, check}) sc->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
  check->add_option("--corrupt-gradient", a.corrupt_gradient, "Scale the analytic gradient")->group("");
  exp->add_option("--out", a.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(a);
    if (*sweep) return cmd_sweep(a);
    if (*check) return cmd_check(a);
    if (*exp) return cmd_export(a);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace occplan
