#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "vecquad/config.hpp"
#include "vecquad/verify.hpp"

namespace fs = std::filesystem;
using namespace vecquad;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Options
{
  std::string robot;
  std::string gains;
  double duration = 0.0;
  std::uint64_t seed = 1;
  std::string out = "out";
  int jobs = 1;
  int runs = 1;
  bool feedback = false;
  bool dump_qp = false;
  double joint_bias_deg = -1.0;
  bool verbose = false;
  int cases = 1000;
};

void fail_line(const std::string& status, const std::string& reason)
{
  nlohmann::json j;
  j["status"] = status;
  j["reason"] = reason;
  std::cerr << j.dump() << '\n';
}

void add_common(CLI::App* sub, Options& o)
{
  sub->add_option("--robot", o.robot, "robot description file")->check(CLI::ExistingFile);
  sub->add_option("--gains", o.gains, "gains and scenario parameter file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_flag("-v,--verbose", o.verbose, "log progress");
}

void add_scenario(CLI::App* sub, Options& o)
{
  add_common(sub, o);
  sub->add_option("--duration", o.duration, "simulated seconds (default: scenario specific)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
  sub->add_option("--runs", o.runs, "number of seeds starting at --seed")->check(CLI::PositiveNumber);
  sub->add_flag("--feedback-planning", o.feedback, "re-anchor gait targets to measured footholds");
  sub->add_flag("--dump-qp", o.dump_qp, "write every allocation problem to qp.jsonl");
  sub->add_option("--joint-bias-deg", o.joint_bias_deg, "max constant encoder offset per joint")
      ->check(CLI::NonNegativeNumber);
}

fs::path config_file(const std::string& given, const char* name)
{
  return given.empty() ? default_config_dir() / name : fs::path(given);
}

int run_scenarios(ScenarioKind kind, const Options& o)
{
  ScenarioConfig base;
  try {
    base = load_scenario_config(kind, config_file(o.robot, "robot.yaml"), config_file(o.gains, "gains.yaml"));
  } catch (const ConfigError& e) {
    fail_line("config", e.what());
    return kExitUsage;
  }
  if (o.duration > 0.0) base.duration = o.duration;
  if (o.feedback) base.gait.feedback = true;
  if (o.joint_bias_deg >= 0.0) base.sim.joint_bias = o.joint_bias_deg * kDegToRad;

  std::vector<RunSummary> results(o.runs);
  std::vector<std::string> errors(o.runs);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next++; k < o.runs; k = next++) {
      ScenarioConfig cfg = base;
      cfg.sim.seed = o.seed + k;
      const fs::path dir = o.runs == 1 ? fs::path(o.out) : fs::path(o.out) / ("seed_" + std::to_string(cfg.sim.seed));
      try {
        fs::create_directories(dir);
        if (o.dump_qp) cfg.qp_dump_path = (dir / "qp.jsonl").string();
        const SimLog log = run_scenario(cfg);
        write_outputs(log, dir);
        results[k] = log.summary;
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(o.jobs, o.runs); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int code = 0;
  for (int k = 0; k < o.runs; ++k) {
    if (!errors[k].empty()) {
      fail_line("error", "seed " + std::to_string(o.seed + k) + ": " + errors[k]);
      code = kExitRuntime;
      continue;
    }
    // one line per run so several seeds read as JSON lines
    std::cout << nlohmann::json::parse(summary_json(results[k])).dump() << '\n';
    if (results[k].status != "ok") {
      fail_line(results[k].status, "seed " + std::to_string(results[k].seed) + ": " + results[k].reason);
      code = kExitRuntime;
    }
  }
  return code;
}

int run_verify(const Options& o)
{
  RobotDescription desc;
  try {
    desc = load_robot(config_file(o.robot, "robot.yaml"));
  } catch (const ConfigError& e) {
    fail_line("config", e.what());
    return kExitUsage;
  }
  VerifyOptions vo;
  vo.cases = o.cases;
  vo.seed = o.seed;
  const VerifyReport rep = verify_allocation(desc, vo);
  const std::string text = rep.to_json();
  std::cout << text << '\n';
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "verify_allocation.json") << text << '\n';
  }
  const double worst = std::max({rep.max_wrench_residual, rep.max_equilibrium_residual, rep.max_bound_violation,
                                 rep.max_realized_residual});
  if (rep.infeasible > 0 || worst >= 1e-4) {
    fail_line("verify", std::to_string(rep.infeasible) + " infeasible cases, worst residual " + std::to_string(worst));
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"vecquad: thrust-vectoring quadruped simulation"};
  app.require_subcommand(1);
  Options o;

  std::vector<std::pair<CLI::App*, ScenarioKind>> scenarios;
  for (ScenarioKind k : {ScenarioKind::Hover, ScenarioKind::Transform, ScenarioKind::LegLift, ScenarioKind::Walk,
                         ScenarioKind::Hybrid}) {
    CLI::App* sub = app.add_subcommand(to_string(k), "run the " + to_string(k) + " scenario");
    add_scenario(sub, o);
    scenarios.emplace_back(sub, k);
  }
  CLI::App* verify = app.add_subcommand("verify-allocation", "random-pose allocation residual sweep");
  add_common(verify, o);
  verify->add_option("--cases", o.cases, "number of random cases")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  spdlog::set_level(o.verbose ? spdlog::level::info : spdlog::level::warn);
  if (verify->parsed()) return run_verify(o);
  for (const auto& [sub, kind] : scenarios) {
    if (sub->parsed()) return run_scenarios(kind, o);
  }
  return kExitUsage;
}
