#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "sylva/common/log.hpp"
#include "sylva/metrics/metrics.hpp"
#include "sylva/server/server.hpp"
#include "sylva/service/analyze.hpp"
#include "sylva/service/config.hpp"
#include "sylva/service/replay.hpp"
#include "sylva/service/runner.hpp"
#include "sylva/sim/world_io.hpp"

using namespace sylva;

namespace {

std::atomic<bool> interrupted{false};

void on_signal(int) { interrupted = true; }

struct MissionArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  bool serial = false;
};

void add_mission_args(CLI::App* app, MissionArgs& a) {
  app->add_option("-c,--config", a.config, "Mission config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("-s,--seed", a.seed, "Override the mission and world seed");
  app->add_option("-o,--output", a.output, "Output directory (default out/<name>)");
  app->add_flag("--serial", a.serial, "Run kernels on one thread");
}

service::MissionConfig load(const MissionArgs& a) {
  auto cfg = service::load_mission_config(a.config);
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.world.seed = *a.seed;
  }
  if (!a.output.empty()) cfg.output_dir = a.output;
  return cfg;
}

int sim_run(const MissionArgs& a) {
  const auto cfg = load(a);
  service::MissionRunner runner(cfg, {a.serial ? ExecPolicy::Serial : ExecPolicy::Parallel, true});
  const auto started = std::chrono::steady_clock::now();
  const auto report = runner.run();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::cout << metrics::report_text(report);
  std::cout << "wall clock " << wall << " s, artifacts in " << cfg.output_dir.string() << "\n";
  return report.completed ? 0 : 3;
}

int sim_world(const MissionArgs& a, double spacing) {
  const auto cfg = load(a);
  const auto world = sim::generate_world(cfg.world);
  sim::export_world(world, cfg.output_dir, spacing);
  std::cout << "wrote " << (cfg.output_dir / "world_cloud.ply").string() << " and trees.json ("
            << world.trees().size() << " trees)\n";
  return 0;
}

int analyze(const std::string& cloud, const std::string& output, const std::string& params_path, bool serial) {
  service::AnalyzeParams params;
  if (!params_path.empty()) params = read_json_file(params_path).get<service::AnalyzeParams>();
  params.policy = serial ? ExecPolicy::Serial : ExecPolicy::Parallel;
  const auto result = service::analyze_ply(cloud, params, std::filesystem::path(output));
  int with_dbh = 0;
  for (const auto& [id, t] : result.inventory.trees()) with_dbh += t.traits.dbh ? 1 : 0;
  std::cout << result.analysis.points << " points, " << result.analysis.ground_points << " ground, "
            << result.inventory.trees().size() << " trees (" << with_dbh << " with DBH), exports in " << output
            << "\n";
  return 0;
}

int serve(const MissionArgs& a, unsigned short port, double speed, bool autostart, const std::string& address) {
  const auto cfg = load(a);
  server::ServerOptions opts;
  opts.address = address;
  opts.port = port;
  opts.speed = speed;
  opts.autostart = autostart;
  opts.runner.policy = a.serial ? ExecPolicy::Serial : ExecPolicy::Parallel;
  server::MissionServer srv(cfg, opts);
  srv.start();
  std::cout << "listening on ws://" << address << ":" << srv.port() << "/" << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  bool reported = false;
  while (!interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (!reported) {
      if (auto r = srv.report()) {
        std::cout << metrics::report_text(*r) << std::flush;
        reported = true;
      }
    }
  }
  srv.stop();
  return 0;
}

int replay(const std::string& log_path, double speed) {
  service::ReplayOptions opts;
  opts.speed = speed;
  const auto r = service::replay_events(log_path, [](const Json& m) { std::cout << m.dump() << '\n'; }, opts);
  std::cout.flush();
  if (r.warning) std::cerr << "warning: " << *r.warning << "\n";
  return 0;
}

int report(const std::string& path, bool as_json) {
  std::filesystem::path p = path;
  if (std::filesystem::is_directory(p)) p /= "report.json";
  const auto r = read_json_file(p).get<metrics::MissionReport>();
  if (as_json) {
    std::cout << Json(r).dump(2) << "\n";
  } else {
    std::cout << metrics::report_text(r);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sylva: synthetic-forest mission workbench"};
  app.require_subcommand(1);
  app.footer("Log verbosity: SYLVA_LOG=trace|debug|info|warn|error|off");

  auto* sim = app.add_subcommand("sim", "Simulated missions");
  sim->require_subcommand(1);
  MissionArgs run_args;
  auto* run = sim->add_subcommand("run", "Run a mission headless and write its artifacts");
  add_mission_args(run, run_args);
  MissionArgs world_args;
  double spacing = 0.05;
  auto* world = sim->add_subcommand("world", "Export the ground-truth world cloud (PLY) and tree table");
  add_mission_args(world, world_args);
  world->add_option("--spacing", spacing, "Sample spacing, m")->check(CLI::PositiveNumber);

  std::string cloud;
  std::string analyze_out = "out/analyze";
  std::string analyze_params;
  bool analyze_serial = false;
  auto* an = app.add_subcommand("analyze", "Run the forest pipeline on one PLY cloud");
  an->add_option("cloud", cloud, "Input PLY (binary little-endian, x y z)")->required();
  an->add_option("-o,--output", analyze_out, "Output directory");
  an->add_option("-p,--params", analyze_params, "Analysis parameters (JSON)")->check(CLI::ExistingFile);
  an->add_flag("--serial", analyze_serial, "Run kernels on one thread");

  MissionArgs serve_args;
  unsigned short port = 8080;
  double speed = 1.0;
  bool autostart = false;
  std::string address = "127.0.0.1";
  auto* sv = app.add_subcommand("serve", "Host a mission over the WebSocket wire protocol");
  add_mission_args(sv, serve_args);
  sv->add_option("-p,--port", port, "TCP port (0 picks a free one)");
  sv->add_option("--speed", speed, "Simulated seconds per wall second (<= 0: as fast as possible)");
  sv->add_option("--address", address, "Bind address");
  sv->add_flag("--autostart", autostart, "Queue the config survey and start at launch");

  std::string events;
  double replay_speed = 1.0;
  auto* rp = app.add_subcommand("replay", "Re-emit an events.jsonl log on stdout");
  rp->add_option("events", events, "Event log")->required();
  rp->add_option("--speed", replay_speed, "Speed factor (<= 0: no pacing)");

  std::string report_path;
  bool report_json = false;
  auto* rep = app.add_subcommand("report", "Print a mission report");
  rep->add_option("path", report_path, "Output directory or report.json")->required();
  rep->add_flag("--json", report_json, "Print JSON instead of the table");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return sim_run(run_args);
    if (world->parsed()) return sim_world(world_args, spacing);
    if (an->parsed()) return analyze(cloud, analyze_out, analyze_params, analyze_serial);
    if (sv->parsed()) return serve(serve_args, port, speed, autostart, address);
    if (rp->parsed()) return replay(events, replay_speed);
    if (rep->parsed()) return report(report_path, report_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
