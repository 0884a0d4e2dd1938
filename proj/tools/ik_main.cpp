// ik: batch solving, rig validation and the streaming service.

#include "dqik/io.hpp"
#include "dqik/service.hpp"
#include "dqik/session.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitReached = 0;
constexpr int kExitError = 1;
constexpr int kExitBestReach = 2;

dqik::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->request_stop();
}

dqik::SolverConfig read_config(const std::string& path) {
  return path.empty() ? dqik::SolverConfig{} : dqik::load_config(path);
}

int run_solve(const std::string& rig, const std::string& goals, const std::string& config, const std::string& trace,
              bool fd) {
  dqik::SolverConfig cfg = read_config(config);
  if (fd) cfg.jacobian = dqik::JacobianMode::FiniteDifference;
  dqik::Scene scene = dqik::load_scene(rig, goals, cfg);
  const dqik::SolveResult result = dqik::solve_to_convergence(scene.rig, scene.pose, scene.goals, scene.config);
  if (!trace.empty()) dqik::export_trace(result.trace, scene.rig.dof(), scene.goals.size(), trace);

  double worst = 0;
  if (!result.trace.empty())
    for (double e : result.trace.back().errors) worst = std::max(worst, e);
  std::printf("status: %s\nsteps: %zu\nmax_error: %.9g\npose:", std::string(dqik::to_string(result.status)).c_str(),
              result.trace.size(), worst);
  for (Eigen::Index i = 0; i < result.pose.size(); ++i) std::printf(" %.17g", result.pose[i]);
  std::printf("\n");
  return result.status == dqik::SolveStatus::Reached ? kExitReached : kExitBestReach;
}

int run_validate(const std::string& path) {
  const dqik::Rig rig = dqik::load_rig(path);
  std::printf("ok: %d DOF, %d end effectors\n", rig.dof(), rig.effector_count());
  return kExitReached;
}

int run_hand(const std::string& out) {
  dqik::write_text_file(out, dqik::format_rig(dqik::build_hand_model()));
  return kExitReached;
}

int run_serve(const std::string& rig, const std::string& goals, const std::string& config,
              const dqik::ServiceOptions& options) {
  dqik::Scene scene =
      dqik::load_scene(rig, goals.empty() ? std::nullopt : std::optional<std::filesystem::path>(goals),
                       read_config(config));
  dqik::Service service(std::move(scene), options);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "ik serve: listening on %s:%d at %g Hz\n", options.host.c_str(), service.port(), options.rate);
  service.run();
  g_service = nullptr;
  return kExitReached;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-quaternion inverse kinematics"};
  app.require_subcommand(1);

  std::string rig, goals, config, trace, out;
  bool fd = false;

  auto* solve = app.add_subcommand("solve", "Solve goals to convergence; exit 0 reached, 2 best reach, 1 error");
  solve->add_option("--rig", rig, "Rig file (JSON)")->required();
  solve->add_option("--goals", goals, "Goal file (JSON)")->required();
  solve->add_option("--config", config, "Solver config (JSON)");
  solve->add_option("--trace", trace, "Write the per-step trace as CSV");
  solve->add_flag("--fd-jacobian", fd, "Use the finite-difference Jacobian");

  dqik::ServiceOptions options;
  std::string save;
  auto* serve = app.add_subcommand("serve", "Stream the scene over TCP / WebSocket");
  serve->add_option("--rig", rig, "Rig file (JSON)")->required();
  serve->add_option("--goals", goals, "Initial goals (JSON)");
  serve->add_option("--config", config, "Solver config (JSON)");
  serve->add_option("--port", options.port, "TCP port, 0 for any free port")->check(CLI::Range(0, 65535));
  serve->add_option("--rate", options.rate, "Steps per second")->check(CLI::PositiveNumber);
  serve->add_option("--host", options.host, "Bind address");
  serve->add_option("--save", save, "Where to write the scene on stop (default scene_final.json)");

  auto* validate = app.add_subcommand("validate", "Check a rig file");
  validate->add_option("--rig", rig, "Rig file (JSON)")->required();

  auto* hand = app.add_subcommand("hand", "Write the built-in 22-DOF hand rig");
  hand->add_option("--out", out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*solve) return run_solve(rig, goals, config, trace, fd);
    if (*serve) {
      if (!save.empty()) options.save_path = save;
      return run_serve(rig, goals, config, options);
    }
    if (*validate) return run_validate(rig);
    if (*hand) return run_hand(out);
  } catch (const std::exception& e) {
    std::cerr << "ik: error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
