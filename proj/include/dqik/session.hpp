#pragma once

#include "dqik/io.hpp"
#include "dqik/solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace dqik {

/// Everything the stepping loop owns: rig, pose, goals, solver settings and
/// the warm-start cache.
struct Scene {
  Rig rig;
  PoseVector pose;
  GoalSet goals;
  SolverConfig config;
  SolverState state;
  ConvergenceMonitor monitor;
  long tick{0};
  PoseTrace trace;
  bool record_trace{true};
};

/// Builds a validated scene. The pose starts at the goal file's
/// initial_pose if given, else at zero, clamped into the joint limits.
Scene make_scene(Rig rig, const GoalFile& goals = {}, const SolverConfig& config = {});

/// `goals` may be omitted for a scene with no targets.
Scene load_scene(const std::filesystem::path& rig, const std::optional<std::filesystem::path>& goals,
                 const SolverConfig& config = {});

/// Replaces the goal on `effector` (or adds one). Keeps the warm start.
void set_target(Scene& scene, int effector, const EndEffectorPose& target, double pos_weight = 1.0,
                double rot_weight = 0.0);

/// Current target for `effector`, if any.
const Goal* find_goal(const Scene& scene, int effector);

/// One ik_step; the record is also appended to scene.trace when recording.
StepRecord step(Scene& scene);

/// Scene document: rig, goals, current pose as initial_pose, config, tick.
std::string format_scene(const Scene& scene);
Scene parse_scene(std::string_view text, std::string source = "scene");

// CSV trace: tick, w_0..w_{n-1}, err_0..err_{m-1}, iters, reason. Numbers
// are written in shortest round-trip form so import(export(t)) == t.
std::string format_trace(const PoseTrace& trace, int dof, int goal_count);
PoseTrace parse_trace(std::string_view text, std::string source = "trace");
void export_trace(const PoseTrace& trace, int dof, int goal_count, const std::filesystem::path& path);
void export_trace(const Scene& scene, const std::filesystem::path& path);
PoseTrace import_trace(const std::filesystem::path& path);

SolveStatus parse_status(std::string_view s);

}  // namespace dqik
