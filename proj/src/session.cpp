#include "dqik/session.hpp"

#include "json_doc.hpp"

#include <charconv>
#include <stdexcept>

namespace dqik {

using detail::Cursor;
using detail::json;

namespace {

// Per-goal checks; a GoalSet-wide "needs a positive weight" rule applies to
// solving, not to holding a scene.
void check_goal(const Rig& rig, const Goal& g) { validate_goals(rig, GoalSet{{g}}); }

Scene build_scene(Rig rig, const GoalFile& goals, const SolverConfig& config, const Cursor* where) {
  validate_config(config);
  Scene scene;
  scene.rig = std::move(rig);
  scene.config = config;
  for (std::size_t i = 0; i < goals.goals.goals.size(); ++i) {
    try {
      check_goal(scene.rig, goals.goals.goals[i]);
    } catch (const std::invalid_argument& e) {
      if (where) where->at("goals").at(i).fail(e.what());
      throw;
    }
  }
  scene.goals = goals.goals;
  if (goals.initial_pose) {
    if (goals.initial_pose->size() != scene.rig.dof()) {
      const std::string msg = "initial_pose has " + std::to_string(goals.initial_pose->size()) +
                              " entries, rig has " + std::to_string(scene.rig.dof()) + " DOF";
      if (where) where->at("initial_pose").fail(msg);
      throw std::invalid_argument(msg);
    }
    scene.pose = clamp_to_limits(scene.rig, *goals.initial_pose);
  } else {
    scene.pose = clamp_to_limits(scene.rig, PoseVector::Zero(scene.rig.dof()));
  }
  return scene;
}

std::string number_text(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

Scene make_scene(Rig rig, const GoalFile& goals, const SolverConfig& config) {
  const std::vector<std::string> problems = rig_validate(rig);
  if (!problems.empty()) throw std::invalid_argument("invalid rig: " + problems.front());
  return build_scene(std::move(rig), goals, config, nullptr);
}

Scene load_scene(const std::filesystem::path& rig_path, const std::optional<std::filesystem::path>& goals_path,
                 const SolverConfig& config) {
  Rig rig = load_rig(rig_path);
  if (!goals_path) return build_scene(std::move(rig), {}, config, nullptr);
  const auto doc = detail::parse_document(read_text_file(*goals_path), goals_path->string());
  const Cursor root(doc);
  return build_scene(std::move(rig), detail::read_goal_file(root), config, &root);
}

void set_target(Scene& scene, int effector, const EndEffectorPose& target, double pos_weight, double rot_weight) {
  const Goal goal{effector, target, pos_weight, rot_weight};
  check_goal(scene.rig, goal);
  for (Goal& g : scene.goals.goals) {
    if (g.effector == effector) {
      g = goal;
      scene.monitor.reset();
      return;
    }
  }
  scene.goals.goals.push_back(goal);
  scene.monitor.reset();
}

const Goal* find_goal(const Scene& scene, int effector) {
  for (const Goal& g : scene.goals.goals)
    if (g.effector == effector) return &g;
  return nullptr;
}

StepRecord step(Scene& scene) {
  scene.pose = ik_step(scene.rig, scene.pose, scene.goals, scene.state, scene.config);
  const StepDiagnostics& d = scene.state.diagnostics;
  StepRecord rec{++scene.tick, scene.pose, d.goal_errors, d.iterations, scene.monitor.update(d, scene.config)};
  if (scene.record_trace) scene.trace.push_back(rec);
  return rec;
}

std::string format_scene(const Scene& scene) {
  json out;
  out["rig"] = detail::rig_to_json(scene.rig);
  out["goals"] = json::array();
  for (const Goal& g : scene.goals.goals) out["goals"].push_back(detail::goal_to_json(g));
  out["initial_pose"] = detail::pose_to_json(scene.pose);
  out["config"] = detail::config_to_json(scene.config);
  out["tick"] = scene.tick;
  return out.dump(2) + "\n";
}

Scene parse_scene(std::string_view text, std::string source) {
  const auto doc = detail::parse_document(text, std::move(source));
  const Cursor root(doc);
  Rig rig = detail::read_rig(root.at("rig"));
  const SolverConfig cfg = root.has("config") ? detail::read_config(root.at("config"), {}) : SolverConfig{};
  Scene scene = build_scene(std::move(rig), detail::read_goal_file(root), cfg, &root);
  if (root.has("tick")) scene.tick = root.at("tick").integer();
  return scene;
}

SolveStatus parse_status(std::string_view s) {
  for (SolveStatus v : {SolveStatus::Running, SolveStatus::Reached, SolveStatus::BestReach, SolveStatus::StepLimit})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown status \"" + std::string(s) + "\"");
}

std::string format_trace(const PoseTrace& trace, int dof, int goal_count) {
  std::string out = "tick";
  for (int i = 0; i < dof; ++i) out += ",w_" + std::to_string(i);
  for (int i = 0; i < goal_count; ++i) out += ",err_" + std::to_string(i);
  out += ",iters,reason\n";
  for (const StepRecord& r : trace) {
    if (r.pose.size() != dof || static_cast<int>(r.errors.size()) != goal_count)
      throw std::invalid_argument("format_trace: record " + std::to_string(r.tick) + " does not match the header");
    out += std::to_string(r.tick);
    for (Eigen::Index i = 0; i < r.pose.size(); ++i) out += "," + number_text(r.pose[i]);
    for (double e : r.errors) out += "," + number_text(e);
    out += "," + std::to_string(r.iterations) + "," + std::string(to_string(r.status)) + "\n";
  }
  return out;
}

PoseTrace parse_trace(std::string_view text, std::string source) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError(source, 0, "", "empty trace file");

  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };

  const std::vector<std::string_view> header = split(lines[0]);
  int dof = 0, goals = 0;
  std::size_t col = 1;
  auto bad_header = [&] { throw FormatError(source, 1, "", "header must be tick,w_0..,err_0..,iters,reason"); };
  if (header.empty() || header[0] != "tick") bad_header();
  while (col < header.size() && header[col] == "w_" + std::to_string(dof)) ++dof, ++col;
  while (col < header.size() && header[col] == "err_" + std::to_string(goals)) ++goals, ++col;
  if (col + 2 != header.size() || header[col] != "iters" || header[col + 1] != "reason") bad_header();

  PoseTrace trace;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const int line_no = static_cast<int>(l + 1);
    const std::vector<std::string_view> cells = split(lines[l]);
    if (cells.size() != header.size())
      throw FormatError(source, line_no, "", "expected " + std::to_string(header.size()) + " columns, found " +
                                                 std::to_string(cells.size()));
    auto parse = [&](std::string_view cell, auto& value, const std::string& column) {
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || end != cell.data() + cell.size() || cell.empty())
        throw FormatError(source, line_no, column, "cannot parse \"" + std::string(cell) + "\"");
    };
    StepRecord r;
    parse(cells[0], r.tick, "tick");
    r.pose.resize(dof);
    for (int i = 0; i < dof; ++i) parse(cells[1 + i], r.pose[i], "w_" + std::to_string(i));
    r.errors.resize(goals);
    for (int i = 0; i < goals; ++i) parse(cells[1 + dof + i], r.errors[i], "err_" + std::to_string(i));
    parse(cells[1 + dof + goals], r.iterations, "iters");
    try {
      r.status = parse_status(cells[2 + dof + goals]);
    } catch (const std::invalid_argument& e) {
      throw FormatError(source, line_no, "reason", e.what());
    }
    if (!trace.empty() && r.tick <= trace.back().tick)
      throw FormatError(source, line_no, "tick", "ticks must be strictly increasing");
    trace.push_back(std::move(r));
  }
  return trace;
}

void export_trace(const PoseTrace& trace, int dof, int goal_count, const std::filesystem::path& path) {
  write_text_file(path, format_trace(trace, dof, goal_count));
}

void export_trace(const Scene& scene, const std::filesystem::path& path) {
  export_trace(scene.trace, scene.rig.dof(), scene.goals.size(), path);
}

PoseTrace import_trace(const std::filesystem::path& path) { return parse_trace(read_text_file(path), path.string()); }

}  // namespace dqik
