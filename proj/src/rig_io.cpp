#include "dqik/io.hpp"

#include "json_doc.hpp"

#include <fstream>
#include <sstream>

namespace dqik {

using detail::Cursor;
using detail::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), 0, "", "cannot open file for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string(), 0, "", "cannot open file for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw FormatError(path.string(), 0, "", "write failed");
}

namespace detail {

namespace {

Axis read_axis(const Cursor& c) {
  const std::string s = c.string();
  if (s == "x" || s == "X") return Axis::X;
  if (s == "y" || s == "Y") return Axis::Y;
  if (s == "z" || s == "Z") return Axis::Z;
  c.fail("axis must be \"x\", \"y\" or \"z\", got \"" + s + "\"");
}

std::string axis_token(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "x";
}

}  // namespace

Rig read_rig(const Cursor& c) {
  c.only_keys({"joints", "end_effectors", "base"});
  Rig rig;
  const Cursor joints = c.at("joints");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const Cursor jc = joints.at(i);
    jc.only_keys({"id", "parent", "name", "offset", "axis", "lower", "upper"});
    Joint j;
    j.id = static_cast<int>(jc.at("id").integer());
    const Cursor parent = jc.at("parent");
    j.parent = parent.value().is_null() ? kRoot : static_cast<int>(parent.integer());
    if (jc.has("name")) j.name = jc.at("name").string();
    if (jc.has("offset")) j.offset = jc.at("offset").vec3();
    j.axis = read_axis(jc.at("axis"));
    if (jc.has("lower")) j.lower = jc.at("lower").number();
    if (jc.has("upper")) j.upper = jc.at("upper").number();
    if (j.id != static_cast<int>(i)) jc.at("id").fail("id must equal the joint's position in the list");
    if (j.parent != kRoot && (j.parent < 0 || j.parent >= j.id))
      parent.fail("parent must be -1 (root) or an earlier joint id");
    if (!(j.lower <= j.upper)) jc.at(jc.has("lower") ? "lower" : "upper").fail("lower limit exceeds upper limit");
    rig.joints.push_back(std::move(j));
  }

  if (c.has("end_effectors")) {
    const Cursor effectors = c.at("end_effectors");
    for (std::size_t e = 0; e < effectors.size(); ++e) {
      const Cursor ec = effectors.at(e);
      ec.only_keys({"joint", "offset"});
      EndEffector ee;
      ee.joint = static_cast<int>(ec.at("joint").integer());
      if (ee.joint < 0 || ee.joint >= rig.dof()) ec.at("joint").fail("joint " + std::to_string(ee.joint) + " does not exist");
      if (ec.has("offset")) ee.offset = ec.at("offset").vec3();
      rig.end_effectors.push_back(ee);
    }
  }

  if (c.has("base")) {
    const Cursor base = c.at("base");
    base.only_keys({"rotation", "translation"});
    Quaterniond rot = Quaterniond::identity();
    Vector3d trans = Vector3d::Zero();
    if (base.has("rotation")) {
      rot = base.at("rotation").quat();
      if (!rot.is_unit(1e-9)) base.at("rotation").fail("rotation must be a unit quaternion");
    }
    if (base.has("translation")) trans = base.at("translation").vec3();
    rig.base = dq_from_rot_trans(rot, trans, TransformOrder::TransThenRot);
  }

  const std::vector<std::string> problems = rig_validate(rig);
  if (!problems.empty()) c.fail(problems.front());
  return rig;
}

json rig_to_json(const Rig& rig) {
  json joints = json::array();
  for (const Joint& j : rig.joints) {
    joints.push_back({{"id", j.id},
                      {"parent", j.parent},
                      {"name", j.name},
                      {"offset", to_json(j.offset)},
                      {"axis", axis_token(j.axis)},
                      {"lower", j.lower},
                      {"upper", j.upper}});
  }
  json effectors = json::array();
  for (const EndEffector& e : rig.end_effectors) effectors.push_back({{"joint", e.joint}, {"offset", to_json(e.offset)}});
  const RotTrans base = dq_to_rot_trans(rig.base, TransformOrder::TransThenRot);
  return {{"joints", std::move(joints)},
          {"end_effectors", std::move(effectors)},
          {"base", {{"rotation", to_json(base.rotation)}, {"translation", to_json(base.translation)}}}};
}

Goal read_goal(const Cursor& c) {
  c.only_keys({"effector", "position", "orientation", "pos_weight", "rot_weight"});
  Goal g;
  g.effector = static_cast<int>(c.at("effector").integer());
  g.target.position = c.at("position").vec3();
  g.target.orientation = c.has("orientation") ? c.at("orientation").quat() : Quaterniond::identity();
  if (!g.target.orientation.is_unit(1e-6)) c.at("orientation").fail("orientation must be a unit quaternion");
  if (c.has("pos_weight")) g.pos_weight = c.at("pos_weight").number();
  if (c.has("rot_weight")) g.rot_weight = c.at("rot_weight").number();
  if (g.pos_weight < 0) c.at("pos_weight").fail("weight must be non-negative");
  if (g.rot_weight < 0) c.at("rot_weight").fail("weight must be non-negative");
  return g;
}

json goal_to_json(const Goal& g) {
  return {{"effector", g.effector},
          {"position", to_json(g.target.position)},
          {"orientation", to_json(g.target.orientation)},
          {"pos_weight", g.pos_weight},
          {"rot_weight", g.rot_weight}};
}

PoseVector read_pose(const Cursor& c) {
  PoseVector pose(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) pose[static_cast<Eigen::Index>(i)] = c.at(i).number();
  return pose;
}

json pose_to_json(const PoseVector& pose) {
  json out = json::array();
  for (Eigen::Index i = 0; i < pose.size(); ++i) out.push_back(pose[i]);
  return out;
}

GoalFile read_goal_file(const Cursor& c) {
  // Scene files carry a rig, config and tick alongside the goals.
  c.only_keys({"goals", "initial_pose", "rig", "config", "tick"});
  GoalFile out;
  if (c.has("goals")) {
    const Cursor goals = c.at("goals");
    for (std::size_t i = 0; i < goals.size(); ++i) out.goals.goals.push_back(read_goal(goals.at(i)));
  }
  if (c.has("initial_pose")) out.initial_pose = read_pose(c.at("initial_pose"));
  return out;
}

SolverConfig read_config(const Cursor& c, SolverConfig cfg, std::initializer_list<std::string_view> ignore) {
  c.expect_object();
  for (const auto& [key, v] : c.value().items()) {
    if (std::find(ignore.begin(), ignore.end(), key) != ignore.end()) continue;
    const Cursor f = c.at(key.c_str());
    auto count = [&] {
      const long n = f.integer();
      if (n < 1 || n > 1000000) f.fail("must be between 1 and 1000000");
      return static_cast<int>(n);
    };
    auto positive = [&] {
      const double x = f.number();
      if (!(x > 0)) f.fail("must be positive");
      return x;
    };
    if (key == "damping") cfg.damping = positive();
    else if (key == "max_iterations") cfg.max_iterations = count();
    else if (key == "residual_tol") cfg.residual_tol = positive();
    else if (key == "step_tol") cfg.step_tol = positive();
    else if (key == "stall_tol") cfg.stall_tol = positive();
    else if (key == "outer_max_steps") cfg.outer_max_steps = count();
    else if (key == "outer_error_tol") cfg.outer_error_tol = positive();
    else if (key == "max_joint_step") cfg.max_joint_step = positive();
    else if (key == "fd_delta") cfg.fd_delta = positive();
    else if (key == "warm_start") cfg.warm_start = f.boolean();
    else if (key == "adaptive_damping") cfg.adaptive_damping = f.boolean();
    else if (key == "max_damping_retries") cfg.max_damping_retries = count();
    else if (key == "jacobian") {
      const std::string mode = f.string();
      if (mode == "analytic") cfg.jacobian = JacobianMode::Analytic;
      else if (mode == "fd") cfg.jacobian = JacobianMode::FiniteDifference;
      else f.fail("jacobian must be \"analytic\" or \"fd\", got \"" + mode + "\"");
    } else {
      f.fail("unknown config field");
    }
  }
  try {
    validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    c.fail(e.what());
  }
  return cfg;
}

json config_to_json(const SolverConfig& cfg) {
  return {{"damping", cfg.damping},
          {"max_iterations", cfg.max_iterations},
          {"residual_tol", cfg.residual_tol},
          {"step_tol", cfg.step_tol},
          {"stall_tol", cfg.stall_tol},
          {"outer_max_steps", cfg.outer_max_steps},
          {"outer_error_tol", cfg.outer_error_tol},
          {"max_joint_step", cfg.max_joint_step},
          {"jacobian", cfg.jacobian == JacobianMode::Analytic ? "analytic" : "fd"},
          {"fd_delta", cfg.fd_delta},
          {"warm_start", cfg.warm_start},
          {"adaptive_damping", cfg.adaptive_damping},
          {"max_damping_retries", cfg.max_damping_retries}};
}

}  // namespace detail

Rig parse_rig(std::string_view text, std::string source) {
  return detail::read_rig(Cursor(detail::parse_document(text, std::move(source))));
}

std::string format_rig(const Rig& rig) { return detail::rig_to_json(rig).dump(2) + "\n"; }

Rig load_rig(const std::filesystem::path& path) { return parse_rig(read_text_file(path), path.string()); }

GoalFile parse_goals(std::string_view text, std::string source) {
  return detail::read_goal_file(Cursor(detail::parse_document(text, std::move(source))));
}

std::string format_goals(const GoalFile& goals) {
  json out;
  out["goals"] = json::array();
  for (const Goal& g : goals.goals.goals) out["goals"].push_back(detail::goal_to_json(g));
  if (goals.initial_pose) out["initial_pose"] = detail::pose_to_json(*goals.initial_pose);
  return out.dump(2) + "\n";
}

GoalFile load_goals(const std::filesystem::path& path) { return parse_goals(read_text_file(path), path.string()); }

SolverConfig parse_config(std::string_view text, std::string source, const SolverConfig& base) {
  return detail::read_config(Cursor(detail::parse_document(text, std::move(source))), base);
}

std::string format_config(const SolverConfig& cfg) { return detail::config_to_json(cfg).dump(2) + "\n"; }

SolverConfig load_config(const std::filesystem::path& path, const SolverConfig& base) {
  return parse_config(read_text_file(path), path.string(), base);
}

}  // namespace dqik
