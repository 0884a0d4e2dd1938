// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "dqik/io.hpp"
#include "dqik/session.hpp"
#include "test_support.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace dqik;
using namespace dqik::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass{true};
  std::string detail;
};

/// Collects the first few failures of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ << (failures_ > 1 ? "; " : "") << what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    std::ostringstream out;
    out << failures_ << " failure(s): " << notes_.str();
    return {false, out.str()};
  }

 private:
  int failures_{0};
  std::ostringstream notes_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double quat_diff_up_to_sign(const Quaterniond& a, const Quaterniond& b) {
  return std::min(max_abs_diff(a, b), max_abs_diff(a, -b));
}

Outcome algebra_suite() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  Check c;
  for (int i = 0; i < 1000; ++i) {
    const Quaterniond a = random_unit_quat(rng), b = random_unit_quat(rng), q = random_unit_quat(rng);
    c.expect(max_abs_diff((a * b) * q, a * (b * q)) <= 1e-9, "quaternion associativity");
    c.expect((a * b).is_unit(1e-9), "quaternion unit preservation");

    const DualQuaterniond x = random_rigid(rng), y = random_rigid(rng), z = random_rigid(rng);
    c.expect(max_abs_diff((x * y) * z, x * (y * z)) <= 1e-9, "dual quaternion associativity");
    c.expect((x * y).is_unit(1e-9), "dual quaternion unit preservation");

    const Quaterniond u = (x * y * z).unity_residual();
    c.expect(std::max({std::abs(u.s), std::abs(u.x), std::abs(u.y), std::abs(u.z)}) <= 1e-9, "unity condition");

    const Quaterniond r = expmap_to_quat(quat_exp_to_expmap(q));
    c.expect(quat_diff_up_to_sign(r, q) <= 1e-9, "log then exp");
    Vector3d w = random_vector(rng, 1.0).normalized() * uniform(rng, 0.0, pi - 1e-6);
    c.expect((quat_exp_to_expmap(expmap_to_quat(w)) - w).norm() <= 1e-9, "exp then log");

    const Eigen::Matrix4d M = to_matrix(x) * to_matrix(y);
    const DualQuaterniond xy = x * y;
    c.expect((dq_translation(xy) - M.topRightCorner<3, 1>()).norm() <= 1e-8, "dq vs matrix translation");
    c.expect((rotation_matrix(xy.real) - M.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff() <= 1e-12,
             "dq vs matrix rotation");
    const Vector3d p = random_vector(rng, 2.0);
    c.expect((dq_transform_point(xy, p) - (M * p.homogeneous()).head<3>()).norm() <= 1e-8, "dq vs matrix point");
  }
  const double t = seconds_since(t0);
  c.expect(t < 5.0, "runtime " + fmt(t) + " s");
  return c.done("1000 cases x 5 properties in " + fmt(t) + " s");
}

Outcome twist_swing() {
  Rng rng(1002);
  Check c;
  double worst = 0;
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
    for (int i = 0; i < 1000; ++i) {
      const Quaterniond q = random_unit_quat(rng);
      const TwistSwingPair<double> p = twist_swing_decompose(q, axis);
      const Quaterniond r = p.swing * p.twist;
      const double d = std::min((Eigen::Vector4d(r.s - q.s, r.x - q.x, r.y - q.y, r.z - q.z)).norm(),
                                (Eigen::Vector4d(r.s + q.s, r.x + q.x, r.y + q.y, r.z + q.z)).norm());
      worst = std::max(worst, d);
      c.expect(!p.degenerate, "unexpected degenerate case");
      c.expect(d < 1e-9, "reconstruction error " + fmt(d));
      c.expect(p.swing.component(axis) == 0.0, "swing has an on-axis component");
      for (Axis other : {Axis::X, Axis::Y, Axis::Z})
        if (other != axis) c.expect(p.twist.component(other) == 0.0, "twist has an off-axis component");
    }
  }
  return c.done("3000 decompositions, worst reconstruction " + fmt(worst));
}

GoalSet all_effector_goals(const Rig& rig) {
  GoalSet goals;
  for (int e = 0; e < rig.effector_count(); ++e) {
    Goal g;
    g.effector = e;
    g.pos_weight = 1.0;
    g.rot_weight = 1.0;
    goals.goals.push_back(g);
  }
  return goals;
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const Rig rig = build_hand_model();
  const GoalSet goals = all_effector_goals(rig);
  Rng rng(1003);
  Check c;
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const PoseVector pose = random_pose(rig, rng);
    const double d = (jacobian_analytic(rig, pose, goals) - central_difference_oracle(rig, pose, goals))
                         .cwiseAbs()
                         .maxCoeff();
    worst = std::max(worst, d);
    c.expect(d <= 1e-5, "pose " + std::to_string(i) + " differs by " + fmt(d));
  }
  const double t = seconds_since(t0);
  c.expect(t < 10.0, "runtime " + fmt(t) + " s");
  return c.done("200 hand poses, worst element " + fmt(worst) + ", " + fmt(t) + " s");
}

/// Projected Gauss-Seidel written out directly, run far past convergence.
Eigen::Vector2d brute_force_projected(const Eigen::Matrix2d& A, const Eigen::Vector2d& b, const Eigen::Vector2d& lo,
                                      const Eigen::Vector2d& hi) {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  for (int k = 0; k < 100000; ++k) {
    x[0] = std::clamp((b[0] - A(0, 1) * x[1]) / A(0, 0), lo[0], hi[0]);
    x[1] = std::clamp((b[1] - A(1, 0) * x[0]) / A(1, 1), lo[1], hi[1]);
  }
  return x;
}

Outcome pgs_correctness() {
  Check c;
  Rng rng(1004);
  SolverConfig cfg;
  cfg.max_iterations = 20000;
  cfg.residual_tol = 1e-9;
  cfg.step_tol = 1e-300;
  cfg.stall_tol = 1e-300;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 32;
    NormalSystem sys{random_spd(rng, n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) sys.b[i] = uniform(rng, -1, 1);
    const PgsResult r = pgs_solve(sys, Eigen::VectorXd::Zero(n), cfg);
    const double d = (r.x - sys.A.ldlt().solve(sys.b)).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
    c.expect(d <= 1e-6, "n = " + std::to_string(n) + " differs by " + fmt(d));
  }

  const double inf = std::numeric_limits<double>::infinity();
  Eigen::Matrix2d A;
  A << 4, 1, 1, 3;
  const Eigen::Vector2d b(1, 2);
  NormalSystem sys{A, b};
  SolverConfig exact = cfg;
  exact.residual_tol = 1e-13;
  const PgsResult free = pgs_solve(sys, Eigen::VectorXd::Zero(2), exact);
  c.expect((free.x - Eigen::Vector2d(1.0 / 11, 7.0 / 11)).norm() <= 1e-6, "2x2 unbounded");

  const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> boxes = {
      {{-inf, -inf}, {0.05, inf}},
      {{-inf, -inf}, {inf, 0.5}},
      {{0.2, -inf}, {inf, inf}},
      {{-0.1, 0.7}, {0.05, 1.0}},
  };
  for (const auto& [lo, hi] : boxes) {
    const PgsResult r = pgs_solve(sys, Eigen::VectorXd::Zero(2), lo, hi, exact);
    for (int i = 0; i < 2; ++i) c.expect(r.x[i] >= lo[i] && r.x[i] <= hi[i], "2x2 clamped solution leaves box");
    const Eigen::Vector2d oracle = brute_force_projected(A, b, lo, hi);
    c.expect((r.x - oracle).cwiseAbs().maxCoeff() <= 1e-9, "2x2 clamped differs from projected iteration");
  }
  const PgsResult pinned = pgs_solve(sys, Eigen::VectorXd::Zero(2), Eigen::Vector2d(-inf, -inf),
                                     Eigen::Vector2d(0.05, inf), exact);
  c.expect(pinned.x[0] == 0.05 && std::abs(pinned.x[1] - 0.65) <= 1e-12, "x = (0.05, 0.65) case");
  return c.done("100 SPD systems (worst " + fmt(worst) + "), 5 clamped 2x2 cases");
}

Outcome joint_limits() {
  const Rig rig = build_hand_model();
  Rng rng(1005);
  Check c;
  SolverState state;
  SolverConfig cfg;
  PoseVector pose = random_pose(rig, rng);
  const auto positions = [&](const PoseVector& p) { return end_effector_poses(rig, p); };
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    if (i % 50 == 0) pose = random_pose(rig, rng);
    GoalSet goals;
    const auto current = positions(pose);
    const int count = 1 + static_cast<int>(rng() % 6);
    for (int g = 0; g < count; ++g) {
      Goal goal;
      goal.effector = static_cast<int>(rng() % rig.effector_count());
      if (std::any_of(goals.goals.begin(), goals.goals.end(), [&](const Goal& o) { return o.effector == goal.effector; }))
        continue;
      goal.target.position = current[goal.effector].position + random_vector(rng, i % 2 ? 0.02 : 0.3);
      goal.target.orientation = random_unit_quat(rng);
      goal.rot_weight = i % 3 == 0 ? 0.05 : 0.0;
      goals.goals.push_back(goal);
    }
    pose = ik_step(rig, pose, goals, state, cfg);
    for (int j = 0; j < rig.dof(); ++j)
      if (!(pose[j] >= rig.joints[j].lower && pose[j] <= rig.joints[j].upper)) ++violations;
  }
  c.expect(violations == 0, std::to_string(violations) + " limit violations");
  return c.done("10000 steps, 0 violations");
}

Vector3d planar_target(Rng& rng, double lo, double hi) {
  const double d = uniform(rng, lo, hi), a = uniform(rng, -pi, pi);
  return {d * std::cos(a), d * std::sin(a), 0};
}

GoalSet position_goal(const Vector3d& p, int effector = 0) {
  GoalSet goals;
  Goal g;
  g.effector = effector;
  g.target.position = p;
  goals.goals.push_back(g);
  return goals;
}

Outcome convergence() {
  const Rig rig = two_link();
  Rng rng(1006);
  Check c;
  int reached = 0, other = 0;
  for (int i = 0; i < 500; ++i) {
    const SolveResult r =
        solve_to_convergence(rig, PoseVector::Zero(2), position_goal(planar_target(rng, 0.7, 1.7)), SolverConfig{});
    if (r.status == SolveStatus::Reached)
      ++reached;
    else if (r.status != SolveStatus::BestReach)
      ++other;
  }
  c.expect(reached >= 495, std::to_string(reached) + "/500 reached");
  c.expect(other == 0, std::to_string(other) + " trials ended without reaching or settling");

  Rig hinge;
  hinge.joints.push_back({0, kRoot, "hinge", Vector3d::Zero(), Axis::Z, -pi, pi});
  hinge.end_effectors.push_back({0, Vector3d(1, 0, 0)});
  SolverConfig tight;
  tight.outer_error_tol = 1e-9;
  const SolveResult h = solve_to_convergence(hinge, PoseVector::Zero(1), position_goal({0, 1, 0}), tight);
  const double err = std::abs(h.pose[0] - pi / 2);
  c.expect(h.status == SolveStatus::Reached && err < 1e-6, "1-DOF hinge off by " + fmt(err));
  return c.done(std::to_string(reached) + "/500 reached, rest best-reach; hinge within " + fmt(err));
}

Outcome unreachable_stability() {
  const Rig rig = two_link();
  Rng rng(1007);
  Check c;
  const SolverConfig cfg;
  double worst_delta = 0, worst_dist = 0;
  for (int i = 0; i < 100; ++i) {
    const Vector3d target = planar_target(rng, 1.9, 5.0);
    const SolveResult r = solve_to_convergence(rig, PoseVector::Zero(2), position_goal(target), cfg);
    c.expect(r.status == SolveStatus::BestReach, "trial " + std::to_string(i) + " ended " +
                                                     std::string(to_string(r.status)));
    const std::size_t n = r.trace.size();
    for (std::size_t k = n >= 5 ? n - 5 : 0; k < n; ++k) {
      const PoseVector& before = k == 0 ? PoseVector::Zero(2) : r.trace[k - 1].pose;
      worst_delta = std::max(worst_delta, (r.trace[k].pose - before).cwiseAbs().maxCoeff());
    }
    const Vector3d extension = 1.8 * target.normalized();
    worst_dist = std::max(worst_dist, (end_effector_poses(rig, r.pose)[0].position - extension).norm());
  }
  c.expect(worst_delta < 10 * cfg.step_tol, "final steps moved " + fmt(worst_delta));
  c.expect(worst_dist < 1e-3, "effector " + fmt(worst_dist) + " m from full extension");
  return c.done("100 targets, final-5 delta " + fmt(worst_delta) + ", distance " + fmt(worst_dist) + " m");
}

double median(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Each fingertip follows a smooth joint-space path; one ik_step per tick
/// tracks it, once with the warm start and once without.
Outcome warm_start_benefit() {
  const Rig rig = build_hand_model();
  const int n = rig.dof();
  const PoseVector mid = (rig.lower_limits() + rig.upper_limits()) / 2;
  std::vector<int> warm_its, cold_its;
  double max_jitter = 0;
  for (int eff = 1; eff <= 5; ++eff) {
    for (int seed = 0; seed < 4; ++seed) {
      Rng rng(seed);
      std::vector<double> phase(n);
      for (double& p : phase) p = uniform(rng, 0, 2 * pi);
      const auto path = [&](double t) {
        PoseVector p(n);
        for (int i = 0; i < n; ++i)
          p[i] = mid[i] + 0.25 * (rig.joints[i].upper - rig.joints[i].lower) * std::sin(0.035 * t + phase[i]);
        return p;
      };
      for (bool warm : {true, false}) {
        SolverConfig cfg;
        cfg.warm_start = warm;
        SolverState state;
        PoseVector pose = path(0);
        Vector3d previous = end_effector_poses(rig, pose)[eff].position;
        for (int t = 1; t <= 400; ++t) {
          const Vector3d target = end_effector_poses(rig, path(t))[eff].position;
          max_jitter = std::max(max_jitter, (target - previous).norm());
          previous = target;
          pose = ik_step(rig, pose, position_goal(target, eff), state, cfg);
          (warm ? warm_its : cold_its).push_back(state.diagnostics.iterations);
        }
      }
    }
  }
  const double mw = median(warm_its), mc = median(cold_its);
  Check c;
  c.expect(max_jitter <= 0.005, "target moved " + fmt(max_jitter) + " m in one tick");
  c.expect(mw <= 3, "warm median " + fmt(mw));
  c.expect(mc > mw, "cold median " + fmt(mc) + " not above warm " + fmt(mw));
  return c.done("median inner iterations warm " + fmt(mw) + ", cold " + fmt(mc) + ", max jitter " +
                fmt(max_jitter * 1000) + " mm");
}

Outcome performance() {
  const Rig rig = build_hand_model();
  Rng rng(1009);
  SolverState state;
  const SolverConfig cfg;
  PoseVector pose = random_pose(rig, rng);
  std::vector<double> times;
  for (int i = 0; i < 1000; ++i) {
    GoalSet goals;
    const auto current = end_effector_poses(rig, pose);
    for (int e = 1; e < rig.effector_count(); ++e) {
      Goal g;
      g.effector = e;
      g.target.position = current[e].position + random_vector(rng, 0.005);
      goals.goals.push_back(g);
    }
    const auto t0 = Clock::now();
    pose = ik_step(rig, pose, goals, state, cfg);
    times.push_back(seconds_since(t0));
  }
  std::sort(times.begin(), times.end());
  const double med = times[times.size() / 2];
  Check c;
  c.expect(med < 0.010, "median " + fmt(med * 1000) + " ms");
  return c.done("median ik_step " + fmt(med * 1e3) + " ms over 1000 steps");
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("dqik_acceptance_" + std::to_string(rd()));
  fs::create_directories(dir);
  const Rig rig = build_hand_model();
  GoalFile goals;
  Rng rng(1010);
  PoseVector pose = random_pose(rig, rng);
  goals.initial_pose = pose;
  const auto current = end_effector_poses(rig, pose);
  for (int e = 1; e < rig.effector_count(); ++e) {
    Goal g;
    g.effector = e;
    g.target.position = current[e].position + random_vector(rng, 0.03);
    goals.goals.goals.push_back(g);
  }
  write_text_file(dir / "goals.json", format_goals(goals));

  Check c;
  std::string traces[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path trace = dir / ("trace" + std::to_string(run) + ".csv");
    const int code = run_command("'" + std::string(DQIK_IK_BINARY) + "' solve --rig '" DQIK_DATA_DIR
                                 "/hand22.rig.json' --goals '" + (dir / "goals.json").string() + "' --trace '" +
                                 trace.string() + "' > /dev/null");
    c.expect(code == 0 || code == 2, "ik solve exited " + std::to_string(code));
    if (fs::exists(trace)) traces[run] = read_text_file(trace);
  }
  fs::remove_all(dir);
  c.expect(!traces[0].empty(), "no trace written");
  c.expect(traces[0] == traces[1], "traces differ");
  return c.done("two runs, identical " + std::to_string(traces[0].size()) + "-byte traces");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"algebra suite", algebra_suite},
      {"twist-swing reconstruction", twist_swing},
      {"jacobian gradient check", gradient_check},
      {"pgs correctness", pgs_correctness},
      {"joint-limit invariant", joint_limits},
      {"convergence", convergence},
      {"unreachable stability", unreachable_stability},
      {"warm-start benefit", warm_start_benefit},
      {"performance", performance},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
