#pragma once

#include "dqik/solver.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dqik {

/// Parse or validation failure in a rig, goal, config, scene or trace file.
/// what() reads "source:line: path: message"; line is 0 when unknown.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string source, int line, std::string path, const std::string& message);

  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  std::string source_;
  int line_;
  std::string path_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Rig files: {"joints": [...], "end_effectors": [...], "base": {...}}.
// Parsing also runs rig_validate and reports the first problem.
Rig parse_rig(std::string_view text, std::string source = "rig");
std::string format_rig(const Rig& rig);
Rig load_rig(const std::filesystem::path& path);

// Goal files: {"goals": [...], "initial_pose": [...]}. Effector indices are
// checked against the rig when a scene is built, not here.
struct GoalFile {
  GoalSet goals;
  std::optional<PoseVector> initial_pose;
};
GoalFile parse_goals(std::string_view text, std::string source = "goals");
std::string format_goals(const GoalFile& goals);
GoalFile load_goals(const std::filesystem::path& path);

/// Fields present in the text override `base`; the result is validated.
SolverConfig parse_config(std::string_view text, std::string source = "config", const SolverConfig& base = {});
std::string format_config(const SolverConfig& cfg);
SolverConfig load_config(const std::filesystem::path& path, const SolverConfig& base = {});

}  // namespace dqik
