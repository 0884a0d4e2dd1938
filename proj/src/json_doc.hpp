#pragma once

// Internal JSON helpers: parsing with per-value line numbers and a cursor that
// reports errors as "source:line: path: message".

#include "dqik/dualquat.hpp"
#include "dqik/io.hpp"

#include "json.hpp"

#include <initializer_list>
#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace dqik::detail {

using nlohmann::json;

struct Document {
  json root;
  std::string source;
  std::map<std::string, int> lines;  // value path -> 1-based line
};

/// Throws FormatError with line and column on malformed JSON.
std::shared_ptr<const Document> parse_document(std::string_view text, std::string source);

/// Wraps an in-memory value (e.g. an already parsed wire frame) without line info.
std::shared_ptr<const Document> wrap_document(json value, std::string source);

class Cursor {
 public:
  Cursor(std::shared_ptr<const Document> doc, const json* value, std::string path)
      : doc_(std::move(doc)), value_(value), path_(std::move(path)) {}
  explicit Cursor(std::shared_ptr<const Document> doc) : Cursor(doc, &doc->root, "") {}

  const json& value() const { return *value_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& message) const;

  bool has(const char* key) const;
  Cursor at(const char* key) const;  // required member
  Cursor at(std::size_t index) const;
  std::size_t size() const;          // array length

  void expect_object() const;
  void expect_array() const;
  /// Rejects members outside `allowed`.
  void only_keys(std::initializer_list<std::string_view> allowed) const;

  double number() const;  // finite
  long integer() const;
  bool boolean() const;
  std::string string() const;
  Vector3d vec3() const;
  Quaterniond quat() const;

 private:
  std::string child(const std::string& suffix) const;

  std::shared_ptr<const Document> doc_;
  const json* value_;
  std::string path_;
};

json to_json(const Vector3d& v);
json to_json(const Quaterniond& q);

// Format readers and writers shared by the file loaders and the service.
Rig read_rig(const Cursor& c);
json rig_to_json(const Rig& rig);
Goal read_goal(const Cursor& c);
json goal_to_json(const Goal& g);
GoalFile read_goal_file(const Cursor& c);
/// Applies the config fields found in `c`, skipping the keys in `ignore`.
SolverConfig read_config(const Cursor& c, SolverConfig base, std::initializer_list<std::string_view> ignore = {});
json config_to_json(const SolverConfig& cfg);
json pose_to_json(const PoseVector& pose);
PoseVector read_pose(const Cursor& c);

}  // namespace dqik::detail
