#include "json_doc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iterator>
#include <vector>

namespace dqik {

namespace {
std::string compose(const std::string& source, int line, const std::string& path, const std::string& message) {
  std::string out = source;
  if (line > 0) out += ":" + std::to_string(line);
  out += ": ";
  if (!path.empty()) out += path + ": ";
  return out + message;
}
}  // namespace

FormatError::FormatError(std::string source, int line, std::string path, const std::string& message)
    : std::runtime_error(compose(source, line, path, message)),
      source_(std::move(source)),
      line_(line),
      path_(std::move(path)) {}

}  // namespace dqik

namespace dqik::detail {

namespace {

// Input iterator over the text that publishes how far the lexer has read.
struct TrackingIterator {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p;
  const char** shared;

  reference operator*() const { return *p; }
  TrackingIterator& operator++() {
    ++p;
    *shared = p;
    return *this;
  }
  TrackingIterator operator++(int) {
    TrackingIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const TrackingIterator& o) const { return p == o.p; }
  bool operator!=(const TrackingIterator& o) const { return p != o.p; }
};

int line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Records the line of every value. Runs only on text that already parsed.
class LineRecorder : public nlohmann::json_sax<json> {
 public:
  LineRecorder(std::string_view text, const char** read, std::map<std::string, int>& lines)
      : text_(text), read_(read), lines_(lines) {}

  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }
  bool start_object(std::size_t) override {
    value();
    frames_.push_back({false, -1, {}});
    return true;
  }
  bool key(string_t& k) override {
    frames_.back().key = k;
    return true;
  }
  bool end_object() override {
    frames_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    value();
    frames_.push_back({true, -1, {}});
    return true;
  }
  bool end_array() override {
    frames_.pop_back();
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

 private:
  struct Frame {
    bool array;
    long index;
    std::string key;
  };

  bool value() {
    if (!frames_.empty() && frames_.back().array) ++frames_.back().index;
    std::string path;
    for (const Frame& f : frames_) {
      if (f.array) {
        path += "[" + std::to_string(f.index) + "]";
      } else {
        if (!path.empty()) path += ".";
        path += f.key;
      }
    }
    // The lexer may have read one character past the token; step back over
    // trailing whitespace so the line is the token's own.
    std::size_t end = static_cast<std::size_t>(*read_ - text_.data());
    while (end > 0 && std::isspace(static_cast<unsigned char>(text_[end - 1]))) --end;
    lines_.emplace(path, line_of(text_, end == 0 ? 0 : end - 1));
    return true;
  }

  std::string_view text_;
  const char** read_;
  std::map<std::string, int>& lines_;
  std::vector<Frame> frames_;
};

}  // namespace

std::shared_ptr<const Document> parse_document(std::string_view text, std::string source) {
  auto doc = std::make_shared<Document>();
  doc->source = std::move(source);
  try {
    doc->root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t at = e.byte == 0 ? 0 : e.byte - 1;
    const std::size_t line_start = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t column = line_start == std::string_view::npos ? at + 1 : at - line_start;
    std::string message = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] parse error at line x, column y: " prefix.
    if (auto colon = message.find(": "); colon != std::string::npos) message = message.substr(colon + 2);
    throw FormatError(doc->source, line_of(text, at), "",
                      "column " + std::to_string(column) + ": malformed JSON: " + message);
  }
  const char* read = text.data();
  LineRecorder recorder(text, &read, doc->lines);
  TrackingIterator first{text.data(), &read}, last{text.data() + text.size(), &read};
  json::sax_parse(first, last, &recorder);
  return doc;
}

std::shared_ptr<const Document> wrap_document(json value, std::string source) {
  auto doc = std::make_shared<Document>();
  doc->root = std::move(value);
  doc->source = std::move(source);
  return doc;
}

void Cursor::fail(const std::string& message) const {
  const auto it = doc_->lines.find(path_);
  throw FormatError(doc_->source, it == doc_->lines.end() ? 0 : it->second, path_, message);
}

std::string Cursor::child(const std::string& suffix) const {
  if (suffix.front() == '[') return path_ + suffix;
  return path_.empty() ? suffix : path_ + "." + suffix;
}

void Cursor::expect_object() const {
  if (!value_->is_object()) fail("expected an object");
}

void Cursor::expect_array() const {
  if (!value_->is_array()) fail("expected an array");
}

bool Cursor::has(const char* key) const { return value_->is_object() && value_->contains(key); }

Cursor Cursor::at(const char* key) const {
  expect_object();
  const auto it = value_->find(key);
  if (it == value_->end()) fail(std::string("missing field \"") + key + "\"");
  return Cursor(doc_, &*it, child(key));
}

Cursor Cursor::at(std::size_t index) const {
  expect_array();
  if (index >= value_->size()) fail("index " + std::to_string(index) + " out of range");
  return Cursor(doc_, &(*value_)[index], child("[" + std::to_string(index) + "]"));
}

std::size_t Cursor::size() const {
  expect_array();
  return value_->size();
}

void Cursor::only_keys(std::initializer_list<std::string_view> allowed) const {
  expect_object();
  for (const auto& [key, v] : value_->items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      Cursor(doc_, &v, child(key)).fail("unknown field");
  }
}

double Cursor::number() const {
  if (!value_->is_number()) fail("expected a number");
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("number is not finite");
  return v;
}

long Cursor::integer() const {
  if (value_->is_number_integer()) return value_->get<long>();
  if (value_->is_number_float()) {
    const double v = value_->get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) return static_cast<long>(v);
  }
  fail("expected an integer");
}

bool Cursor::boolean() const {
  if (!value_->is_boolean()) fail("expected true or false");
  return value_->get<bool>();
}

std::string Cursor::string() const {
  if (!value_->is_string()) fail("expected a string");
  return value_->get<std::string>();
}

Vector3d Cursor::vec3() const {
  if (!value_->is_array() || value_->size() != 3) fail("expected [x, y, z]");
  return {at(std::size_t{0}).number(), at(std::size_t{1}).number(), at(std::size_t{2}).number()};
}

Quaterniond Cursor::quat() const {
  if (!value_->is_array() || value_->size() != 4) fail("expected [s, x, y, z]");
  return {at(std::size_t{0}).number(), at(std::size_t{1}).number(), at(std::size_t{2}).number(), at(std::size_t{3}).number()};
}

json to_json(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const Quaterniond& q) { return json::array({q.s, q.x, q.y, q.z}); }

}  // namespace dqik::detail
