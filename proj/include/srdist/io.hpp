#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "srdist/transport.hpp"

namespace srdist {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest round-trip-safe decimal form (17 significant digits).
std::string format_double(double v);

// Ordered JSON tree: objects keep insertion order, numbers are serialized
// with format_double, so identical reports are byte-identical.  Non-finite
// numbers serialize as null.
class JsonValue {
 public:
  JsonValue() = default;  // null
  static JsonValue boolean(bool b);
  static JsonValue number(double v);
  static JsonValue integer(long long v);
  static JsonValue string(std::string s);
  static JsonValue array();
  static JsonValue object();

  JsonValue& push(JsonValue v);                  // arrays
  JsonValue& set(std::string key, JsonValue v);  // objects
  std::string dump(int indent = 2) const;

 private:
  enum class Kind { Null, Bool, Number, Integer, String, Array, Object };
  Kind kind_ = Kind::Null;
  bool bool_ = false;
  double num_ = 0.0;
  long long int_ = 0;
  std::string str_;
  std::vector<JsonValue> items_;
  std::vector<std::pair<std::string, JsonValue>> entries_;

  bool scalar() const { return kind_ < Kind::Array; }
  void write(std::string& out, int indent, int depth) const;
};

// One value of a configuration file: number, string (quoted or bare),
// array `[v, ...]`, or table `{key = value, ...}`.
class ConfigNode {
 public:
  enum class Kind { Number, String, Array, Table };

  Kind kind() const { return kind_; }
  double number() const;
  long long integer() const;  // number that must be integral
  const std::string& text() const;
  const std::vector<ConfigNode>& items() const;
  const std::vector<std::pair<std::string, ConfigNode>>& entries() const;
  const ConfigNode* find(const std::string& key) const;  // tables only

  VectorXd vector() const;              // array of numbers
  std::vector<double> numbers() const;  // same, as std::vector

  static ConfigNode number_node(double v);
  static ConfigNode string_node(std::string s);
  static ConfigNode array_node(std::vector<ConfigNode> items);
  static ConfigNode table_node(
      std::vector<std::pair<std::string, ConfigNode>> entries);

 private:
  Kind kind_ = Kind::Number;
  double num_ = 0.0;
  std::string str_;
  std::vector<ConfigNode> items_;
  std::vector<std::pair<std::string, ConfigNode>> entries_;
};

// `key = value` statements with `#` comments; dotted and indexed keys
// (htype.J[0]) are plain strings.  Newlines carry no meaning, so arrays
// and tables may span lines.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  const ConfigNode& at(const std::string& key) const;
  const std::vector<std::pair<std::string, ConfigNode>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, ConfigNode>> entries_;
};

// Model files carry kind = heisenberg | grushin | htype with optional
// dim/rank cross-checks; htype additionally needs htype.k and the
// row-major k x k tables htype.J[0..dim-k-1], htype.S (default identity).
// Unknown keys are rejected.
Model model_from_config(const Config& cfg);
// Shorthand names resolve directly, anything else is read as a file path.
Model model_from_text(const std::string& spec);

// fnv1a64 of the canonical model text, 16 hex digits.
std::string model_hash(const Model& model);

// The provenance block embedded in every report.
JsonValue report_meta(const Model& model, std::uint64_t seed,
                      const std::string& grid);
std::string csv_meta_line(const Model& model, std::uint64_t seed,
                          const std::string& grid);

// Discrete measures as CSV with header q1..qn,weight; weights are
// renormalized to unit mass on read.
DiscreteMeasure read_measure_csv(const std::string& path);
void write_measure_csv(std::ostream& os, const DiscreteMeasure& m);

// Set specification under `prefix` of a config: exactly one of
//   prefix.box    = [[lo1,hi1],...]
//   prefix.ball   = {center = [...], radius = r}
//   prefix.points = [[...], ...]
SetSpec set_spec_from_config(const Config& cfg, const std::string& prefix);

// Gridded density under `prefix`: prefix.box = [[lo1,hi1],...],
// prefix.shape = [c1,...], optional prefix.values (row-major, default 1).
GriddedFunction gridded_from_config(const Config& cfg,
                                    const std::string& prefix);

}  // namespace srdist
