#include "srdist/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace srdist {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON

JsonValue JsonValue::boolean(bool b) {
  JsonValue v;
  v.kind_ = Kind::Bool;
  v.bool_ = b;
  return v;
}

JsonValue JsonValue::number(double x) {
  JsonValue v;
  v.kind_ = Kind::Number;
  v.num_ = x;
  return v;
}

JsonValue JsonValue::integer(long long x) {
  JsonValue v;
  v.kind_ = Kind::Integer;
  v.int_ = x;
  return v;
}

JsonValue JsonValue::string(std::string s) {
  JsonValue v;
  v.kind_ = Kind::String;
  v.str_ = std::move(s);
  return v;
}

JsonValue JsonValue::array() {
  JsonValue v;
  v.kind_ = Kind::Array;
  return v;
}

JsonValue JsonValue::object() {
  JsonValue v;
  v.kind_ = Kind::Object;
  return v;
}

JsonValue& JsonValue::push(JsonValue v) {
  if (kind_ != Kind::Array) throw InputError("json: push on a non-array");
  items_.push_back(std::move(v));
  return *this;
}

JsonValue& JsonValue::set(std::string key, JsonValue v) {
  if (kind_ != Kind::Object) throw InputError("json: set on a non-object");
  for (auto& e : entries_)
    if (e.first == key) {
      e.second = std::move(v);
      return *this;
    }
  entries_.emplace_back(std::move(key), std::move(v));
  return *this;
}

namespace {

void append_json_string(std::string& out, const std::string& s) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

}  // namespace

void JsonValue::write(std::string& out, int indent, int depth) const {
  const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
  switch (kind_) {
    case Kind::Null:
      out += "null";
      break;
    case Kind::Bool:
      out += bool_ ? "true" : "false";
      break;
    case Kind::Number:
      if (std::isfinite(num_))
        out += format_double(num_);
      else
        out += "null";
      break;
    case Kind::Integer: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%lld", int_);
      out += buf;
      break;
    }
    case Kind::String:
      append_json_string(out, str_);
      break;
    case Kind::Array: {
      if (items_.empty()) {
        out += "[]";
        break;
      }
      bool flat = true;
      for (const JsonValue& v : items_) flat = flat && v.scalar();
      out += '[';
      for (std::size_t i = 0; i < items_.size(); ++i) {
        if (flat) {
          if (i) out += ", ";
        } else {
          out += i ? ",\n" : "\n";
          out += pad;
        }
        items_[i].write(out, indent, depth + 1);
      }
      if (!flat) {
        out += '\n';
        out += close_pad;
      }
      out += ']';
      break;
    }
    case Kind::Object: {
      if (entries_.empty()) {
        out += "{}";
        break;
      }
      out += '{';
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        out += i ? ",\n" : "\n";
        out += pad;
        append_json_string(out, entries_[i].first);
        out += ": ";
        entries_[i].second.write(out, indent, depth + 1);
      }
      out += '\n';
      out += close_pad;
      out += '}';
      break;
    }
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  write(out, indent, 0);
  out += '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Config files

double ConfigNode::number() const {
  if (kind_ != Kind::Number) throw InputError("config: expected a number");
  return num_;
}

long long ConfigNode::integer() const {
  double v = number();
  long long n = static_cast<long long>(v);
  if (static_cast<double>(n) != v)
    throw InputError("config: expected an integer");
  return n;
}

const std::string& ConfigNode::text() const {
  if (kind_ != Kind::String) throw InputError("config: expected a string");
  return str_;
}

const std::vector<ConfigNode>& ConfigNode::items() const {
  if (kind_ != Kind::Array) throw InputError("config: expected an array");
  return items_;
}

const std::vector<std::pair<std::string, ConfigNode>>& ConfigNode::entries()
    const {
  if (kind_ != Kind::Table) throw InputError("config: expected a table");
  return entries_;
}

const ConfigNode* ConfigNode::find(const std::string& key) const {
  for (const auto& e : entries())
    if (e.first == key) return &e.second;
  return nullptr;
}

VectorXd ConfigNode::vector() const {
  const auto& arr = items();
  VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].number();
  return v;
}

std::vector<double> ConfigNode::numbers() const {
  const auto& arr = items();
  std::vector<double> v;
  v.reserve(arr.size());
  for (const ConfigNode& n : arr) v.push_back(n.number());
  return v;
}

namespace {

struct Lexer {
  const std::string& text;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < text.size()) {
      char c = text[pos];
      if (c == '#') {
        while (pos < text.size() && text[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  bool done() {
    skip_space();
    return pos >= text.size();
  }

  char peek() {
    skip_space();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool consume(char c) {
    if (peek() != c) return false;
    ++pos;
    return true;
  }

  void expect(char c) {
    if (!consume(c))
      throw InputError(std::string("config: expected '") + c + "' at offset " +
                       std::to_string(pos));
  }

  static bool atom_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '#' &&
           c != '=' && c != ',' && c != '"' && c != '{' && c != '}' &&
           c != '(' && c != ')';
  }

  static bool key_atom_char(char c) { return atom_char(c); }
  static bool value_atom_char(char c) {
    return atom_char(c) && c != '[' && c != ']';
  }

  std::string quoted() {
    ++pos;  // opening quote
    std::string s;
    while (pos < text.size() && text[pos] != '"') s += text[pos++];
    if (pos >= text.size()) throw InputError("config: unterminated string");
    ++pos;
    return s;
  }

  std::string atom(bool key) {
    skip_space();
    std::size_t start = pos;
    while (pos < text.size() &&
           (key ? key_atom_char(text[pos]) : value_atom_char(text[pos])))
      ++pos;
    if (pos == start)
      throw InputError("config: expected a value at offset " +
                       std::to_string(pos));
    return text.substr(start, pos - start);
  }
};

ConfigNode parse_value(Lexer& lx);

ConfigNode parse_table(Lexer& lx) {
  std::vector<std::pair<std::string, ConfigNode>> entries;
  lx.expect('{');
  while (!lx.consume('}')) {
    std::string key = lx.peek() == '"' ? lx.quoted() : lx.atom(true);
    lx.expect('=');
    entries.emplace_back(std::move(key), parse_value(lx));
    lx.consume(',');
  }
  return ConfigNode::table_node(std::move(entries));
}

ConfigNode parse_array(Lexer& lx) {
  std::vector<ConfigNode> items;
  lx.expect('[');
  while (!lx.consume(']')) {
    items.push_back(parse_value(lx));
    lx.consume(',');
  }
  return ConfigNode::array_node(std::move(items));
}

ConfigNode parse_value(Lexer& lx) {
  char c = lx.peek();
  if (c == '[') return parse_array(lx);
  if (c == '{') return parse_table(lx);
  if (c == '"') return ConfigNode::string_node(lx.quoted());
  std::string word = lx.atom(false);
  char* end = nullptr;
  double v = std::strtod(word.c_str(), &end);
  if (end && *end == '\0') return ConfigNode::number_node(v);
  return ConfigNode::string_node(std::move(word));
}

}  // namespace

ConfigNode ConfigNode::number_node(double v) {
  ConfigNode n;
  n.kind_ = Kind::Number;
  n.num_ = v;
  return n;
}

ConfigNode ConfigNode::string_node(std::string s) {
  ConfigNode n;
  n.kind_ = Kind::String;
  n.str_ = std::move(s);
  return n;
}

ConfigNode ConfigNode::array_node(std::vector<ConfigNode> items) {
  ConfigNode n;
  n.kind_ = Kind::Array;
  n.items_ = std::move(items);
  return n;
}

ConfigNode ConfigNode::table_node(
    std::vector<std::pair<std::string, ConfigNode>> entries) {
  ConfigNode n;
  n.kind_ = Kind::Table;
  n.entries_ = std::move(entries);
  return n;
}

Config Config::parse(const std::string& text) {
  Config cfg;
  Lexer lx{text};
  while (!lx.done()) {
    std::string key = lx.peek() == '"' ? lx.quoted() : lx.atom(true);
    lx.expect('=');
    ConfigNode value = parse_value(lx);
    for (const auto& e : cfg.entries_)
      if (e.first == key) throw InputError("config: duplicate key " + key);
    cfg.entries_.emplace_back(std::move(key), std::move(value));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool Config::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return true;
  return false;
}

const ConfigNode& Config::at(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  throw InputError("config: missing key " + key);
}

// ---------------------------------------------------------------------------
// Models from files

namespace {

MatrixXd square_matrix_from(const ConfigNode& node, int k,
                            const std::string& what) {
  std::vector<double> vals = node.numbers();
  if (static_cast<int>(vals.size()) != k * k)
    throw InputError("model: " + what + " needs " + std::to_string(k * k) +
                     " row-major entries");
  MatrixXd m(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = vals[i * k + j];
  return m;
}

}  // namespace

Model model_from_config(const Config& cfg) {
  std::vector<std::string> known{"kind", "dim", "rank"};
  std::string kind = cfg.at("kind").text();
  Model model = Model::heisenberg3();
  if (kind == "heisenberg" || kind == "heisenberg3") {
    model = Model::heisenberg3();
  } else if (kind == "grushin" || kind == "grushin2") {
    model = Model::grushin2();
  } else if (kind == "htype") {
    int n = static_cast<int>(cfg.at("dim").integer());
    int k = static_cast<int>(cfg.at("htype.k").integer());
    known.push_back("htype.k");
    if (n <= k || k <= 0) throw InputError("model: htype needs 0 < k < dim");
    std::vector<MatrixXd> J;
    for (int a = 0; a < n - k; ++a) {
      std::string key = "htype.J[" + std::to_string(a) + "]";
      J.push_back(square_matrix_from(cfg.at(key), k, key));
      known.push_back(key);
    }
    MatrixXd S = MatrixXd::Identity(k, k);
    if (cfg.has("htype.S")) {
      S = square_matrix_from(cfg.at("htype.S"), k, "htype.S");
      known.push_back("htype.S");
    }
    model = Model::htype(n, k, std::move(J), std::move(S));
  } else {
    throw InputError("model: unknown kind " + kind);
  }
  if (cfg.has("dim") && cfg.at("dim").integer() != model.dim())
    throw InputError("model: dim does not match kind");
  if (cfg.has("rank") && cfg.at("rank").integer() != model.rank())
    throw InputError("model: rank does not match kind");
  for (const auto& e : cfg.entries()) {
    bool ok = false;
    for (const std::string& k : known) ok = ok || e.first == k;
    if (!ok) throw InputError("model: unknown key " + e.first);
  }
  return model;
}

Model model_from_text(const std::string& spec) {
  if (spec == "heisenberg" || spec == "heisenberg3")
    return Model::heisenberg3();
  if (spec == "grushin" || spec == "grushin2") return Model::grushin2();
  return model_from_config(Config::load(spec));
}

std::string model_hash(const Model& model) {
  std::uint64_t h = fnv1a64(model.canonical_text());
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

JsonValue report_meta(const Model& model, std::uint64_t seed,
                      const std::string& grid) {
  JsonValue meta = JsonValue::object();
  meta.set("version", JsonValue::string(kToolVersion));
  meta.set("model", JsonValue::string(model.name()));
  meta.set("model_hash", JsonValue::string(model_hash(model)));
  meta.set("seed", JsonValue::integer(static_cast<long long>(seed)));
  meta.set("grid", JsonValue::string(grid));
  return meta;
}

std::string csv_meta_line(const Model& model, std::uint64_t seed,
                          const std::string& grid) {
  std::ostringstream os;
  os << "# version=" << kToolVersion << " model=" << model.name()
     << " model_hash=" << model_hash(model) << " seed=" << seed
     << " grid=\"" << grid << "\"";
  return os.str();
}

// ---------------------------------------------------------------------------
// Measures as CSV

DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("measure csv: cannot open " + path);
  std::string line;
  int dim = -1;
  std::vector<VectorXd> pts;
  std::vector<double> ws;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (!header_seen) {
      header_seen = true;
      if (fields.empty() || fields.back() != "weight")
        throw InputError("measure csv: header must end with 'weight'");
      dim = static_cast<int>(fields.size()) - 1;
      if (dim < 1) throw InputError("measure csv: no coordinate columns");
      continue;
    }
    if (static_cast<int>(fields.size()) != dim + 1)
      throw InputError("measure csv: row width does not match header");
    VectorXd q(dim);
    for (int i = 0; i < dim; ++i) {
      char* end = nullptr;
      q[i] = std::strtod(fields[i].c_str(), &end);
      if (!end || *end != '\0')
        throw InputError("measure csv: bad number " + fields[i]);
    }
    char* end = nullptr;
    double w = std::strtod(fields[dim].c_str(), &end);
    if (!end || *end != '\0' || w < 0)
      throw InputError("measure csv: bad weight " + fields[dim]);
    pts.push_back(q);
    ws.push_back(w);
  }
  if (pts.empty()) throw InputError("measure csv: no rows in " + path);
  DiscreteMeasure m;
  m.support = std::move(pts);
  m.weights = Eigen::Map<VectorXd>(ws.data(), ws.size());
  double total = m.weights.sum();
  if (total <= 0) throw InputError("measure csv: zero total mass");
  m.weights /= total;
  m.validate();
  return m;
}

void write_measure_csv(std::ostream& os, const DiscreteMeasure& m) {
  m.validate();
  int dim = static_cast<int>(m.support.front().size());
  for (int i = 0; i < dim; ++i) os << 'q' << i + 1 << ',';
  os << "weight\n";
  for (std::size_t r = 0; r < m.support.size(); ++r) {
    for (int i = 0; i < dim; ++i) os << format_double(m.support[r][i]) << ',';
    os << format_double(m.weights[r]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Set specifications and gridded densities

SetSpec set_spec_from_config(const Config& cfg, const std::string& prefix) {
  if (cfg.has(prefix + ".box")) {
    const auto& rows = cfg.at(prefix + ".box").items();
    VectorXd lo(rows.size()), hi(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      VectorXd pair = rows[i].vector();
      if (pair.size() != 2)
        throw InputError("set: box rows must be [lo, hi] pairs");
      lo[i] = pair[0];
      hi[i] = pair[1];
    }
    return SetSpec::box(lo, hi);
  }
  if (cfg.has(prefix + ".ball")) {
    const ConfigNode& ball = cfg.at(prefix + ".ball");
    const ConfigNode* center = ball.find("center");
    const ConfigNode* radius = ball.find("radius");
    if (!center || !radius)
      throw InputError("set: ball needs center and radius");
    if (ball.entries().size() != 2)
      throw InputError("set: ball accepts only center and radius");
    return SetSpec::ball(center->vector(), radius->number());
  }
  if (cfg.has(prefix + ".points")) {
    std::vector<VectorXd> pts;
    for (const ConfigNode& row : cfg.at(prefix + ".points").items())
      pts.push_back(row.vector());
    return SetSpec::point_list(std::move(pts));
  }
  throw InputError("set: " + prefix + " needs .box, .ball, or .points");
}

GriddedFunction gridded_from_config(const Config& cfg,
                                    const std::string& prefix) {
  const auto& rows = cfg.at(prefix + ".box").items();
  VectorXd lo(rows.size()), hi(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    VectorXd pair = rows[i].vector();
    if (pair.size() != 2)
      throw InputError("density: box rows must be [lo, hi] pairs");
    lo[i] = pair[0];
    hi[i] = pair[1];
  }
  std::vector<double> shape_d = cfg.at(prefix + ".shape").numbers();
  std::vector<int> shape;
  long long cells = 1;
  for (double s : shape_d) {
    int c = static_cast<int>(s);
    if (c <= 0 || static_cast<double>(c) != s)
      throw InputError("density: shape entries must be positive integers");
    shape.push_back(c);
    cells *= c;
  }
  if (shape.size() != rows.size())
    throw InputError("density: shape and box rank differ");
  GriddedFunction f = GriddedFunction::indicator_box(lo, hi, shape);
  if (cfg.has(prefix + ".values")) {
    std::vector<double> vals = cfg.at(prefix + ".values").numbers();
    if (static_cast<long long>(vals.size()) != cells)
      throw InputError("density: values length does not match shape");
    f.values = std::move(vals);
  }
  return f;
}

}  // namespace srdist
