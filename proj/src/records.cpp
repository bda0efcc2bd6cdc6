#include "ptqrm/records.hpp"

#include "ptqrm/errors.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace ptqrm {

using nlohmann::json;

namespace {

CellKind kind_of(const Cell& c) {
  switch (c.index()) {
    case 0: return CellKind::integer;
    case 1: return CellKind::real;
    default: return CellKind::text;
  }
}

const char* kind_name(CellKind k) {
  switch (k) {
    case CellKind::integer: return "integer";
    case CellKind::real: return "real";
    case CellKind::text: return "text";
  }
  return "text";
}

CellKind kind_from_name(const std::string& s) {
  if (s == "integer") return CellKind::integer;
  if (s == "real") return CellKind::real;
  if (s == "text") return CellKind::text;
  throw ConfigError("unknown column kind '" + s + "'");
}

bool is_integer_literal(const std::string& s) {
  std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

bool is_real_literal(const std::string& s) {
  if (s == "nan" || s == "inf" || s == "-inf") return true;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool pending = false;  // something seen on the current line
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      pending = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      pending = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (pending || !field.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
      }
      fields.clear();
      field.clear();
      pending = false;
    } else {
      field += c;
      pending = true;
    }
  }
  if (quoted) throw ConfigError("csv: unterminated quoted field");
  if (pending || !field.empty()) {
    fields.push_back(std::move(field));
    records.push_back(std::move(fields));
  }
  return records;
}

Cell parse_cell(const std::string& s, CellKind kind) {
  switch (kind) {
    case CellKind::integer: {
      long long v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("csv: bad integer '" + s + "'");
      return v;
    }
    case CellKind::real: return parse_real(s);
    case CellKind::text: return s;
  }
  return s;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json real_to_json(double x) {
  if (std::isfinite(x)) return x;
  return format_real(x);
}

double real_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) return parse_real(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

// ---------------------------------------------------------------- tables

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw ConfigError("table: row arity does not match the columns");
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (kind_of(row[k]) == columns[k].kind) continue;
    if (columns[k].kind == CellKind::real && kind_of(row[k]) == CellKind::integer) {
      row[k] = static_cast<double>(std::get<long long>(row[k]));
      continue;
    }
    throw ConfigError("table: cell kind mismatch in column '" + columns[k].name + "'");
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column_index(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k].name == name) return k;
  }
  throw ConfigError("table: no column '" + name + "'");
}

double Table::real(std::size_t row, const std::string& column) const {
  const Cell& c = rows.at(row).at(column_index(column));
  if (const auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  throw ConfigError("table: column '" + column + "' is not numeric");
}

const std::string& Table::text(std::size_t row, const std::string& column) const {
  const Cell& c = rows.at(row).at(column_index(column));
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  throw ConfigError("table: column '" + column + "' is not text");
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad real number '" + s + "'");
  return v;
}

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t k = 0; k < t.columns.size(); ++k) {
    if (k) out += ',';
    out += quote_field(t.columns[k].name);
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, long long>) out += std::to_string(v);
            else if constexpr (std::is_same_v<V, double>) out += format_real(v);
            else out += quote_field(v);
          },
          row[k]);
    }
    out += '\n';
  }
  return out;
}

Table parse_csv(const std::string& text, const std::vector<Column>& schema) {
  const auto records = split_csv(text);
  if (records.empty()) throw ConfigError("csv: missing header");
  const auto& header = records.front();
  if (header.size() != schema.size()) throw ConfigError("csv: header does not match the schema");
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] != schema[k].name) throw ConfigError("csv: unexpected column '" + header[k] + "'");
  }
  Table t(schema);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != schema.size()) throw ConfigError("csv: ragged row " + std::to_string(r));
    std::vector<Cell> row;
    for (std::size_t k = 0; k < schema.size(); ++k) row.push_back(parse_cell(records[r][k], schema[k].kind));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table parse_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty()) throw ConfigError("csv: missing header");
  std::vector<Column> schema;
  for (std::size_t k = 0; k < records.front().size(); ++k) {
    bool integer = true;
    bool real = true;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (k >= records[r].size()) throw ConfigError("csv: ragged row " + std::to_string(r));
      integer = integer && is_integer_literal(records[r][k]);
      real = real && is_real_literal(records[r][k]);
    }
    const CellKind kind = integer && records.size() > 1 ? CellKind::integer
                          : real ? CellKind::real : CellKind::text;
    schema.push_back({records.front()[k], kind});
  }
  return parse_csv(text, schema);
}

bool same_content(const Table& a, const Table& b) {
  if (a.columns.size() != b.columns.size() || a.rows.size() != b.rows.size()) return false;
  for (std::size_t k = 0; k < a.columns.size(); ++k) {
    if (a.columns[k].name != b.columns[k].name || a.columns[k].kind != b.columns[k].kind) return false;
  }
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    for (std::size_t k = 0; k < a.columns.size(); ++k) {
      const Cell& x = a.rows[r][k];
      const Cell& y = b.rows[r][k];
      if (x.index() != y.index()) return false;
      if (const auto* dx = std::get_if<double>(&x)) {
        const double dy = std::get<double>(y);
        if (!(*dx == dy || (std::isnan(*dx) && std::isnan(dy)))) return false;
      } else if (x != y) {
        return false;
      }
    }
  }
  return true;
}

json table_to_json(const Table& t) {
  json cols = json::array();
  for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}});
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& cell : row) {
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) r.push_back(real_to_json(v));
            else r.push_back(v);
          },
          cell);
    }
    rows.push_back(std::move(r));
  }
  return {{"columns", cols}, {"rows", rows}};
}

Table table_from_json(const json& j) {
  std::vector<Column> cols;
  for (const auto& c : j.at("columns")) {
    cols.push_back({c.at("name").get<std::string>(), kind_from_name(c.at("kind").get<std::string>())});
  }
  Table t(cols);
  for (const auto& r : j.at("rows")) {
    if (r.size() != cols.size()) throw ConfigError("table json: ragged row");
    std::vector<Cell> row;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      switch (cols[k].kind) {
        case CellKind::integer: row.emplace_back(r[k].get<long long>()); break;
        case CellKind::real: row.emplace_back(real_from_json(r[k])); break;
        case CellKind::text: row.emplace_back(r[k].get<std::string>()); break;
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------- configuration

void SweepSpec::validate() const {
  if (count < 2) throw ConfigError("sweep over " + parameter + ": count must be >= 2");
  if (!std::isfinite(start) || !std::isfinite(stop)) throw ConfigError("sweep over " + parameter + ": non-finite bounds");
}

std::vector<double> SweepSpec::values() const {
  validate();
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    v[static_cast<std::size_t>(k)] = k == count - 1 ? stop : start + (stop - start) * k / (count - 1);
  }
  return v;
}

SweepSpec parse_range(const std::string& text, const std::string& parameter) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos || text.find(':', b + 1) != std::string::npos) {
    throw ConfigError("range '" + text + "' must be start:stop:count");
  }
  SweepSpec s;
  s.parameter = parameter;
  try {
    s.start = parse_real(text.substr(0, a));
    s.stop = parse_real(text.substr(a + 1, b - a - 1));
  } catch (const ConfigError&) {
    throw ConfigError("range '" + text + "': bad bound");
  }
  const std::string c = text.substr(b + 1);
  if (!is_integer_literal(c)) throw ConfigError("range '" + text + "': bad count");
  s.count = std::stoi(c);
  s.validate();
  return s;
}

const SweepSpec* RunConfig::find_sweep(const std::string& parameter) const {
  for (const auto& s : sweeps) {
    if (s.parameter == parameter) return &s;
  }
  return nullptr;
}

void RunConfig::validate() const {
  model.validate();
  trunc.validate();
  for (std::size_t k = 0; k < sweeps.size(); ++k) {
    sweeps[k].validate();
    for (std::size_t l = 0; l < k; ++l) {
      if (sweeps[l].parameter == sweeps[k].parameter) throw ConfigError("duplicate sweep over " + sweeps[k].parameter);
    }
  }
  if (format != "table" && format != "structured") throw ConfigError("format must be table or structured");
  if (!method.empty() && method != "ed" && method != "aa" && method != "caa" && method != "gfunc") {
    throw ConfigError("method must be one of ed, aa, caa, gfunc");
  }
}

json RunConfig::to_json() const {
  json j;
  j["command"] = command;
  j["model"] = {{"delta", model.delta},
                {"epsilon", model.epsilon},
                {"g", model.g},
                {"omega", model.omega},
                {"bias", model.bias == BiasKind::imaginary ? "imaginary" : "real"}};
  j["truncation"] = {{"n_fock", trunc.n_fock},
                     {"n_series", trunc.n_series},
                     {"series_tol", trunc.series_tol},
                     {"eig_tol", trunc.eig_tol},
                     {"cond_limit", trunc.cond_limit}};
  j["sweeps"] = json::array();
  for (const auto& s : sweeps) {
    j["sweeps"].push_back({{"parameter", s.parameter}, {"start", s.start}, {"stop", s.stop}, {"count", s.count}});
  }
  j["method"] = method;
  j["format"] = format;
  j["options"] = options;
  j["choices"] = choices;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  const auto& m = j.at("model");
  c.model.delta = m.at("delta").get<double>();
  c.model.epsilon = m.at("epsilon").get<double>();
  c.model.g = m.at("g").get<double>();
  c.model.omega = m.at("omega").get<double>();
  const auto bias = m.at("bias").get<std::string>();
  if (bias != "imaginary" && bias != "real") throw ConfigError("bias must be imaginary or real");
  c.model.bias = bias == "imaginary" ? BiasKind::imaginary : BiasKind::real;
  const auto& t = j.at("truncation");
  c.trunc.n_fock = t.at("n_fock").get<int>();
  c.trunc.n_series = t.at("n_series").get<int>();
  c.trunc.series_tol = t.at("series_tol").get<double>();
  c.trunc.eig_tol = t.at("eig_tol").get<double>();
  c.trunc.cond_limit = t.at("cond_limit").get<double>();
  for (const auto& s : j.at("sweeps")) {
    c.sweeps.push_back(SweepSpec{s.at("parameter").get<std::string>(), s.at("start").get<double>(),
                                 s.at("stop").get<double>(), s.at("count").get<int>()});
  }
  c.method = j.at("method").get<std::string>();
  c.format = j.at("format").get<std::string>();
  c.options = j.at("options").get<std::map<std::string, double>>();
  c.choices = j.at("choices").get<std::map<std::string, std::string>>();
  return c;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.to_json().dump())));
  return buf;
}

json ResultRecord::metadata_json() const {
  return {{"config", config.to_json()},
          {"config_hash", config_hash},
          {"timestamp", timestamp},
          {"versions", versions},
          {"methods", methods}};
}

json ResultRecord::to_json() const {
  json j = metadata_json();
  j["payload"] = payload;
  return j;
}

ResultRecord ResultRecord::from_json(const json& j) {
  ResultRecord r;
  r.config = RunConfig::from_json(j.at("config"));
  r.config_hash = j.at("config_hash").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.versions = j.at("versions").get<std::map<std::string, std::string>>();
  r.methods = j.at("methods").get<std::vector<std::string>>();
  r.payload = j.value("payload", json());
  return r;
}

ResultRecord make_record(const RunConfig& cfg, json payload, std::vector<std::string> methods) {
  ResultRecord r;
  r.config = cfg;
  r.config_hash = config_hash(cfg);
  r.timestamp = utc_now();
  for (const char* m : {"model-core", "boa-gfunction", "approx", "dynamics", "metrology", "cli"}) {
    r.versions[m] = kVersion;
  }
  r.methods = std::move(methods);
  r.payload = std::move(payload);
  return r;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (std::isnan(m(i, k))) r.push_back(nullptr);
      else r.push_back(real_to_json(m(i, k)));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto nr = static_cast<Eigen::Index>(j.size());
  const auto nc = nr ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != nc) throw ConfigError("matrix json: ragged row");
    for (Eigen::Index k = 0; k < nc; ++k) m(i, k) = real_from_json(r[static_cast<std::size_t>(k)]);
  }
  return m;
}

void write_text_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw ConfigError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
  if (!out) throw ConfigError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ptqrm
