// records.hpp - run configuration, CSV tables and structured result records.

#pragma once

#include "ptqrm/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace ptqrm {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------- tables

enum class CellKind { integer, real, text };

struct Column {
  std::string name;
  CellKind kind = CellKind::real;
};

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;

  Table() = default;
  explicit Table(std::vector<Column> cols) : columns(std::move(cols)) {}

  void add_row(std::vector<Cell> row);  // checks arity and cell kinds
  std::size_t column_index(const std::string& name) const;
  double real(std::size_t row, const std::string& column) const;  // integer or real cell
  const std::string& text(std::size_t row, const std::string& column) const;
};

// %.17g; nan, inf and -inf spelled out.
std::string format_real(double x);
double parse_real(const std::string& s);

std::string to_csv(const Table& t);
Table parse_csv(const std::string& text, const std::vector<Column>& schema);
// Column kinds inferred: integer if every cell is an integer literal, real if
// every cell parses as a number, text otherwise.
Table parse_csv(const std::string& text);

// Same schema and cell-for-cell identical values (NaN equals NaN).
bool same_content(const Table& a, const Table& b);

nlohmann::json table_to_json(const Table& t);
Table table_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- configuration

struct SweepSpec {
  std::string parameter = "g";
  double start = 0.0;
  double stop = 0.0;
  int count = 2;

  void validate() const;  // count >= 2, finite ends
  std::vector<double> values() const;
};

// "start:stop:count"
SweepSpec parse_range(const std::string& text, const std::string& parameter = "g");

struct RunConfig {
  std::string command;
  ModelParams model;
  TruncationConfig trunc;
  std::vector<SweepSpec> sweeps;  // at most one per parameter
  std::string method;             // empty: the command's default method set
  std::string format = "table";
  std::string out_dir = ".";
  std::map<std::string, double> options;       // command-specific numeric settings
  std::map<std::string, std::string> choices;  // command-specific named settings

  const SweepSpec* find_sweep(const std::string& parameter) const;
  void validate() const;
  nlohmann::json to_json() const;  // out_dir is not part of the content
  static RunConfig from_json(const nlohmann::json& j);
};

std::uint64_t fnv1a64(const std::string& bytes);
// 16 hex digits of FNV-1a over the canonical JSON of the configuration.
std::string config_hash(const RunConfig& cfg);

struct ResultRecord {
  RunConfig config;
  std::string config_hash;
  std::string timestamp;  // UTC ISO-8601
  std::map<std::string, std::string> versions;
  std::vector<std::string> methods;  // provenance tags
  nlohmann::json payload;

  nlohmann::json metadata_json() const;
  nlohmann::json to_json() const;
  static ResultRecord from_json(const nlohmann::json& j);
};

ResultRecord make_record(const RunConfig& cfg, nlohmann::json payload, std::vector<std::string> methods);

// NaN entries become null and back.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

// Creates parent directories; throws ConfigError when the file cannot be written.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace ptqrm
