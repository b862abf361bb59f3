#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gsw/estimator.hpp"
#include "gsw/linalg.hpp"

namespace gsw {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

/// Covariates plus whichever outcome columns the outcomes file provided.
struct Dataset {
  Matrixd x;
  std::optional<Vectord> a;
  std::optional<Vectord> b;
  std::optional<Vectord> mu;
  std::string x_path;
  std::string outcomes_path;
  std::string x_digest;
  std::string outcomes_digest;

  Index n() const { return x.rows(); }
  Index d() const { return x.cols(); }
  bool has_potential_outcomes() const { return a.has_value() && b.has_value(); }
  /// mu from (a, b) when present, else the mu column.
  std::optional<Vectord> outcome_sum() const;
  /// Requires a and b; throws DataError otherwise.
  OutcomeData outcomes() const;
};

/// Headerless numeric grid. Ragged rows and non-finite values raise DataError
/// naming the row (1-based) and column.
Matrixd read_numeric_csv(std::istream& in, const std::string& source);

/// Outcome table with a header drawn from {a, b, mu}.
struct OutcomeTable {
  std::optional<Vectord> a;
  std::optional<Vectord> b;
  std::optional<Vectord> mu;
};
OutcomeTable read_outcome_csv(std::istream& in, const std::string& source);

Dataset load_dataset(const std::string& x_path, const std::optional<std::string>& outcomes_path);

/// One assignment per line, "1" or "-1".
void write_assignment(std::ostream& out, const Vectord& z);
Vectord read_assignment(std::istream& in, const std::string& source);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Flat key=value configuration; '#' starts a comment. Keys outside
/// {phi, seed, replications, mode, epsilon_override, freeze_tol} raise
/// ParameterError naming the key.
std::map<std::string, std::string> parse_config(std::istream& in, const std::string& source);
std::map<std::string, std::string> load_config_file(const std::string& path);

/// Serializes with insertion-ordered keys, two-space indentation and doubles
/// printed with 17 significant digits. Non-finite numbers become null and are
/// listed under a top-level "warnings" array.
std::string dump_report(const Json& report);

/// Writes dump_report(report) to `path`. Missing parent directories are
/// created unless `create_dirs` is false, in which case DataError is thrown.
void emit_report(const Json& report, const std::filesystem::path& path, bool create_dirs = true);

/// Writes arbitrary text output with the same directory policy.
void write_text_file(const std::string& text, const std::filesystem::path& path, bool create_dirs = true);

}  // namespace gsw
