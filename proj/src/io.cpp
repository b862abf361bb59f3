#include "gsw/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace gsw {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const std::string& field, const std::string& source, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw DataError(fmt::format("{}: row {}, column {}: cannot parse '{}' as a number", source, row, col, field));
  }
  if (!std::isfinite(value)) {
    throw DataError(fmt::format("{}: row {}, column {}: non-finite value", source, row, col));
  }
  return value;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  return in;
}

std::string read_all(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::optional<Vectord> Dataset::outcome_sum() const {
  if (has_potential_outcomes()) return Vectord(*a + *b);
  return mu;
}

OutcomeData Dataset::outcomes() const {
  if (!has_potential_outcomes()) {
    throw DataError("this command needs potential outcome columns a and b");
  }
  return make_outcomes(*a, *b);
}

Matrixd read_numeric_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (rows.empty()) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw DataError(
          fmt::format("{}: row {}: expected {} columns, found {} (ragged CSV)", source, row, width, fields.size()));
    }
    std::vector<double> values;
    values.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) values.push_back(parse_number(fields[c], source, row, c + 1));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(fmt::format("{}: no data rows", source));
  Matrixd x(Index(rows.size()), Index(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) x(Index(i), Index(j)) = rows[i][j];
  }
  return x;
}

OutcomeTable read_outcome_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw DataError(fmt::format("{}: missing header row", source));
  for (const auto& name : header) {
    if (name != "a" && name != "b" && name != "mu") {
      throw DataError(fmt::format("{}: unknown outcome column '{}' (expected a, b or mu)", source, name));
    }
    if (std::count(header.begin(), header.end(), name) > 1) {
      throw DataError(fmt::format("{}: duplicate outcome column '{}'", source, name));
    }
  }
  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("{}: row {}: expected {} columns, found {} (ragged CSV)", source, row,
                                  header.size(), fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) cols[c].push_back(parse_number(fields[c], source, row, c + 1));
  }
  OutcomeTable table;
  for (std::size_t c = 0; c < header.size(); ++c) {
    Vectord v = Eigen::Map<const Vectord>(cols[c].data(), Index(cols[c].size()));
    if (header[c] == "a") table.a = std::move(v);
    if (header[c] == "b") table.b = std::move(v);
    if (header[c] == "mu") table.mu = std::move(v);
  }
  if (table.a.has_value() != table.b.has_value()) {
    throw DataError(fmt::format("{}: columns a and b must appear together", source));
  }
  return table;
}

Dataset load_dataset(const std::string& x_path, const std::optional<std::string>& outcomes_path) {
  Dataset ds;
  ds.x_path = x_path;
  {
    const std::string bytes = read_all(x_path);
    ds.x_digest = sha256_hex(bytes);
    std::istringstream in(bytes);
    ds.x = read_numeric_csv(in, x_path);
  }
  if (outcomes_path) {
    ds.outcomes_path = *outcomes_path;
    const std::string bytes = read_all(*outcomes_path);
    ds.outcomes_digest = sha256_hex(bytes);
    std::istringstream in(bytes);
    auto table = read_outcome_csv(in, *outcomes_path);
    const Index n = ds.x.rows();
    for (const auto* col : {&table.a, &table.b, &table.mu}) {
      if (col->has_value() && (*col)->size() != n) {
        throw DataError(fmt::format("{}: {} outcome rows but {} covariate rows", *outcomes_path, (*col)->size(), n));
      }
    }
    if (table.a && table.mu && !((*table.a + *table.b) - *table.mu).isZero(1e-12 * (1.0 + table.mu->norm()))) {
      throw DataError(fmt::format("{}: mu column disagrees with a + b", *outcomes_path));
    }
    ds.a = std::move(table.a);
    ds.b = std::move(table.b);
    ds.mu = std::move(table.mu);
  }
  return ds;
}

void write_assignment(std::ostream& out, const Vectord& z) {
  for (Index i = 0; i < z.size(); ++i) out << (z[i] > 0 ? "1" : "-1") << '\n';
}

Vectord read_assignment(std::istream& in, const std::string& source) {
  const Matrixd grid = read_numeric_csv(in, source);
  if (grid.cols() != 1) throw DataError(fmt::format("{}: assignment file must have exactly one column", source));
  for (Index i = 0; i < grid.rows(); ++i) {
    if (grid(i, 0) != 1.0 && grid(i, 0) != -1.0) {
      throw DataError(fmt::format("{}: row {}: assignment must be 1 or -1", source, i + 1));
    }
  }
  return grid.col(0);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_all(path)); }

std::map<std::string, std::string> parse_config(std::istream& in, const std::string& source) {
  static const std::vector<std::string> kKeys = {"phi", "seed", "replications", "mode", "epsilon_override",
                                                 "freeze_tol"};
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParameterError(fmt::format("{}: line {}: expected key=value", source, row));
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw ParameterError(fmt::format("{}: line {}: unknown config key '{}'", source, row, key));
    }
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError(fmt::format("cannot open config file '{}'", path));
  return parse_config(in, path);
}

namespace {

void collect_nonfinite(const Json& node, const std::string& pointer, std::vector<std::string>& paths) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) collect_nonfinite(value, pointer + "/" + key, paths);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) collect_nonfinite(node[i], pointer + "/" + std::to_string(i), paths);
  } else if (node.is_number_float() && !std::isfinite(node.get<double>())) {
    paths.push_back(pointer);
  }
}

void write_node(std::string& out, const Json& node, int depth) {
  const std::string pad(std::size_t(2 * (depth + 1)), ' ');
  const std::string close_pad(std::size_t(2 * depth), ' ');
  if (node.is_object()) {
    if (node.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (const auto& [key, value] : node.items()) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(key).dump() + ": ";
      write_node(out, value, depth + 1);
    }
    out += "\n" + close_pad + "}";
  } else if (node.is_array()) {
    if (node.empty()) {
      out += "[]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      write_node(out, node[i], depth + 1);
    }
    out += "\n" + close_pad + "]";
  } else if (node.is_number_float()) {
    const double v = node.get<double>();
    out += std::isfinite(v) ? fmt::format("{:.17g}", v) : "null";
  } else {
    out += node.dump();
  }
}

void ensure_parent(const std::filesystem::path& path, bool create_dirs) {
  const auto parent = path.parent_path();
  if (parent.empty() || std::filesystem::exists(parent)) return;
  if (!create_dirs) throw DataError(fmt::format("output directory '{}' does not exist", parent.string()));
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw DataError(fmt::format("cannot create directory '{}': {}", parent.string(), ec.message()));
}

}  // namespace

std::string dump_report(const Json& report) {
  std::vector<std::string> nonfinite;
  collect_nonfinite(report, "", nonfinite);
  std::string out;
  if (!nonfinite.empty() && report.is_object()) {
    Json copy = report;
    Json& warnings = copy["warnings"];
    for (const auto& p : nonfinite) warnings.push_back("non-finite value at " + p + " serialized as null");
    write_node(out, copy, 0);
  } else {
    write_node(out, report, 0);
  }
  out += "\n";
  return out;
}

void write_text_file(const std::string& text, const std::filesystem::path& path, bool create_dirs) {
  ensure_parent(path, create_dirs);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

void emit_report(const Json& report, const std::filesystem::path& path, bool create_dirs) {
  write_text_file(dump_report(report), path, create_dirs);
}

}  // namespace gsw
