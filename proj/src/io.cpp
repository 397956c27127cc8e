#include "bma/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bma/errors.hpp"

#ifndef BMA_VERSION
#define BMA_VERSION "0.0.0"
#endif

namespace bma {

namespace {

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n\"");
  const auto b = s.find_last_not_of(" \t\r\n\"");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where, "not a number: '" + s + "'");
  }
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset", "empty CSV");
  const auto header = split_csv(line);
  if (header.size() < 2 || header.front() != "id") throw ConfigError("dataset:1", "header must start with 'id'");
  std::size_t y_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "y") y_col = c;
  }
  if (y_col == header.size()) throw ConfigError("dataset:1", "missing 'y' column");
  const bool has_obs = y_col + 1 < header.size() && header[y_col + 1] == "observable";
  const std::size_t d = y_col - 1;

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<std::string> obs, ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = "dataset:" + std::to_string(lineno);
    if (cells.size() < y_col + 1 + (has_obs ? 1 : 0)) throw ConfigError(where, "too few columns");
    ids.push_back(cells[0]);
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_double(cells[1 + j], where);
    rows.push_back(std::move(x));
    ys.push_back(parse_double(cells[y_col], where));
    obs.push_back(has_obs ? cells[y_col + 1] : "y");
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  try {
    return Dataset(std::move(X), std::move(y), std::move(obs), std::move(ids));
  } catch (const UsageError& e) {
    throw ConfigError("dataset", e.what());
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open dataset");
  try {
    return read_dataset_csv(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ":" + e.location, e.message);
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "id";
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << ",x" << (j + 1);
  out << ",y,observable\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << data.ids()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << ',' << format_double(data.locations()(i, j));
    out << ',' << format_double(data.values()[i]) << ',' << data.observable()[static_cast<std::size_t>(i)] << '\n';
  }
}

std::map<std::string, double> read_table_csv(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open table");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string(), "empty table");
  const auto header = split_csv(line);
  if (header.size() < 2 || header.front() != "id") throw ConfigError(path.string() + ":1", "header must start with 'id'");
  std::size_t col = 1;
  if (!column.empty()) {
    col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == column) col = c;
    }
    if (col == header.size()) throw ConfigError(path.string() + ":1", "missing column '" + column + "'");
  }
  std::map<std::string, double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() <= col) throw ConfigError(where, "too few columns");
    if (!out.emplace(cells[0], parse_double(cells[col], where)).second) throw ConfigError(where, "duplicate id");
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v < 0 ? "-inf" : "inf";
}

nlohmann::json json_vector(const Eigen::VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
  return a;
}

void OutputBundle::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files_) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw UsageError("cannot write " + (dir / name).string());
    out << content;
  }
}

std::string config_hash(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::string library_version() { return BMA_VERSION; }

nlohmann::json make_manifest(std::uint64_t seed, const nlohmann::json& config, const std::string& command,
                             const OutputBundle& outputs) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, content] : outputs.files()) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(content)));
    files[name] = buf;
  }
  return {{"seed", seed},
          {"config_hash", config_hash(config)},
          {"library_version", library_version()},
          {"rng_version", kRngVersion},
          {"command", command},
          {"files", files}};
}

}  // namespace bma
