#pragma once

// CSV and JSON plumbing shared by the experiments, the pipeline and the CLI.

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bma/model.hpp"

namespace bma {

/// Header `id,x1,...,xd,y,observable`; the observable column is optional
/// (defaults to "y").
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// CSV keyed by an `id` column; returns id -> value of `column`
/// (the second column when empty).
std::map<std::string, double> read_table_csv(const std::filesystem::path& path, const std::string& column = {});

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// JSON number, or "inf"/"-inf"/"nan" strings for non-finite values.
nlohmann::json json_number(double v);
nlohmann::json json_vector(const Eigen::VectorXd& v);

/// Output files of one run, written together at the end.
class OutputBundle {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  void add_json(const std::string& name, const nlohmann::json& j) { files_[name] = j.dump(2) + "\n"; }
  [[nodiscard]] const std::map<std::string, std::string>& files() const { return files_; }
  [[nodiscard]] bool has(const std::string& name) const { return files_.count(name) != 0; }
  [[nodiscard]] const std::string& at(const std::string& name) const { return files_.at(name); }
  /// Writes every file under `dir`, creating it if needed.
  void write(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> files_;
};

/// Hex FNV-1a of the compact (sorted-key) JSON dump.
std::string config_hash(const nlohmann::json& j);

/// manifest.json: seed, config hash, library/RNG versions, command and a
/// content hash per output file.
nlohmann::json make_manifest(std::uint64_t seed, const nlohmann::json& config, const std::string& command,
                             const OutputBundle& outputs);

std::string library_version();

}  // namespace bma
