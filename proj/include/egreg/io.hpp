#pragma once

// File formats used by the command-line tool: comma-separated tables with a
// header row, JSON model files, JSON study configurations and run manifests.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "egreg/estimators.hpp"
#include "egreg/matrixcore.hpp"
#include "egreg/simharness.hpp"

namespace egreg::io {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;  ///< rows x header.size()

  /// Column position of `name`; throws UsageError when absent.
  Index column(const std::string& name) const;
  MatrixXd columns(const std::vector<std::string>& names) const;
};

/// Parses a header row followed by numeric rows. Errors name the source and line.
CsvTable parse_csv(std::istream& in, const std::string& source = "<input>");
CsvTable read_csv(const std::string& path);

/// Shortest decimal form with 17 significant digits, so that parsing it back
/// reproduces the double exactly.
std::string format_double(double v);

void write_csv(std::ostream& out, const std::vector<std::string>& header, const MatrixXd& values);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const MatrixXd& values);

/// Splits a table into predictors (every column not listed) and responses.
struct LabeledData {
  Datasetd data;
  std::vector<std::string> predictors;
  std::vector<std::string> responses;
};

LabeledData split_response(const CsvTable& table, const std::vector<std::string>& responses);

/// A fitted model with the column names it was trained on.
struct ModelFile {
  FittedModeld model;
  std::vector<std::string> predictors;
  std::vector<std::string> responses;
};

nlohmann::json model_to_json(const ModelFile& m);
ModelFile model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ModelFile& m);
ModelFile load_model(const std::string& path);

/// Keys accepted in a study configuration, in schema order.
const std::vector<std::string>& study_config_keys();
/// The published JSON schema for study configurations.
nlohmann::json study_config_schema();
/// Validates against the schema (unknown keys, missing required keys, types)
/// and fills in the study's defaults. Throws UsageError listing every problem.
sim::StudyConfig parse_study_config(const nlohmann::json& j);
sim::StudyConfig read_study_config(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string read_file(const std::string& path);

struct RunManifest {
  std::string command;
  std::string digest;  ///< FNV-1a over the arguments and the bytes of every input file
  std::uint64_t seed = 0;
  std::string version;
  double wall_clock_seconds = 0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

}  // namespace egreg::io
