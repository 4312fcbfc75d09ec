#include "egreg/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>

namespace egreg::io {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string("model field '") + field + "' must be an array");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError(std::string("model field '") + field + "' is not rectangular");
    }
    for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json row_to_json(const RowVectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

RowVectorXd row_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  RowVectorXd r(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Index>(i)) = v[i];
  return r;
}

}  // namespace

Index CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Index>(i);
  }
  throw UsageError("column '" + name + "' not found in table header");
}

MatrixXd CsvTable::columns(const std::vector<std::string>& names) const {
  MatrixXd m(values.rows(), static_cast<Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) m.col(static_cast<Index>(k)) = values.col(column(names[k]));
  return m;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (const std::string& f : fields) {
        const std::string name = unquote(f);
        if (name.empty()) {
          throw ParseError(source + ":" + std::to_string(line_no) + ": empty column name");
        }
        if (!seen.insert(name).second) {
          throw ParseError(source + ":" + std::to_string(line_no) + ": duplicate column '" +
                           name + "'");
        }
        t.header.push_back(name);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const std::string& f = fields[k];
      char* end = nullptr;
      errno = 0;
      const double v = f.empty() ? 0.0 : std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size() || !std::isfinite(v)) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": column '" + t.header[k] +
                         "': '" + f + "' is not a finite number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(source + ": empty file, no header row");
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return parse_csv(in, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const MatrixXd& values) {
  if (static_cast<Index>(header.size()) != values.cols()) {
    throw ShapeError("CSV header and value matrix disagree on the column count");
  }
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_csv(out, header, values);
  if (!out) throw Error("failed writing '" + path + "'");
}

LabeledData split_response(const CsvTable& table, const std::vector<std::string>& responses) {
  if (responses.empty()) throw UsageError("at least one response column is required");
  std::set<std::string> resp(responses.begin(), responses.end());
  for (const std::string& r : responses) table.column(r);
  LabeledData out;
  out.responses = responses;
  for (const std::string& h : table.header) {
    if (!resp.count(h)) out.predictors.push_back(h);
  }
  if (out.predictors.empty()) throw UsageError("table has no predictor columns");
  out.data = Datasetd(table.columns(out.predictors), table.columns(out.responses));
  return out;
}

json model_to_json(const ModelFile& m) {
  const FittedModeld& f = m.model;
  json params = json::object();
  if (f.params.d) params["d"] = *f.params.d;
  if (f.params.u) params["u"] = *f.params.u;
  if (f.params.lambda) params["lambda"] = *f.params.lambda;
  if (f.params.components) params["components"] = *f.params.components;
  json j;
  j["format"] = "egreg-model";
  j["version"] = kModelFormatVersion;
  j["method"] = std::string(method_name(f.method));
  j["params"] = params;
  j["predictors"] = m.predictors;
  j["responses"] = m.responses;
  j["beta"] = matrix_to_json(f.beta);
  j["gamma_hat"] = matrix_to_json(f.gamma_hat);
  j["transform"] = {{"x_mean", row_to_json(f.transform.x_mean)},
                    {"x_scale", row_to_json(f.transform.x_scale)},
                    {"y_mean", row_to_json(f.transform.y_mean)},
                    {"y_scale", row_to_json(f.transform.y_scale)}};
  j["zero_score_limit"] = f.zero_score_limit;
  j["early_stop"] = f.early_stop;
  return j;
}

ModelFile model_from_json(const json& j) {
  try {
    if (j.value("format", "") != "egreg-model") throw ParseError("not an egreg model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format version " + std::to_string(version));
    }
    ModelFile m;
    const auto method = parse_method(j.at("method").get<std::string>());
    if (!method) throw ParseError("model file names an unknown method");
    m.model.method = *method;
    const json& params = j.at("params");
    if (params.contains("d")) m.model.params.d = params["d"].get<Index>();
    if (params.contains("u")) m.model.params.u = params["u"].get<Index>();
    if (params.contains("lambda")) m.model.params.lambda = params["lambda"].get<double>();
    if (params.contains("components")) {
      m.model.params.components = params["components"].get<Index>();
    }
    m.predictors = j.at("predictors").get<std::vector<std::string>>();
    m.responses = j.at("responses").get<std::vector<std::string>>();
    m.model.beta = matrix_from_json(j.at("beta"), "beta");
    m.model.gamma_hat = matrix_from_json(j.at("gamma_hat"), "gamma_hat");
    const json& t = j.at("transform");
    m.model.transform.x_mean = row_from_json(t.at("x_mean"));
    m.model.transform.x_scale = row_from_json(t.at("x_scale"));
    m.model.transform.y_mean = row_from_json(t.at("y_mean"));
    m.model.transform.y_scale = row_from_json(t.at("y_scale"));
    m.model.zero_score_limit = j.value("zero_score_limit", false);
    m.model.early_stop = j.value("early_stop", false);
    if (m.model.beta.rows() != static_cast<Index>(m.predictors.size()) ||
        m.model.beta.cols() != static_cast<Index>(m.responses.size()) ||
        m.model.transform.p() != m.model.beta.rows() ||
        m.model.transform.q() != m.model.beta.cols()) {
      throw ParseError("model file is internally inconsistent (shapes disagree)");
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void save_model(const std::string& path, const ModelFile& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << model_to_json(m).dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_from_json(j);
}

const std::vector<std::string>& study_config_keys() {
  static const std::vector<std::string> keys = {
      "study",        "seed",          "n",          "replications",  "grid",
      "methods",      "folds",         "lambda_count", "max_components", "threads",
      "decay_gamma",  "sigma_eps_sq",  "p1_start",   "u_star",        "baseline_kind",
      "rho"};
  return keys;
}

json study_config_schema() {
  auto integer = [](int minimum) { return json{{"type", "integer"}, {"minimum", minimum}}; };
  auto positive = [] { return json{{"type", "number"}, {"exclusiveMinimum", 0}}; };
  json props = {
      {"study", {{"type", "string"}, {"enum", {"P1", "u_star", "baseline", "double_descent"}}}},
      {"seed", integer(0)},
      {"n", integer(2)},
      {"replications", integer(1)},
      {"grid", {{"type", "array"}, {"items", positive()}, {"minItems", 1}}},
      {"methods",
       {{"type", "array"},
        {"items",
         {{"type", "string"},
          {"enum", {"pcr", "ridge", "niece", "egreg", "egreg_r", "simpls", "pls"}}}},
        {"minItems", 1}}},
      {"folds", integer(2)},
      {"lambda_count", integer(1)},
      {"max_components", integer(1)},
      {"threads", integer(1)},
      {"decay_gamma", positive()},
      {"sigma_eps_sq", positive()},
      {"p1_start", integer(1)},
      {"u_star", integer(1)},
      {"baseline_kind", {{"type", "string"}, {"enum", {"AR1", "CS"}}}},
      {"rho", {{"type", "number"}, {"minimum", 0}, {"exclusiveMaximum", 1}}}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "egreg study configuration"},
          {"type", "object"},
          {"required", {"study", "seed"}},
          {"additionalProperties", false},
          {"properties", props}};
}

sim::StudyConfig parse_study_config(const json& j) {
  if (!j.is_object()) throw UsageError("study configuration must be a JSON object");
  std::vector<std::string> problems;
  const std::vector<std::string>& keys = study_config_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      problems.push_back("unknown key '" + key + "'");
    }
  }
  for (const char* req : {"study", "seed"}) {
    if (!j.contains(req)) problems.push_back(std::string("missing required field '") + req + "'");
  }

  auto want_int = [&](const char* key, long long minimum) -> std::optional<long long> {
    if (!j.contains(key)) return std::nullopt;
    const json& v = j[key];
    if (!v.is_number_integer() || v.get<long long>() < minimum) {
      problems.push_back(std::string("field '") + key + "' must be an integer >= " +
                         std::to_string(minimum));
      return std::nullopt;
    }
    return v.get<long long>();
  };
  auto want_num = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number()) {
      problems.push_back(std::string("field '") + key + "' must be a number");
      return std::nullopt;
    }
    return j[key].get<double>();
  };

  std::optional<sim::StudyKind> kind;
  if (j.contains("study")) {
    if (j["study"].is_string()) kind = sim::parse_study_kind(j["study"].get<std::string>());
    if (!kind) problems.push_back("field 'study' must be one of P1, u_star, baseline, double_descent");
  }
  sim::StudyConfig cfg = sim::StudyConfig::defaults(kind.value_or(sim::StudyKind::p1));

  if (auto v = want_int("seed", 0)) cfg.seed = static_cast<std::uint64_t>(*v);
  if (auto v = want_int("n", 2)) cfg.n = *v;
  if (auto v = want_int("replications", 1)) cfg.replications = *v;
  if (auto v = want_int("folds", 2)) cfg.tuner.folds = *v;
  if (auto v = want_int("lambda_count", 1)) cfg.tuner.lambda_count = *v;
  if (auto v = want_int("max_components", 1)) cfg.tuner.max_components = *v;
  if (auto v = want_int("threads", 1)) cfg.threads = static_cast<unsigned>(*v);
  if (auto v = want_int("p1_start", 1)) cfg.p1_start = *v;
  if (auto v = want_int("u_star", 1)) cfg.u_star = *v;
  if (auto v = want_num("decay_gamma")) cfg.decay_gamma = *v;
  if (auto v = want_num("sigma_eps_sq")) cfg.sigma_eps_sq = *v;
  if (auto v = want_num("rho")) cfg.rho = *v;
  if (j.contains("baseline_kind")) {
    const auto b = j["baseline_kind"].is_string()
                       ? sim::parse_baseline_kind(j["baseline_kind"].get<std::string>())
                       : std::nullopt;
    if (b) cfg.baseline_kind = *b; else problems.push_back("field 'baseline_kind' must be AR1 or CS");
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    bool ok = g.is_array() && !g.empty();
    if (ok) {
      cfg.grid.clear();
      for (const json& v : g) {
        if (!v.is_number()) { ok = false; break; }
        cfg.grid.push_back(v.get<double>());
      }
    }
    if (!ok) problems.push_back("field 'grid' must be a non-empty array of numbers");
  }
  if (j.contains("methods")) {
    const json& m = j["methods"];
    bool ok = m.is_array() && !m.empty();
    if (ok) {
      cfg.methods.clear();
      for (const json& v : m) {
        const auto parsed =
            v.is_string() ? sim::parse_study_method(v.get<std::string>()) : std::nullopt;
        if (!parsed) { ok = false; break; }
        cfg.methods.push_back(*parsed);
      }
    }
    if (!ok) problems.push_back("field 'methods' must list pcr, ridge, niece, egreg, egreg_r or simpls");
  }

  if (!problems.empty()) {
    std::string msg = "invalid study configuration:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw UsageError(msg);
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("infeasible study configuration: ") + e.what());
  }
  return cfg;
}

sim::StudyConfig read_study_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  return parse_study_config(j);
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json RunManifest::to_json() const {
  return {{"command", command},         {"digest", digest},
          {"seed", seed},               {"version", version},
          {"wall_clock_seconds", wall_clock_seconds}, {"outputs", outputs}};
}

}  // namespace egreg::io
