// egreg: fit, tune, predict, evaluate and simulate envelope-guided regression
// models from the command line. Every command writes a JSON manifest beside its
// primary output. Exit codes: 0 success, 1 runtime or numeric failure,
// 2 usage or schema error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egreg/asymptotics.hpp"
#include "egreg/crossval.hpp"
#include "egreg/estimators.hpp"
#include "egreg/io.hpp"
#include "egreg/simharness.hpp"

namespace fs = std::filesystem;
using namespace egreg;

namespace {

using Clock = std::chrono::steady_clock;

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string manifest;
};

unsigned default_threads() {
  if (const char* env = std::getenv("EGREG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    throw UsageError("EGREG_THREADS must be a positive integer");
  }
  return 1;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
  return v;
}

/// "lo:hi:count" (log-spaced when `log_scale`, else linear) or "a,b,c".
std::vector<double> parse_grid(const std::string& text, const std::string& what, bool log_scale) {
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw UsageError(what + " range must look like lo:hi:count");
    const double lo = parse_number(parts[0], what);
    const double hi = parse_number(parts[1], what);
    const double count = parse_number(parts[2], what);
    if (count < 1 || count != std::floor(count)) throw UsageError(what + " count must be >= 1");
    if (log_scale) {
      try {
        return sim::log_grid(lo, hi, static_cast<Index>(count));
      } catch (const Error& e) {
        throw UsageError(what + ": " + e.what());
      }
    }
    std::vector<double> g;
    const Index c = static_cast<Index>(count);
    for (Index i = 0; i < c; ++i) {
      g.push_back(c == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(c - 1));
    }
    return g;
  }
  std::vector<double> g;
  for (const std::string& s : split_list(text)) g.push_back(parse_number(s, what));
  if (g.empty()) throw UsageError(what + " is empty");
  return g;
}

std::vector<Index> parse_int_grid(const std::string& text, const std::string& what) {
  std::vector<Index> out;
  if (text.find(':') != std::string::npos) {
    // lo:hi or lo:hi:step
    std::vector<std::string> parts;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() < 2 || parts.size() > 3) throw UsageError(what + " range must be lo:hi[:step]");
    const Index lo = static_cast<Index>(parse_number(parts[0], what));
    const Index hi = static_cast<Index>(parse_number(parts[1], what));
    const Index step = parts.size() == 3 ? static_cast<Index>(parse_number(parts[2], what)) : 1;
    if (step < 1 || lo > hi) throw UsageError(what + " range is empty");
    for (Index k = lo; k <= hi; k += step) out.push_back(k);
    return out;
  }
  for (const std::string& s : split_list(text)) {
    const double v = parse_number(s, what);
    if (v != std::floor(v)) throw UsageError(what + " entries must be integers");
    out.push_back(static_cast<Index>(v));
  }
  if (out.empty()) throw UsageError(what + " is empty");
  return out;
}

Method require_method(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) {
    throw UsageError("unknown method '" + name + "' (expected pcr, ridge, niece, egreg or simpls)");
  }
  return *m;
}

std::string args_digest(const std::string& command, const std::map<std::string, std::string>& args,
                        const std::vector<std::string>& inputs) {
  std::uint64_t h = io::fnv1a64(command);
  for (const auto& [k, v] : args) h = io::fnv1a64(k + "=" + v + ";", h);
  for (const std::string& path : inputs) h = io::fnv1a64(io::read_file(path), h);
  return io::hex64(h);
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::map<std::string, std::string>& args,
                    const std::vector<std::string>& inputs, std::uint64_t seed,
                    Clock::time_point start, std::vector<std::string> outputs) {
  io::RunManifest m;
  m.command = command;
  m.digest = args_digest(command, args, inputs);
  m.seed = seed;
  m.version = io::kVersion;
  m.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  m.outputs = std::move(outputs);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << m.to_json().dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string manifest_path(const Common& c, const std::string& primary) {
  return c.manifest.empty() ? primary + ".manifest.json" : c.manifest;
}

FittedModeld fit_method(const Datasetd& data, Method method, std::optional<Index> d,
                        std::optional<Index> u, std::optional<double> lambda) {
  switch (method) {
    case Method::pcr:
      if (!d) throw UsageError("pcr needs --d");
      return fit_pcr(data, *d);
    case Method::simpls:
      if (!d) throw UsageError("simpls needs --d");
      return fit_simpls(data, *d);
    case Method::ridge:
      if (!lambda) throw UsageError("ridge needs --lambda");
      return fit_ridge(data, *lambda);
    case Method::niece:
      if (!u) throw UsageError("niece needs --u");
      return d ? fit_niece(data, *u, *d) : fit_niece(data, *u);
    case Method::egreg: {
      if (!lambda) throw UsageError("egreg needs --lambda");
      const Index dd = d ? *d : thin_svd(detail::ensure_centered(data).X).rank();
      return fit_egreg(data, dd, *lambda);
    }
  }
  throw UsageError("unsupported method");
}

MatrixXd predict_table(const io::ModelFile& m, const io::CsvTable& table) {
  return predict(m.model, table.columns(m.predictors));
}

}  // namespace

int main(int argc, char** argv) {
  const auto start = Clock::now();
  CLI::App app{"Envelope-guided regression toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));

  Common common;
  unsigned thread_default = 1;
  try {
    thread_default = default_threads();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  common.threads = thread_default;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Master random seed");
    sub->add_option("--threads", common.threads, "Worker thread cap (default EGREG_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--manifest", common.manifest, "Manifest path (default <output>.manifest.json)");
  };

  // fit
  std::string data_path, model_out, method_name_arg, response_arg;
  std::optional<Index> opt_d, opt_u;
  std::optional<double> opt_lambda;
  bool standardize = false;
  CLI::App* fit = app.add_subcommand("fit", "Fit one model and save it as JSON");
  fit->add_option("--data", data_path, "Training CSV")->required();
  fit->add_option("--response", response_arg, "Comma-separated response column names")->required();
  fit->add_option("--method", method_name_arg, "pcr, ridge, niece, egreg or simpls")->required();
  fit->add_option("--d", opt_d, "Number of leading PCs (pcr, simpls components, niece, egreg)");
  fit->add_option("--u", opt_u, "NIECE envelope dimension");
  fit->add_option("--lambda", opt_lambda, "Penalty (ridge, egreg)");
  fit->add_flag("--standardize", standardize, "Scale columns to unit variance before fitting");
  fit->add_option("--out", model_out, "Model output path")->required();
  add_common(fit);

  // predict
  std::string model_in, pred_out;
  CLI::App* pred = app.add_subcommand("predict", "Predict responses for new predictors");
  pred->add_option("--model", model_in, "Model JSON")->required();
  pred->add_option("--data", data_path, "CSV containing the model's predictor columns")->required();
  pred->add_option("--out", pred_out, "Prediction CSV")->required();
  add_common(pred);

  // cv
  std::string grid_d, grid_u, grid_lambda, cv_out, cv_model_out;
  Index folds = 10;
  CLI::App* cv = app.add_subcommand("cv", "Tune a method by k-fold cross-validation");
  cv->add_option("--data", data_path, "Training CSV")->required();
  cv->add_option("--response", response_arg, "Comma-separated response column names")->required();
  cv->add_option("--method", method_name_arg, "pcr, ridge, niece, egreg or simpls")->required();
  cv->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1 << 30));
  cv->add_option("--grid-d", grid_d, "d values: list a,b,c or range lo:hi[:step]");
  cv->add_option("--grid-u", grid_u, "u values: list or range");
  cv->add_option("--grid-lambda", grid_lambda, "lambda values: list or lo:hi:count (log-spaced)");
  cv->add_option("--out", cv_out, "CV table CSV")->required();
  cv->add_option("--model-out", cv_model_out, "Refit the selected model on all rows and save it");
  add_common(cv);

  // evaluate-rpe
  std::vector<std::string> rpe_models;
  std::string rpe_out;
  CLI::App* rpe = app.add_subcommand("evaluate-rpe", "Relative prediction error against SIMPLS");
  rpe->add_option("--data", data_path, "Test CSV")->required();
  rpe->add_option("--models", rpe_models, "Model JSON files; one must be a SIMPLS model")
      ->required();
  rpe->add_option("--out", rpe_out, "RPE table CSV")->required();
  add_common(rpe);

  // theory
  std::string gamma_grid = "0.05:5:400", theory_out;
  double c_sq = 10, tr_eps = 10;
  CLI::App* theory = app.add_subcommand("theory", "Limiting NIECE and EgReg risk curves");
  theory->add_option("--grid-gamma", gamma_grid, "gamma values: list or lo:hi:count (linear)");
  theory->add_option("--c-sq", c_sq, "Signal strength c^2")->check(CLI::PositiveNumber);
  theory->add_option("--tr-sigma-eps", tr_eps, "Noise trace")->check(CLI::PositiveNumber);
  theory->add_option("--out", theory_out, "Curve CSV")->required();
  add_common(theory);

  // simulate
  std::string config_path, out_dir;
  std::optional<Index> reps_override;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a simulation study from a JSON config");
  simulate->add_option("--config", config_path, "Study configuration JSON")->required();
  simulate->add_option("--out-dir", out_dir, "Output directory")->required();
  simulate->add_option("--replications", reps_override, "Override the replication count");
  add_common(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) {
      const Method method = require_method(method_name_arg);
      io::LabeledData ld = io::split_response(io::read_csv(data_path), split_list(response_arg));
      Datasetd data = standardize ? center_standardize(ld.data, Scaling::standardize) : ld.data;
      io::ModelFile mf{fit_method(data, method, opt_d, opt_u, opt_lambda), ld.predictors,
                       ld.responses};
      io::save_model(model_out, mf);
      const std::map<std::string, std::string> args = {
          {"method", method_name_arg},
          {"response", response_arg},
          {"d", opt_d ? std::to_string(*opt_d) : ""},
          {"u", opt_u ? std::to_string(*opt_u) : ""},
          {"lambda", opt_lambda ? io::format_double(*opt_lambda) : ""},
          {"standardize", standardize ? "1" : "0"}};
      write_manifest(manifest_path(common, model_out), "fit", args, {data_path}, common.seed, start,
                     {model_out});
    } else if (pred->parsed()) {
      const io::ModelFile mf = io::load_model(model_in);
      const MatrixXd yhat = predict_table(mf, io::read_csv(data_path));
      io::write_csv(pred_out, mf.responses, yhat);
      write_manifest(manifest_path(common, pred_out), "predict", {}, {model_in, data_path},
                     common.seed, start, {pred_out});
    } else if (cv->parsed()) {
      const Method method = require_method(method_name_arg);
      io::LabeledData ld = io::split_response(io::read_csv(data_path), split_list(response_arg));
      std::vector<ModelParams> grid;
      std::vector<std::optional<Index>> ds{std::nullopt}, us{std::nullopt};
      std::vector<std::optional<double>> ls{std::nullopt};
      if (!grid_d.empty()) {
        ds.clear();
        for (Index d : parse_int_grid(grid_d, "--grid-d")) ds.push_back(d);
      }
      if (!grid_u.empty()) {
        us.clear();
        for (Index u : parse_int_grid(grid_u, "--grid-u")) us.push_back(u);
      }
      if (!grid_lambda.empty()) {
        ls.clear();
        for (double l : parse_grid(grid_lambda, "--grid-lambda", true)) ls.push_back(l);
      }
      if ((method == Method::pcr || method == Method::simpls) && grid_d.empty()) {
        throw UsageError(std::string(method_name(method)) + " cross-validation needs --grid-d");
      }
      if (method == Method::niece && grid_u.empty()) {
        throw UsageError("niece cross-validation needs --grid-u");
      }
      if ((method == Method::ridge || method == Method::egreg) && grid_lambda.empty()) {
        throw UsageError(std::string(method_name(method)) + " cross-validation needs --grid-lambda");
      }
      for (const auto& d : ds) {
        for (const auto& u : us) {
          for (const auto& l : ls) {
            ModelParams p;
            if (method != Method::ridge) p.d = d;
            if (method == Method::niece) p.u = u;
            if (method == Method::ridge || method == Method::egreg) p.lambda = l;
            grid.push_back(p);
          }
        }
      }
      const sim::CvResult res = sim::kfold_cv(ld.data, method, grid, folds, common.seed);
      std::ofstream out(cv_out);
      if (!out) throw Error("cannot open '" + cv_out + "' for writing");
      out << "d,u,lambda,score,selected\n";
      for (const sim::CvPoint& pt : res.table) {
        out << (pt.params.d ? std::to_string(*pt.params.d) : "") << ','
            << (pt.params.u ? std::to_string(*pt.params.u) : "") << ','
            << (pt.params.lambda ? io::format_double(*pt.params.lambda) : "") << ','
            << io::format_double(pt.score) << ',' << (pt.params == res.best ? 1 : 0) << '\n';
      }
      out.close();
      if (!out) throw Error("failed writing '" + cv_out + "'");
      std::vector<std::string> outputs{cv_out};
      if (!cv_model_out.empty()) {
        io::ModelFile mf{fit_method(ld.data, method, res.best.d, res.best.u, res.best.lambda),
                         ld.predictors, ld.responses};
        io::save_model(cv_model_out, mf);
        outputs.push_back(cv_model_out);
      }
      const std::map<std::string, std::string> args = {{"method", method_name_arg},
                                                       {"response", response_arg},
                                                       {"folds", std::to_string(folds)},
                                                       {"grid_d", grid_d},
                                                       {"grid_u", grid_u},
                                                       {"grid_lambda", grid_lambda},
                                                       {"seed", std::to_string(common.seed)}};
      write_manifest(manifest_path(common, cv_out), "cv", args, {data_path}, common.seed, start,
                     outputs);
    } else if (rpe->parsed()) {
      const io::CsvTable table = io::read_csv(data_path);
      std::vector<io::ModelFile> models;
      std::optional<std::size_t> pls_index;
      for (std::size_t i = 0; i < rpe_models.size(); ++i) {
        models.push_back(io::load_model(rpe_models[i]));
        if (!pls_index && models.back().model.method == Method::simpls) pls_index = i;
      }
      if (!pls_index) throw ContractError("evaluate-rpe needs a SIMPLS model as the reference");
      const io::ModelFile& ref = models[*pls_index];
      const MatrixXd y = table.columns(ref.responses);
      const double sse_ref = (y - predict_table(ref, table)).squaredNorm();
      if (!(sse_ref > 0)) throw ContractError("SIMPLS reference has zero test error; RPE undefined");
      std::ofstream out(rpe_out);
      if (!out) throw Error("cannot open '" + rpe_out + "' for writing");
      out << "model,method,sse,rpe\n";
      for (std::size_t i = 0; i < models.size(); ++i) {
        if (models[i].responses != ref.responses) {
          throw ContractError("model '" + rpe_models[i] + "' predicts different responses");
        }
        const double sse =
            i == *pls_index ? sse_ref : (y - predict_table(models[i], table)).squaredNorm();
        const double r = i == *pls_index ? 1.0 : sse / sse_ref;
        out << rpe_models[i] << ',' << method_name(models[i].model.method) << ','
            << io::format_double(sse) << ',' << io::format_double(r) << '\n';
      }
      out.close();
      if (!out) throw Error("failed writing '" + rpe_out + "'");
      std::vector<std::string> inputs = rpe_models;
      inputs.push_back(data_path);
      write_manifest(manifest_path(common, rpe_out), "evaluate-rpe", {}, inputs, common.seed, start,
                     {rpe_out});
    } else if (theory->parsed()) {
      const std::vector<double> grid = parse_grid(gamma_grid, "--grid-gamma", false);
      LimitConfig base;
      base.c_sq = c_sq;
      base.tr_sigma_eps = tr_eps;
      RiskCurve curve;
      try {
        curve = risk_curve(base, grid);
      } catch (const ParameterError& e) {
        throw UsageError(std::string("--grid-gamma: ") + e.what());
      }
      MatrixXd values(static_cast<Index>(grid.size()), 4);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Index r = static_cast<Index>(i);
        values(r, 0) = curve.gamma_grid[i];
        values(r, 1) = curve.niece_risk[i];
        values(r, 2) = curve.egreg_risk_at_opt[i];
        values(r, 3) = curve.lambda_star[i];
      }
      io::write_csv(theory_out, {"gamma", "niece_risk", "egreg_risk", "lambda_star"}, values);
      const std::map<std::string, std::string> args = {{"grid_gamma", gamma_grid},
                                                       {"c_sq", io::format_double(c_sq)},
                                                       {"tr_sigma_eps", io::format_double(tr_eps)}};
      write_manifest(manifest_path(common, theory_out), "theory", args, {}, common.seed, start,
                     {theory_out});
    } else if (simulate->parsed()) {
      sim::StudyConfig cfg = io::read_study_config(config_path);
      if (simulate->count("--seed")) cfg.seed = common.seed;
      if (simulate->count("--threads") || std::getenv("EGREG_THREADS")) cfg.threads = common.threads;
      if (reps_override) {
        if (*reps_override < 1) throw UsageError("--replications must be positive");
        cfg.replications = *reps_override;
      }
      const sim::StudyResult res = sim::run_study(cfg);
      fs::create_directories(out_dir);
      const std::string csv = (fs::path(out_dir) / (std::string(sim::study_kind_name(cfg.kind)) +
                                                    ".csv")).string();
      {
        std::ofstream out(csv);
        if (!out) throw Error("cannot open '" + csv + "' for writing");
        out << res.to_csv();
        out.close();
        if (!out) throw Error("failed writing '" + csv + "'");
      }
      const std::map<std::string, std::string> args = {
          {"seed", std::to_string(cfg.seed)}, {"replications", std::to_string(cfg.replications)}};
      const std::string manifest =
          common.manifest.empty() ? (fs::path(out_dir) / "manifest.json").string() : common.manifest;
      write_manifest(manifest, "simulate", args, {config_path}, cfg.seed, start, {csv});
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
