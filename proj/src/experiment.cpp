#include "ltcalc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include "ltcalc/errors.hpp"
#include "ltcalc/integrals.hpp"
#include "ltcalc/localtime.hpp"
#include "ltcalc/numerics.hpp"
#include "ltcalc/parallel.hpp"
#include "ltcalc/reversal.hpp"
#include "ltcalc/rng.hpp"
#include "ltcalc/simulate.hpp"

namespace ltc {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigurationError("'" + where + "' must be a JSON object");
  std::string unknown;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) unknown += (unknown.empty() ? "" : ", ") + ("'" + it.key() + "'");
  }
  if (!unknown.empty()) throw ConfigurationError("unknown key(s) in " + where + ": " + unknown);
}

double number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigurationError(where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigurationError(where + "." + key + " must be finite");
  return d;
}

long long integer(const json& obj, const char* key, long long fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigurationError(where + "." + key + " must be an integer");
  return v.get<long long>();
}

std::string text(const json& obj, const char* key, const std::string& fallback,
                 const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigurationError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigurationError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw ConfigurationError(where + " must be an array of numbers");
    const double d = e.get<double>();
    if (!std::isfinite(d)) throw ConfigurationError(where + " must contain finite numbers");
    out.push_back(d);
  }
  return out;
}

std::vector<std::vector<double>> number_matrix(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigurationError(where + " must be an array of arrays");
  std::vector<std::vector<double>> out;
  for (const json& row : v) out.push_back(number_list(row, where));
  return out;
}

TabulatedCoefficients parse_model_table(const json& j) {
  check_keys(j, "model.table", {"t", "x", "drift", "dispersion"});
  for (const char* k : {"t", "x", "drift", "dispersion"}) {
    if (!j.contains(k)) throw ConfigurationError(std::string("model.table.") + k + " is required");
  }
  TabulatedCoefficients t;
  t.t = number_list(j.at("t"), "model.table.t");
  t.x = number_list(j.at("x"), "model.table.x");
  t.drift = number_matrix(j.at("drift"), "model.table.drift");
  t.dispersion = number_matrix(j.at("dispersion"), "model.table.dispersion");
  return t;
}

FunctionTable parse_function_table(const json& j) {
  check_keys(j, "function.table", {"x", "t", "values"});
  for (const char* k : {"x", "t", "values"}) {
    if (!j.contains(k)) throw ConfigurationError(std::string("function.table.") + k + " is required");
  }
  FunctionTable t;
  t.x = number_list(j.at("x"), "function.table.x");
  t.t = number_list(j.at("t"), "function.table.t");
  t.values = number_matrix(j.at("values"), "function.table.values");
  return t;
}

const std::vector<std::string> kSweepKeys = {
    "model.theta", "model.sigma",  "model.x0",     "simulation.n", "simulation.n_paths",
    "simulation.seed", "grid.x_min", "grid.x_max", "grid.dx",      "grid.epsilon", "t"};

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "config",
             {"experiment", "model", "simulation", "grid", "function", "t", "reversal_mode",
              "local_time", "diagnostics", "sweep"});
  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigurationError("config.experiment is required");
  c.experiment = text(j, "experiment", "", "config");

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"kind", "theta", "sigma", "x0", "table"});
    c.model.kind = text(m, "kind", c.model.kind, "model");
    c.model.theta = number(m, "theta", c.model.theta, "model");
    c.model.sigma = number(m, "sigma", c.model.sigma, "model");
    c.model.x0 = number(m, "x0", c.model.x0, "model");
    if (m.contains("table")) c.model.table = parse_model_table(m.at("table"));
  }

  if (!j.contains("simulation")) throw ConfigurationError("config.simulation is required");
  const json& s = j.at("simulation");
  check_keys(s, "simulation", {"n", "n_paths", "seed"});
  c.simulation.n = static_cast<int>(integer(s, "n", c.simulation.n, "simulation"));
  const long long n_paths =
      integer(s, "n_paths", static_cast<long long>(c.simulation.n_paths), "simulation");
  if (n_paths < 1) throw ConfigurationError("simulation.n_paths must be positive");
  c.simulation.n_paths = static_cast<std::size_t>(n_paths);
  if (!s.contains("seed")) throw ConfigurationError("simulation.seed is required");
  if (!s.at("seed").is_number_unsigned() && !(s.at("seed").is_number_integer() && s.at("seed").get<long long>() >= 0)) {
    throw ConfigurationError("simulation.seed must be a non-negative integer");
  }
  c.simulation.seed = s.at("seed").get<std::uint64_t>();

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"x_min", "x_max", "dx", "epsilon"});
    c.grid.x_min = number(g, "x_min", c.grid.x_min, "grid");
    c.grid.x_max = number(g, "x_max", c.grid.x_max, "grid");
    c.grid.dx = number(g, "dx", c.grid.dx, "grid");
    c.grid.epsilon = number(g, "epsilon", c.grid.epsilon, "grid");
  }

  if (j.contains("function")) {
    const json& f = j.at("function");
    check_keys(f, "function", {"f", "F", "table"});
    c.function.f = text(f, "f", c.function.f, "function");
    c.function.F = text(f, "F", c.function.F, "function");
    if (f.contains("table")) c.function.table = parse_function_table(f.at("table"));
  }

  c.t = number(j, "t", c.t, "config");
  c.reversal_mode = text(j, "reversal_mode", c.reversal_mode, "config");
  c.local_time = text(j, "local_time", c.local_time, "config");
  if (j.contains("diagnostics")) {
    if (!j.at("diagnostics").is_boolean()) throw ConfigurationError("config.diagnostics must be a boolean");
    c.diagnostics = j.at("diagnostics").get<bool>();
  }

  if (j.contains("sweep")) {
    const json& sw = j.at("sweep");
    if (!sw.is_object()) throw ConfigurationError("'sweep' must be a JSON object");
    for (auto it = sw.begin(); it != sw.end(); ++it) {
      if (std::find(kSweepKeys.begin(), kSweepKeys.end(), it.key()) == kSweepKeys.end()) {
        throw ConfigurationError("unknown key(s) in sweep: '" + it.key() + "'");
      }
      std::vector<double> values = number_list(it.value(), "sweep." + it.key());
      if (values.empty()) throw ConfigurationError("sweep." + it.key() + " is empty");
      c.sweep.emplace_back(it.key(), std::move(values));
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  json m;
  m["kind"] = c.model.kind;
  m["theta"] = c.model.theta;
  m["sigma"] = c.model.sigma;
  m["x0"] = c.model.x0;
  if (c.model.table) {
    m["table"] = {{"t", c.model.table->t},
                  {"x", c.model.table->x},
                  {"drift", c.model.table->drift},
                  {"dispersion", c.model.table->dispersion}};
  }
  j["model"] = m;
  j["simulation"] = {{"n", c.simulation.n},
                     {"n_paths", c.simulation.n_paths},
                     {"seed", c.simulation.seed}};
  j["grid"] = {{"x_min", c.grid.x_min},
               {"x_max", c.grid.x_max},
               {"dx", c.grid.dx},
               {"epsilon", c.grid.epsilon}};
  json f;
  f["f"] = c.function.f;
  f["F"] = c.function.F;
  if (c.function.table) {
    f["table"] = {{"x", c.function.table->x},
                  {"t", c.function.table->t},
                  {"values", c.function.table->values}};
  }
  j["function"] = f;
  j["t"] = c.t;
  j["reversal_mode"] = c.reversal_mode;
  j["local_time"] = c.local_time;
  j["diagnostics"] = c.diagnostics;
  if (!c.sweep.empty()) {
    json sw = json::object();
    for (const auto& [key, values] : c.sweep) sw[key] = values;
    j["sweep"] = sw;
  }
  return j;
}

void validate(const ExperimentConfig& c) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigurationError("unknown experiment '" + c.experiment + "' (expected one of " + list + ")");
  }
  if (c.model.kind != "bm" && c.model.kind != "ou" && c.model.kind != "custom") {
    throw ConfigurationError("model.kind must be bm, ou or custom");
  }
  if (c.model.kind == "custom" && !c.model.table) {
    throw ConfigurationError("model.table is required for a custom model");
  }
  if (c.model.kind == "ou" && !(c.model.theta > 0.0 && c.model.sigma > 0.0)) {
    throw ConfigurationError("ou needs theta > 0 and sigma > 0");
  }
  if (c.simulation.n < 0 || c.simulation.n > Partition::kMaxLevel) {
    throw ConfigurationError("simulation.n must lie in [0, " + std::to_string(Partition::kMaxLevel) + "]");
  }
  if (c.simulation.n_paths < 1) throw ConfigurationError("simulation.n_paths must be positive");
  if (!(c.grid.x_min < c.grid.x_max)) throw ConfigurationError("grid.x_min must be below grid.x_max");
  if (!(c.grid.dx > 0.0)) throw ConfigurationError("grid.dx must be positive");
  if (!(c.grid.epsilon > 0.0)) throw ConfigurationError("grid.epsilon must be positive");
  if (!(c.t > 0.0 && c.t <= 1.0)) throw ConfigurationError("t must lie in (0, 1]");
  reversal_mode_from_string(c.reversal_mode);
  if (c.local_time != "crossing" && c.local_time != "occupation") {
    throw ConfigurationError("local_time must be crossing or occupation");
  }
  build_integrand(c.function.f);
  build_test_function(c.function);
}

void set_scalar(ExperimentConfig& c, const std::string& key, double value) {
  auto as_integer = [&](long long lo) {
    if (value != std::floor(value) || value < static_cast<double>(lo)) {
      throw ConfigurationError("sweep value for " + key + " must be an integer >= " + std::to_string(lo));
    }
    return static_cast<long long>(value);
  };
  if (key == "model.theta") c.model.theta = value;
  else if (key == "model.sigma") c.model.sigma = value;
  else if (key == "model.x0") c.model.x0 = value;
  else if (key == "simulation.n") c.simulation.n = static_cast<int>(as_integer(0));
  else if (key == "simulation.n_paths") c.simulation.n_paths = static_cast<std::size_t>(as_integer(1));
  else if (key == "simulation.seed") c.simulation.seed = static_cast<std::uint64_t>(as_integer(0));
  else if (key == "grid.x_min") c.grid.x_min = value;
  else if (key == "grid.x_max") c.grid.x_max = value;
  else if (key == "grid.dx") c.grid.dx = value;
  else if (key == "grid.epsilon") c.grid.epsilon = value;
  else if (key == "t") c.t = value;
  else throw ConfigurationError("'" + key + "' is not a sweepable scalar");
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config) {
  ExperimentConfig base = config;
  base.sweep.clear();
  std::vector<ExperimentConfig> points{base};
  for (const auto& [key, values] : config.sweep) {
    std::vector<ExperimentConfig> next;
    next.reserve(points.size() * values.size());
    for (const auto& p : points) {
      for (double v : values) {
        ExperimentConfig q = p;
        set_scalar(q, key, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (const auto& p : points) validate(p);
  return points;
}

DiffusionModel build_model(const ModelConfig& m) {
  if (m.kind == "bm") return brownian_motion(m.x0);
  if (m.kind == "ou") return ornstein_uhlenbeck(m.theta, m.sigma, m.x0);
  if (m.kind == "custom") {
    if (!m.table) throw ConfigurationError("model.table is required for a custom model");
    return tabulated_model(*m.table, m.x0);
  }
  throw ConfigurationError("unknown model kind '" + m.kind + "'");
}

TimeSpaceFunction build_integrand(const std::string& name) {
  if (name == "one") return constant_function(1.0);
  if (name == "x") return identity_function();
  if (name == "sgn") return sign_function();
  if (name == "sin") return sine_function();
  throw ConfigurationError("unknown integrand f '" + name + "' (expected one, x, sgn or sin)");
}

TestFunction build_test_function(const FunctionConfig& f) {
  static const std::regex call_re(R"(^call\(\s*([-+0-9.eE]+)\s*\)$)");
  std::smatch m;
  if (f.F == "linear") return linear_test();
  if (f.F == "quadratic") return quadratic_test();
  if (f.F == "abs") return abs_test();
  if (f.F == "sin") return sine_test();
  if (f.F == "tsin") return time_sine_test();
  if (std::regex_match(f.F, m, call_re)) {
    double strike = 0.0;
    try {
      strike = std::stod(m[1].str());
    } catch (const std::exception&) {
      throw ConfigurationError("cannot parse strike in '" + f.F + "'");
    }
    return call_test(strike);
  }
  if (f.F == "custom-tabulated") {
    if (!f.table) throw ConfigurationError("function.table is required for custom-tabulated F");
    return tabulated_test(f.table->x, f.table->t, f.table->values);
  }
  throw ConfigurationError("unknown test function F '" + f.F + "'");
}

// ---------------------------------------------------------------------------

bool ExperimentReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
}

void finalize_errors(ReportRow& row) {
  row.abs_error = std::abs(row.estimate - row.reference);
  row.rel_error = row.abs_error / std::max(std::abs(row.reference), 1e-12);
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void write_report(const ExperimentReport& report, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const ReportRow& r : report.rows) {
    out << r.experiment << ',' << fmt(r.estimate) << ',' << fmt(r.reference) << ','
        << fmt(r.abs_error) << ',' << fmt(r.rel_error) << ',' << fmt(r.mc_stderr) << ',' << r.n
        << ',' << r.n_paths << ',' << fmt(r.dt) << ',' << fmt(r.epsilon) << ',' << r.seed << ','
        << fmt(r.wall_time) << '\n';
  }
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path.string() + "'");
  write_report(report, out);
  out.flush();
  if (!out) throw IoError("failed writing report '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

namespace {

struct Context {
  const ExperimentConfig& config;
  const RunOptions& options;
  std::size_t index;
  DiffusionModel model;
  Partition partition;
  LocalTimeSpec lt;
};

LocalTimeSpec local_time_spec(const ExperimentConfig& c) {
  LocalTimeSpec spec;
  spec.estimator = c.local_time == "occupation" ? LocalTimeEstimator::Occupation
                                                : LocalTimeEstimator::Crossing;
  spec.grid = {c.grid.x_min, c.grid.x_max, c.grid.dx};
  spec.epsilon = c.grid.epsilon;
  return spec;
}

std::filesystem::path artifact(const Context& ctx, const std::string& what) {
  std::filesystem::path p = ctx.options.artifact_stem;
  p += ".point" + std::to_string(ctx.index) + "." + what + ".csv";
  return p;
}

std::ofstream open_artifact(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

// Writes the requested dumps for the first path of the ensemble.
void dump_first_path(const Context& ctx, const SamplePath& path, const TimeSpaceFunction& f,
                     const LocalTimeField* field) {
  if (ctx.options.artifact_stem.empty()) return;
  if (ctx.options.dump_paths) {
    auto out = open_artifact(artifact(ctx, "path"));
    write_path_csv(path, out);
  }
  if (ctx.config.diagnostics) {
    auto terms = open_artifact(artifact(ctx, "terms"));
    write_terms_csv(forward_riemann_sum(f, path, ctx.config.t, true), path, terms);
    if (field) {
      auto fo = open_artifact(artifact(ctx, "field"));
      write_field_csv(*field, fo);
    }
  }
}

// Runs fn(path, index) for every path and returns per-path vectors.
template <class Fn>
void for_each_path(const Context& ctx, Fn&& fn) {
  const auto& sim = ctx.config.simulation;
  parallel_for(sim.n_paths, ctx.options.threads, [&](std::size_t p) {
    const SamplePath path = euler_maruyama(ctx.model, ctx.partition, sim.seed, p);
    fn(path, p);
  });
}

// Density for models without closed-form marginals: Gaussian KDE on
// snapshots of a pilot ensemble.
void ensure_density(Context& ctx) {
  if (ctx.model.density) return;
  const auto& sim = ctx.config.simulation;
  const int level = std::min(ctx.partition.level(), 10);
  const std::size_t pilot = std::max<std::size_t>(sim.n_paths, KernelDensity::kMinSamples);
  check_step_cap(level, pilot, default_step_cap());
  const Partition part(level);
  const std::size_t snaps = 32;
  std::vector<DensitySnapshot> snapshots(snaps);
  for (std::size_t k = 0; k < snaps; ++k) {
    snapshots[k].t = static_cast<double>(k + 1) / static_cast<double>(snaps);
    snapshots[k].samples.resize(pilot);
  }
  const std::uint64_t pilot_seed = CounterNormal::mix(sim.seed ^ 0x50494c4f54ULL);
  parallel_for(pilot, ctx.options.threads, [&](std::size_t p) {
    const SamplePath path = euler_maruyama(ctx.model, part, pilot_seed, p);
    for (std::size_t k = 0; k < snaps; ++k) {
      snapshots[k].samples[p] = path.values[part.index_at_or_below(snapshots[k].t)];
    }
  });
  const double h = silverman_bandwidth(snapshots.back().samples);
  ctx.model.density =
      kernel_density_field(std::move(snapshots), h, ctx.model.coefficients.dispersion);
}

struct Estimate {
  double estimate = 0.0;
  double reference = 0.0;
  double stderr_ = 0.0;
  bool pass = true;
};

double mean_abs(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s += std::abs(x);
  return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

std::vector<double> difference(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

Estimate run_covariation(Context& ctx) {
  const TimeSpaceFunction f = build_integrand(ctx.config.function.f);
  if (!f.dx) throw ConfigurationError("covariation oracle needs a differentiable f, got '" + f.name + "'");
  const std::size_t m = ctx.config.simulation.n_paths;
  std::vector<double> est(m), ref(m);
  for_each_path(ctx, [&](const SamplePath& path, std::size_t p) {
    est[p] = quadratic_covariation(f, path, ctx.config.t).value;
    ref[p] = covariation_oracle(f, ctx.model, path, ctx.config.t);
    if (p == 0) dump_first_path(ctx, path, f, nullptr);
  });
  const Summary se = summarize(est);
  const Summary sr = summarize(ref);
  Estimate e{se.mean, sr.mean, se.stderr_};
  e.pass = std::abs(e.estimate - e.reference) / std::max(std::abs(e.reference), 1e-12) < 0.03;
  return e;
}

Estimate run_theorem32(Context& ctx) {
  const TimeSpaceFunction f = build_integrand(ctx.config.function.f);
  const std::size_t m = ctx.config.simulation.n_paths;
  std::vector<double> dl(m), qv(m);
  for_each_path(ctx, [&](const SamplePath& path, std::size_t p) {
    const LocalTimeField field = local_time_field(path, ctx.model, ctx.lt);
    dl[p] = timespace_integral(f, field, ctx.config.t);
    qv[p] = forward_riemann_sum(f, path, ctx.config.t).value -
            backward_riemann_sum(f, path, ctx.config.t).value;
    if (p == 0) dump_first_path(ctx, path, f, &field);
  });
  const std::vector<double> gap = difference(dl, qv);
  const Summary sq = summarize(qv);
  Estimate e{summarize(dl).mean, sq.mean, summarize(gap).stderr_};
  e.pass = mean_abs(gap) <= 0.05 * sq.sd + 1e-12;
  return e;
}

Estimate run_ito(Context& ctx) {
  const ItoVerifier verifier(build_test_function(ctx.config.function), ctx.model);
  const TestFunction& F = verifier.function();
  const std::size_t m = ctx.config.simulation.n_paths;
  std::vector<double> res(m), terminal(m);
  for_each_path(ctx, [&](const SamplePath& path, std::size_t p) {
    const LocalTimeField field = local_time_field(path, ctx.model, ctx.lt);
    res[p] = verifier.residual(path, field, ctx.config.t).residual;
    const std::size_t k = path.partition.index_at_or_below(ctx.config.t);
    terminal[p] = F.F(path.values[k], path.time(k));
    if (p == 0) dump_first_path(ctx, path, F.derivative_x(), &field);
  });
  const Summary sr = summarize(res);
  Estimate e{sr.mean, 0.0, sr.stderr_};
  e.pass = std::abs(sr.mean) <= 0.05 * summarize(terminal).sd + 1e-12;
  return e;
}

Estimate run_tanaka(Context& ctx) {
  const TestFunction F = build_test_function(ctx.config.function);
  double level = 0.0;
  double weight = 1.0;
  if (ctx.config.function.F == "abs") {
    level = 0.0;
    weight = 1.0;
  } else if (ctx.config.function.F.rfind("call(", 0) == 0) {
    level = std::stod(ctx.config.function.F.substr(5));
    weight = 0.5;
  } else {
    throw ConfigurationError("tanaka needs F = abs or call(K), got '" + ctx.config.function.F + "'");
  }
  const std::size_t m = ctx.config.simulation.n_paths;
  std::vector<double> est(m), oracle(m), terminal(m);
  for_each_path(ctx, [&](const SamplePath& path, std::size_t p) {
    const LocalTimeField field = local_time_field(path, ctx.model, ctx.lt);
    const double te = field.tgrid()[field.t_index_at_or_below(ctx.config.t)];
    const std::size_t k = path.partition.index_at_or_below(te);
    est[p] = weight * field.value(level, te, true);
    CompensatedSum stoch;
    for (std::size_t i = 0; i < k; ++i) {
      stoch += F.Fx(path.values[i], path.time(i)) * (path.values[i + 1] - path.values[i]);
    }
    terminal[p] = F.F(path.values[k], te);
    oracle[p] = terminal[p] - F.F(path.values[0], 0.0) - stoch.value();
    if (p == 0) dump_first_path(ctx, path, F.derivative_x(), &field);
  });
  const std::vector<double> gap = difference(est, oracle);
  const Summary sg = summarize(gap);
  Estimate e{summarize(est).mean, summarize(oracle).mean, sg.stderr_};
  e.pass = std::abs(sg.mean) <= 0.05 * summarize(terminal).sd + 1e-12;
  return e;
}

Estimate run_reversal(Context& ctx) {
  ensure_density(ctx);
  const auto& sim = ctx.config.simulation;
  const ReversalMode mode = reversal_mode_from_string(ctx.config.reversal_mode);
  if (mode == ReversalMode::Resimulate) {
    const std::vector<double> s_values = {0.25, 0.5, 0.75};
    const auto matches = reversal_marginal_check(ctx.model, ctx.partition.level(), sim.n_paths,
                                                 sim.seed, s_values, ctx.options.threads);
    double worst = 0.0;
    for (const auto& mm : matches) worst = std::max(worst, mm.ks);
    Estimate e{worst, 0.0, std::sqrt(2.0 / static_cast<double>(sim.n_paths))};
    e.pass = worst < 0.05;
    return e;
  }
  const ReversedModel reversed = reversed_coefficients(ctx.model);
  const TimeSpaceFunction f = build_integrand(ctx.config.function.f);
  std::vector<double> dec(sim.n_paths), bwd(sim.n_paths);
  for_each_path(ctx, [&](const SamplePath& path, std::size_t p) {
    const ReversedPath rp = residual_reversed_path(path, reversed);
    dec[p] = backward_integral_decomposed(f, rp, reversed, ctx.config.t).value;
    bwd[p] = backward_riemann_sum(f, path, ctx.config.t).value;
    if (p == 0) dump_first_path(ctx, path, f, nullptr);
  });
  const std::vector<double> gap = difference(dec, bwd);
  const Summary sb = summarize(bwd);
  Estimate e{summarize(dec).mean, sb.mean, summarize(gap).stderr_};
  e.pass = mean_abs(gap) <= 0.02 * sb.sd + 1e-12;
  return e;
}

Estimate run_norms(Context& ctx) {
  ensure_density(ctx);
  const TimeSpaceFunction f = build_integrand(ctx.config.function.f);
  const SeminormResult star = seminorm_star(f, ctx.model);
  if (!star.finite) throw MembershipError("'" + f.name + "' has infinite seminorm");
  const std::size_t m = ctx.config.simulation.n_paths;
  std::vector<double> mag(m);
  for_each_path(ctx, [&](const SamplePath& path, std::size_t p) {
    const LocalTimeField field = local_time_field(path, ctx.model, ctx.lt);
    mag[p] = std::abs(timespace_integral(f, field, 1.0));
    if (p == 0) dump_first_path(ctx, path, f, &field);
  });
  const Summary sm = summarize(mag);
  Estimate e{sm.mean, star.value, sm.stderr_};
  e.pass = sm.mean <= star.value + 3.0 * sm.stderr_;
  return e;
}

Estimate run_envelopes(Context& ctx) {
  const bool analytic = static_cast<bool>(ctx.model.envelopes);
  ensure_density(ctx);
  const DensityModel density = *ctx.model.density;
  EnvelopePair grid;
  grid.r = [density](double t) { return grid_envelope_r(density, t, {}); };
  grid.u = [density](double t) {
    const auto u = grid_envelope_u(density, t, {});
    return u ? *u : std::numeric_limits<double>::infinity();
  };
  const IntegrabilityReport est = check_integrability(grid);
  Estimate e;
  e.estimate = est.value;
  if (analytic) {
    e.reference = check_integrability(*ctx.model.envelopes).value;
    e.pass = est.pass && std::abs(e.estimate - e.reference) <= 0.01;
  } else {
    e.reference = std::numeric_limits<double>::quiet_NaN();
    e.pass = est.pass;
  }
  return e;
}

}  // namespace

ReportRow run_experiment(const ExperimentConfig& config, const RunOptions& options,
                         std::size_t sweep_index) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const auto& sim = config.simulation;
  const std::size_t multiplier = config.experiment == "reversal" ? 3 : 1;
  if (config.experiment != "envelopes") {
    check_step_cap(sim.n, sim.n_paths * multiplier, default_step_cap());
  }
  Context ctx{config, options, sweep_index, build_model(config.model), Partition(sim.n),
              local_time_spec(config)};

  Estimate e;
  if (config.experiment == "covariation") e = run_covariation(ctx);
  else if (config.experiment == "theorem32") e = run_theorem32(ctx);
  else if (config.experiment == "ito") e = run_ito(ctx);
  else if (config.experiment == "tanaka") e = run_tanaka(ctx);
  else if (config.experiment == "reversal") e = run_reversal(ctx);
  else if (config.experiment == "norms") e = run_norms(ctx);
  else if (config.experiment == "envelopes") e = run_envelopes(ctx);
  else throw ConfigurationError("unknown experiment '" + config.experiment + "'");

  ReportRow row;
  row.experiment = config.experiment;
  row.estimate = e.estimate;
  row.reference = e.reference;
  row.mc_stderr = e.stderr_;
  row.pass = e.pass;
  row.n = sim.n;
  row.n_paths = sim.n_paths;
  row.dt = ctx.partition.mesh();
  row.epsilon = config.grid.epsilon;
  row.seed = sim.seed;
  finalize_errors(row);
  row.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

ExperimentReport run(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentReport report;
  const std::vector<ExperimentConfig> points = expand_sweep(config);
  for (std::size_t k = 0; k < points.size(); ++k) {
    report.rows.push_back(run_experiment(points[k], options, k));
  }
  return report;
}

}  // namespace ltc
