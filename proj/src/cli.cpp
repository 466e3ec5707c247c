#include "nllvm/cli.hpp"

#include "nllvm/densities.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/gpivi.hpp"
#include "nllvm/hi_order_kernel.hpp"
#include "nllvm/nllvm_posterior.hpp"
#include "nllvm/verify_harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

namespace nllvm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Flag
{
  std::string name;
  std::string def;
  std::string help;
  bool required = false;
};

using FlagTable = std::map<std::string, std::vector<Flag>>;

// Keys are "estimate", "vi", "contract" and "verify <check>".
const FlagTable& flag_table()
{
  static const FlagTable t = [] {
    std::vector<Flag> rate{ { "j", "0", "recursion depth" },
                            { "sigma-hi", "0.1", "largest bandwidth" },
                            { "sigma-lo", "0.01", "smallest bandwidth" },
                            { "count", "7", "number of bandwidths" } };
    return FlagTable{
      { "estimate",
        { { "data", "", "input CSV with one numeric column", true },
          { "iters", "4000", "MCMC cycles" },
          { "burn", "1000", "burn-in cycles" },
          { "thin", "10", "thinning interval" },
          { "knots", "64", "transfer-map knots" } } },
      { "vi",
        { { "data", "", "input CSV; simulated from the model when absent" },
          { "model", "normal-normal", "normal-normal, normal-mean or logistic" },
          { "n", "100", "simulated sample size" },
          { "theta-star", "0.3", "true parameter for simulation" },
          { "alpha", "0.99", "fractional power" },
          { "knots", "16", "variational knots" },
          { "iters", "200", "maximum sweeps" },
          { "max-kl", "0.05", "pass threshold on KL to the exact posterior" } } },
      { "contract",
        { { "density", "truncated-normal", "truncated-normal, bump or bimodal" },
          { "n-list", "100,400,1600", "sample sizes" },
          { "reps", "5", "replicates per size" },
          { "iters", "4000", "MCMC cycles" },
          { "burn", "1000", "burn-in cycles" },
          { "thin", "10", "thinning interval" },
          { "beta", "2", "smoothness for the target rate" } } },
      { "verify hellinger-bound", { { "trials", "200", "random pairs" } } },
      { "verify logsup-bound",
        { { "trials", "50", "paths per delta" },
          { "sigma", "0.1", "bandwidth" },
          { "deltas", "0.05,0.1,0.2", "perturbation sizes" } } },
      { "verify chi2-limit",
        { { "n", "10000", "sample size" },
          { "reps", "2000", "replicates" },
          { "theta-star", "1", "true mean" } } },
      { "verify l1-support",
        { { "density", "unimodal", "unimodal, bimodal or bump" }, { "eps", "0.05", "L1 target" } } },
      { "verify risk-bound",
        { { "n-list", "50,200,800", "sample sizes" },
          { "alphas", "0.5,0.99", "fractional powers" },
          { "reps", "20", "replicates per cell" },
          { "eps-c", "2", "eps = c / sqrt(n)" },
          { "theta-star", "0.3", "true mean" } } },
      { "verify approx-order", rate },
      { "verify kl-rate", rate },
      { "verify fbeta-closed-form", { { "densities", "20", "random smooth densities" } } },
      { "verify mixture-identity",
        { { "densities", "10", "random smooth densities" }, { "sigmas", "0.02,0.1", "bandwidths" } } },
      { "verify vb-kl-bounded",
        { { "n-list", "100,1000,10000", "sample sizes" }, { "reps", "200", "replicates per size" } } },
      { "verify hellinger-risk-decay",
        { { "n-list", "50,200,800,3200", "sample sizes" },
          { "reps", "20", "replicates per size" },
          { "alpha", "0.99", "fractional power" },
          { "theta-star", "0.3", "true mean" } } },
    };
  }();
  return t;
}

const std::map<std::string, std::string>& descriptions()
{
  static const std::map<std::string, std::string> d{
    { "estimate", "fit the transfer-map density model by MCMC" },
    { "vi", "fit a GP-IVI approximation to a fractional posterior" },
    { "contract", "posterior contraction across sample sizes" },
    { "verify hellinger-bound", "Hellinger distance between mixtures vs the sup-norm bound" },
    { "verify logsup-bound", "log sup ratio under sup-norm perturbations of the quantile map" },
    { "verify chi2-limit", "KL of the normal-normal posterior against chi-square(1)" },
    { "verify l1-support", "constructive L1 approximation by a quantile-map mixture" },
    { "verify risk-bound", "Renyi risk of the variational fit vs the complexity bound" },
    { "verify approx-order", "sup error of the corrected convolution vs sigma" },
    { "verify kl-rate", "KL of the corrected convolution vs sigma" },
    { "verify fbeta-closed-form", "closed-form vs iterated higher-order kernel" },
    { "verify mixture-identity", "quantile-map mixture vs direct convolution" },
    { "verify vb-kl-bounded", "minimal KL over the restricted family across n" },
    { "verify hellinger-risk-decay", "decay of the Hellinger risk of the variational fit" },
  };
  return d;
}

std::string table_key(const RunConfig& cfg)
{
  return cfg.command == "verify" ? "verify " + cfg.check : cfg.command;
}

std::size_t default_grid(const std::string& key)
{
  if (key == "verify approx-order" || key == "verify kl-rate" || key == "verify hellinger-bound")
    return 4096;
  if (key == "verify logsup-bound")
    return 2048;
  return 1024;
}

double parse_number(const std::string& name, const std::string& text)
{
  std::string s = trim(text);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ParameterError("--" + name + " expects a finite number, got '" + text + "'");
  return v;
}

class Params
{
public:
  explicit Params(const RunConfig& cfg)
    : cfg_(cfg)
  {
  }

  const std::string& str(const std::string& name) const
  {
    auto it = cfg_.params.find(name);
    if (it == cfg_.params.end())
      throw ParameterError("missing flag --" + name);
    return it->second;
  }
  double num(const std::string& name) const { return parse_number(name, str(name)); }
  std::size_t count(const std::string& name) const
  {
    double v = num(name);
    if (v < 0.0 || v != std::floor(v))
      throw ParameterError("--" + name + " expects a non-negative integer");
    return static_cast<std::size_t>(v);
  }
  std::vector<double> list(const std::string& name) const
  {
    std::vector<double> out;
    std::stringstream ss(str(name));
    std::string item;
    while (std::getline(ss, item, ','))
      out.push_back(parse_number(name, item));
    if (out.empty())
      throw ParameterError("--" + name + " expects a comma-separated list");
    return out;
  }
  std::vector<std::size_t> sizes(const std::string& name) const
  {
    std::vector<std::size_t> out;
    for (double v : list(name)) {
      if (v < 1.0 || v != std::floor(v))
        throw ParameterError("--" + name + " expects positive integers");
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

private:
  const RunConfig& cfg_;
};

struct Outcome
{
  std::map<std::string, double> metrics;
  std::optional<bool> pass;
  std::map<std::string, Table> tables;
};

Outcome from_check(const CheckReport& r)
{
  Outcome o;
  o.metrics = r.metrics;
  o.metrics["trials"] = static_cast<double>(r.trials);
  o.metrics["violations"] = static_cast<double>(r.violations);
  o.metrics["worst_margin"] = r.worst_margin;
  for (const auto& [k, v] : r.params) {
    std::string key = "param_" + k;
    std::replace(key.begin(), key.end(), '-', '_');
    o.metrics[key] = v;
  }
  o.pass = r.pass;
  o.tables["trials"] = r.table;
  return o;
}

Outcome from_slope(const SlopeReport& r)
{
  Outcome o;
  o.metrics = r.metrics;
  o.metrics["slope"] = r.slope;
  o.metrics["r2"] = r.r2;
  if (r.target)
    o.metrics["target"] = *r.target;
  o.metrics["insufficient_points"] = r.insufficient_points ? 1.0 : 0.0;
  o.metrics["invalid"] = r.invalid ? 1.0 : 0.0;
  o.pass = r.pass && !r.invalid && !r.insufficient_points;
  Table fit{ { "x", "y" }, {} };
  for (std::size_t i = 0; i < r.xs.size() && i < r.ys.size(); ++i)
    fit.rows.push_back({ r.xs[i], r.ys[i] });
  o.tables["fit"] = fit;
  if (!r.table.columns.empty())
    o.tables["rows"] = r.table;
  return o;
}

Table density_table(const GridDensity& f, const std::string& column)
{
  Table t{ { "x", column }, {} };
  for (std::size_t i = 0; i < f.size(); ++i)
    t.rows.push_back({ f.grid().x(i), f[i] });
  return t;
}

Outcome run_estimate(const RunConfig& cfg, const Params& p)
{
  auto data = load_csv(*cfg.input_path);
  MCMCOptions m;
  m.iters = p.count("iters");
  m.burn_in = p.count("burn");
  m.thin = p.count("thin");
  m.n_knots = p.count("knots");
  m.seed = Rng::for_task(cfg.seed, "estimate", 0).seed();
  auto post = fit_mcmc(data, default_mcmc_config(), m);

  auto [dmin, dmax] = std::minmax_element(data.begin(), data.end());
  double pad = std::max(0.25 * (*dmax - *dmin), 1e-3);
  Grid base(*dmin - pad, *dmax + pad, cfg.grid_n);
  auto pred = predictive_density(post, predictive_grid(post, base));
  double sigma_sum = 0.0;
  for (const auto& s : post.states)
    sigma_sum += s.sigma;

  Outcome o;
  o.metrics["n_data"] = static_cast<double>(data.size());
  o.metrics["states"] = static_cast<double>(post.states.size());
  o.metrics["sigma_mean"] = sigma_sum / static_cast<double>(post.states.size());
  o.metrics["sigma_step"] = post.sigma_step;
  o.metrics["latent_fallbacks"] = static_cast<double>(post.latent_fallbacks);
  o.metrics["predictive_mean"] = pred.mean();
  o.metrics["predictive_sd"] = std::sqrt(pred.variance());
  for (const auto& [k, v] : post.acceptance)
    o.metrics["acceptance_" + k] = v;
  o.tables["predictive"] = density_table(pred, "density");
  Table trace{ { "cycle", "log_post" }, {} };
  for (std::size_t i = 0; i < post.log_post_trace.size(); ++i)
    trace.rows.push_back({ static_cast<double>(i), post.log_post_trace[i] });
  o.tables["trace"] = trace;
  return o;
}

std::unique_ptr<BayesModel> make_model(const std::string& name, double theta_star)
{
  if (name == "normal-normal")
    return std::make_unique<NormalNormalModel>(1.0, theta_star);
  if (name == "normal-mean")
    return std::make_unique<NormalMeanModel>(1.0, theta_star);
  if (name == "logistic")
    return std::make_unique<Logistic1DModel>(theta_star);
  throw ParameterError("unknown model '" + name + "'");
}

Outcome run_vi(const RunConfig& cfg, const Params& p)
{
  auto model = make_model(p.str("model"), p.num("theta-star"));
  double alpha = p.num("alpha");
  std::vector<double> data;
  if (cfg.input_path) {
    data = load_csv(*cfg.input_path);
  } else {
    Rng rng = Rng::for_task(cfg.seed, "vi", 0);
    data = model->simulate(p.count("n"), rng);
  }
  auto grid = posterior_grid(*model, data, alpha, cfg.grid_n);
  OptimizeOptions opt;
  opt.iters = p.count("iters");
  opt.seed = Rng::for_task(cfg.seed, "vi", 1).seed();
  auto fit = optimize(*model, data, alpha, p.count("knots"), grid, opt);
  auto q = q_density(fit.params, grid);
  auto psi = psi_diagnostic(fit.params, *model, data, alpha, grid);

  Outcome o;
  o.metrics["n_data"] = static_cast<double>(data.size());
  o.metrics["objective"] = fit.objective;
  o.metrics["initial_objective"] = fit.initial_objective;
  o.metrics["sweeps"] = static_cast<double>(fit.sweeps);
  o.metrics["converged"] = fit.converged ? 1.0 : 0.0;
  o.metrics["stalled"] = fit.stalled ? 1.0 : 0.0;
  o.metrics["sigma"] = fit.params.sigma();
  o.metrics["q_mean"] = q.mean();
  o.metrics["q_sd"] = std::sqrt(q.variance());
  o.metrics["model_fit"] = psi.model_fit;
  o.metrics["prior_kl"] = psi.prior_kl;
  o.metrics["psi"] = psi.psi;
  o.metrics["hellinger_risk"] = hellinger_risk(q, *model);
  if (alpha < 1.0)
    o.metrics["risk_integral"] = risk_integral(q, *model, alpha);

  Table t{ { "theta", "q" }, {} };
  auto exact = model->exact_posterior(data, alpha, grid);
  if (exact) {
    double kl = divergence(DivergenceKind::kl(), q, *exact);
    o.metrics["kl_to_exact"] = kl;
    o.pass = kl < p.num("max-kl");
    t.columns.push_back("exact");
  }
  for (std::size_t i = 0; i < grid.n; ++i) {
    std::vector<double> row{ grid.x(i), q[i] };
    if (exact)
      row.push_back((*exact)[i]);
    t.rows.push_back(row);
  }
  o.tables["q"] = t;
  return o;
}

GridDensity named_density(const std::string& name, const Grid& g)
{
  if (name == "truncated-normal" || name == "unimodal")
    return truncated_normal(g, 0.5, 0.1, 0.0, 1.0);
  if (name == "bimodal")
    return gaussian_mixture(g, { { 0.5, 0.25, 0.06 }, { 0.5, 0.75, 0.06 } });
  if (name == "bump")
    return cinf_bump(g);
  throw ParameterError("unknown density '" + name + "'");
}

Outcome run_contract(const RunConfig& cfg, const Params& p)
{
  Grid g(-1.0, 2.0, cfg.grid_n);
  auto f0 = named_density(p.str("density"), g);
  ContractionOptions c;
  c.n_list = p.sizes("n-list");
  c.reps = p.count("reps");
  c.beta = p.num("beta");
  c.mcmc.iters = p.count("iters");
  c.mcmc.burn_in = p.count("burn");
  c.mcmc.thin = p.count("thin");
  c.seed = cfg.seed;
  return from_slope(contraction_experiment(f0, default_mcmc_config(), c));
}

Outcome run_rate(const RunConfig& cfg, const Params& p, bool kl)
{
  Grid g(-1.5, 2.5, cfg.grid_n);
  auto f0 = cinf_bump(g);
  double j = p.num("j");
  if (j < 0.0 || j != std::floor(j))
    throw ParameterError("--j expects a non-negative integer");
  auto sigmas = geometric_sigmas(p.num("sigma-hi"), p.num("sigma-lo"), p.count("count"));
  const FBetaOptions permissive{ 1.0 };
  auto r = kl ? kl_rate_experiment(f0, static_cast<int>(j), sigmas, permissive)
              : approx_order_experiment(f0, static_cast<int>(j), sigmas, permissive);
  return from_slope(r);
}

Outcome run_verify(const RunConfig& cfg, const Params& p)
{
  const std::string& c = cfg.check;
  if (c == "hellinger-bound") {
    HellingerBoundOptions o;
    o.trials = p.count("trials");
    o.seed = cfg.seed;
    o.grid = Grid(-8.0, 8.0, cfg.grid_n);
    return from_check(check_hellinger_bound(o));
  }
  if (c == "logsup-bound") {
    auto f0 = cinf_bump(Grid(-1.5, 2.5, cfg.grid_n));
    return from_check(check_logsup_bound(f0, p.num("sigma"), p.list("deltas"), p.count("trials"), cfg.seed));
  }
  if (c == "chi2-limit") {
    Chi2Params cp;
    cp.theta_star = p.num("theta-star");
    return from_check(chi2_limit_experiment(p.count("n"), p.count("reps"), cp, cfg.seed));
  }
  if (c == "l1-support") {
    auto f0 = named_density(p.str("density"), Grid(-0.5, 1.5, cfg.grid_n));
    return from_check(l1_support_search(f0, p.num("eps")));
  }
  if (c == "risk-bound") {
    NormalNormalModel model(1.0, p.num("theta-star"));
    RiskBoundOptions o;
    o.n_list = p.sizes("n-list");
    o.alphas = p.list("alphas");
    o.reps = p.count("reps");
    double ec = p.num("eps-c");
    o.eps_rule = [ec](std::size_t n) { return ec / std::sqrt(static_cast<double>(n)); };
    o.seed = cfg.seed;
    return from_check(risk_bound_experiment(model, o));
  }
  if (c == "approx-order")
    return run_rate(cfg, p, false);
  if (c == "kl-rate")
    return run_rate(cfg, p, true);
  if (c == "fbeta-closed-form")
    return from_check(fbeta_closed_form_check(p.count("densities"), cfg.seed));
  if (c == "mixture-identity")
    return from_check(mixture_identity_check(p.count("densities"), p.list("sigmas"), cfg.seed));
  if (c == "vb-kl-bounded") {
    VBBoundedOptions o;
    o.n_list = p.sizes("n-list");
    o.reps = p.count("reps");
    o.seed = cfg.seed;
    return from_check(vb_kl_bounded(o));
  }
  if (c == "hellinger-risk-decay") {
    NormalMeanModel model(1.0, p.num("theta-star"), -2.0, 2.0);
    RiskDecayOptions o;
    o.n_list = p.sizes("n-list");
    o.reps = p.count("reps");
    o.alpha = p.num("alpha");
    o.seed = cfg.seed;
    return from_slope(hellinger_risk_decay(model, o));
  }
  throw ParameterError("unknown check '" + c + "'");
}

json number_or_null(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

std::string format_number(double v)
{
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json param_value(const std::string& s)
{
  std::string t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (!t.empty() && ec == std::errc() && p == t.data() + t.size() && std::isfinite(v))
    return v;
  return s;
}

} // namespace

std::vector<double> load_csv(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty())
      continue;
    if (lineno == 1 && (t == "y" || t == "\"y\""))
      continue;
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
      throw ParseError("non-numeric value '" + t + "'", lineno);
    if (!std::isfinite(v))
      throw ParseError("non-finite value '" + t + "'", lineno);
    out.push_back(v);
  }
  if (in.bad())
    throw IoError("read error on '" + path.string() + "'");
  if (out.empty())
    throw EmptyDataError("no data values in '" + path.string() + "'");
  return out;
}

void write_csv(const fs::path& path, const Table& table)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  if (!out)
    throw IoError("write error on '" + path.string() + "'");
}

void RunConfig::validate() const
{
  if (grid_n < kMinGridN || grid_n > kMaxGridN)
    throw ParameterError("--grid must lie in [64, 65536]");
  if (!flag_table().count(table_key(*this)))
    throw ParameterError("unknown command '" + table_key(*this) + "'");
  if (output_path.empty())
    throw ParameterError("--out is required");
}

json RunConfig::to_json() const
{
  json j;
  j["command"] = command;
  if (!check.empty())
    j["check"] = check;
  j["input_path"] = input_path ? json(input_path->string()) : json(nullptr);
  j["grid_n"] = grid_n;
  j["seed"] = seed;
  j["output_path"] = output_path.string();
  json p = json::object();
  for (const auto& [k, v] : params)
    if (k != "data")
      p[k] = param_value(v);
  j["params"] = p;
  return j;
}

bool Report::operator==(const Report& o) const
{
  auto same_metrics = [&] {
    if (metrics.size() != o.metrics.size())
      return false;
    for (auto a = metrics.begin(), b = o.metrics.begin(); a != metrics.end(); ++a, ++b) {
      if (a->first != b->first)
        return false;
      bool both_nan = std::isnan(a->second) && std::isnan(b->second);
      if (!both_nan && a->second != b->second)
        return false;
    }
    return true;
  };
  return schema_version == o.schema_version && command == o.command && config == o.config && same_metrics() &&
         pass == o.pass && runtime_ms == o.runtime_ms && seed == o.seed && artifacts == o.artifacts &&
         error == o.error;
}

json to_json(const Report& r)
{
  json j;
  j["schema_version"] = r.schema_version;
  j["command"] = r.command;
  j["config"] = r.config;
  json m = json::object();
  for (const auto& [k, v] : r.metrics)
    m[k] = number_or_null(v);
  j["metrics"] = m;
  j["pass"] = r.pass ? json(*r.pass) : json(nullptr);
  j["runtime_ms"] = r.runtime_ms;
  j["seed"] = r.seed;
  json a = json::object();
  for (const auto& [k, v] : r.artifacts)
    a[k] = { { "file", v.file }, { "columns", v.columns } };
  j["artifacts"] = a;
  if (r.error)
    j["error"] = *r.error;
  return j;
}

Report report_from_json(const json& j)
{
  Report r;
  try {
    r.schema_version = j.at("schema_version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.config = j.at("config");
    for (const auto& [k, v] : j.at("metrics").items())
      r.metrics[k] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    if (!j.at("pass").is_null())
      r.pass = j.at("pass").get<bool>();
    r.runtime_ms = j.at("runtime_ms").get<std::int64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("artifacts"))
      for (const auto& [k, v] : j.at("artifacts").items())
        r.artifacts[k] = { v.at("file").get<std::string>(), v.at("columns").get<std::vector<std::string>>() };
    if (j.contains("error"))
      r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
  if (r.schema_version != "1")
    throw ParseError("unsupported schema version '" + r.schema_version + "'", 0);
  return r;
}

fs::path sidecar_path(const fs::path& report_path, const std::string& name)
{
  fs::path p = report_path;
  return p.replace_filename(report_path.stem().string() + "." + name + ".csv");
}

const std::vector<std::string>& check_names()
{
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, flags] : flag_table())
      if (k.rfind("verify ", 0) == 0)
        v.push_back(k.substr(7));
    return v;
  }();
  return names;
}

Report dispatch(const RunConfig& cfg)
{
  cfg.validate();
  Params p(cfg);
  Report rep;
  rep.command = table_key(cfg);
  rep.config = cfg.to_json();
  rep.seed = cfg.seed;

  auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    if (cfg.command == "estimate")
      out = run_estimate(cfg, p);
    else if (cfg.command == "vi")
      out = run_vi(cfg, p);
    else if (cfg.command == "contract")
      out = run_contract(cfg, p);
    else
      out = run_verify(cfg, p);
  } catch (const ParameterError&) {
    throw;
  } catch (const Error& e) {
    out = {};
    out.pass = false;
    rep.error = e.what();
  }
  rep.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  rep.metrics = out.metrics;
  rep.pass = out.pass;

  for (const auto& [name, table] : out.tables) {
    auto path = sidecar_path(cfg.output_path, name);
    write_csv(path, table);
    rep.artifacts[name] = { path.filename().string(), table.columns };
  }
  std::ofstream os(cfg.output_path);
  if (!os)
    throw IoError("cannot write '" + cfg.output_path.string() + "'");
  os << to_json(rep).dump(2) << '\n';
  if (!os)
    throw IoError("write error on '" + cfg.output_path.string() + "'");
  return rep;
}

int run_cli(int argc, const char* const* argv)
{
  CLI::App app{ "Experiments for Gaussian-process transfer-map density models." };
  app.name("nllvm-lab");
  app.require_subcommand(1, 1);
  auto* verify = app.add_subcommand("verify", "run a verification check");
  verify->require_subcommand(1, 1);

  struct Leaf
  {
    CLI::App* app;
    std::string key;
    std::map<std::string, std::string> values;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t grid = 0;
  };
  std::vector<std::unique_ptr<Leaf>> leaves;
  for (const auto& [key, flags] : flag_table()) {
    auto leaf = std::make_unique<Leaf>();
    leaf->key = key;
    bool is_check = key.rfind("verify ", 0) == 0;
    leaf->app = is_check ? verify->add_subcommand(key.substr(7), descriptions().at(key))
                         : app.add_subcommand(key, descriptions().at(key));
    leaf->grid = default_grid(key);
    for (const auto& f : flags) {
      leaf->values[f.name] = f.def;
      auto* opt = leaf->app->add_option("--" + f.name, leaf->values[f.name], f.help);
      if (f.required)
        opt->required();
      else if (!f.def.empty())
        opt->default_str(f.def);
    }
    leaf->app->add_option("--out", leaf->out, "report path (JSON)")->required();
    leaf->app->add_option("--seed", leaf->seed, "master seed")->default_str("0");
    leaf->app->add_option("--grid", leaf->grid, "grid points")->default_str(std::to_string(leaf->grid));
    leaves.push_back(std::move(leaf));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const Leaf* used = nullptr;
  for (const auto& l : leaves)
    if (l->app->parsed())
      used = l.get();
  if (!used) {
    std::cerr << "nllvm-lab: no command given\n";
    return 2;
  }

  RunConfig cfg;
  bool is_check = used->key.rfind("verify ", 0) == 0;
  cfg.command = is_check ? "verify" : used->key;
  cfg.check = is_check ? used->key.substr(7) : "";
  cfg.grid_n = used->grid;
  cfg.seed = used->seed;
  cfg.output_path = used->out;
  cfg.params = used->values;
  auto data = cfg.params.find("data");
  if (data != cfg.params.end() && !data->second.empty())
    cfg.input_path = data->second;

  try {
    auto rep = dispatch(cfg);
    if (rep.error)
      std::cerr << "nllvm-lab: " << *rep.error << '\n';
    return rep.pass.value_or(true) ? 0 : 1;
  } catch (const ParameterError& e) {
    std::cerr << "nllvm-lab: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "nllvm-lab: " << e.what() << '\n';
    return 1;
  }
}

} // namespace nllvm
