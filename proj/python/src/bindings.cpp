#include "nllvm/cli.hpp"
#include "nllvm/errors.hpp"
#include "nllvm/gpivi.hpp"
#include "nllvm/grid_density.hpp"
#include "nllvm/hi_order_kernel.hpp"
#include "nllvm/nllvm_posterior.hpp"
#include "nllvm/transfer_map.hpp"
#include "nllvm/verify_harness.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

namespace py = pybind11;
using namespace nllvm;

namespace {

py::array_t<double> to_array(std::span<const double> v)
{
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

GridDensity make_density(const Grid& g, const std::vector<double>& values)
{
  return GridDensity(g, values);
}

DivergenceKind kind_from(const std::string& name, double alpha)
{
  if (name == "kl")
    return DivergenceKind::kl();
  if (name == "v")
    return DivergenceKind::v();
  if (name == "hellinger_sq")
    return DivergenceKind::hellinger_sq();
  if (name == "l1")
    return DivergenceKind::l1();
  if (name == "sup_log_ratio")
    return DivergenceKind::sup_log_ratio();
  if (name == "renyi")
    return DivergenceKind::renyi(alpha);
  throw ParameterError("unknown divergence '" + name + "'");
}

py::dict check_dict(const CheckReport& r)
{
  py::dict d;
  d["name"] = r.name;
  d["trials"] = r.trials;
  d["violations"] = r.violations;
  d["worst_margin"] = r.worst_margin;
  d["pass"] = r.pass;
  d["seed"] = r.seed;
  d["params"] = r.params;
  d["metrics"] = r.metrics;
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Transfer-map density models, GP-IVI and verification checks.";

  static auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<EmptyDataError>(m, "EmptyDataError", base.ptr());

  py::class_<Grid>(m, "Grid")
    .def(py::init<double, double, std::size_t>(), py::arg("lo"), py::arg("hi"), py::arg("n"))
    .def_readonly("lo", &Grid::lo)
    .def_readonly("hi", &Grid::hi)
    .def_readonly("n", &Grid::n)
    .def("step", &Grid::step)
    .def("points", [](const Grid& g) {
      auto p = g.points();
      return to_array(p);
    });

  py::class_<GridDensity>(m, "GridDensity")
    .def(py::init(&make_density), py::arg("grid"), py::arg("values"))
    .def_property_readonly("grid", &GridDensity::grid)
    .def_property_readonly("values", [](const GridDensity& f) { return to_array(f.values()); })
    .def("mean", &GridDensity::mean)
    .def("variance", &GridDensity::variance)
    .def("__call__", &GridDensity::operator());

  m.def("normal_density", &normal_density, py::arg("grid"), py::arg("mean"), py::arg("sd"));
  m.def(
    "divergence",
    [](const std::string& kind, const GridDensity& p, const GridDensity& q, double alpha) {
      return divergence(kind_from(kind, alpha), p, q);
    },
    py::arg("kind"),
    py::arg("p"),
    py::arg("q"),
    py::arg("alpha") = 0.5);
  m.def("convolve_gaussian", py::overload_cast<const GridDensity&, double>(&convolve_gaussian));

  m.def(
    "quantile_of",
    [](const GridDensity& f, std::size_t n_knots, double clip) {
      auto q = quantile_of(f, n_knots, clip);
      return py::make_tuple(q.knots(), q.values());
    },
    py::arg("f"),
    py::arg("n_knots") = 256,
    py::arg("clip") = 0.0,
    "Quantile map as (knots, values).");
  m.def(
    "mixture_density",
    [](const std::vector<double>& knots, const std::vector<double>& values, double sigma, const Grid& g) {
      return mixture_density(TransferFunction(knots, values), sigma, g);
    },
    py::arg("knots"),
    py::arg("values"),
    py::arg("sigma"),
    py::arg("grid"));

  m.def(
    "fbeta",
    [](const GridDensity& f0, double sigma, int j, bool closed_form, double max_negative_mass) {
      FBetaOptions o{ max_negative_mass };
      auto r = closed_form ? fbeta_closed_form(f0, sigma, j, o) : fbeta_iterative(f0, sigma, j, o);
      return py::make_tuple(r.density, to_array(r.signed_values));
    },
    py::arg("f0"),
    py::arg("sigma"),
    py::arg("j"),
    py::arg("closed_form") = false,
    py::arg("max_negative_mass") = 1e-3,
    "Higher-order kernel density as (density, signed values).");

  m.def(
    "estimate",
    [](const std::vector<double>& data, const Grid& g, std::size_t iters, std::size_t burn, std::size_t thin,
       std::uint64_t seed) {
      MCMCOptions o;
      o.iters = iters;
      o.burn_in = burn;
      o.thin = thin;
      o.seed = seed;
      auto post = fit_mcmc(data, default_mcmc_config(), o);
      py::dict d;
      d["predictive"] = predictive_density(post, g);
      std::vector<double> sig;
      for (const auto& s : post.states)
        sig.push_back(s.sigma);
      d["sigma"] = sig;
      d["acceptance"] = post.acceptance;
      d["log_post_trace"] = post.log_post_trace;
      return d;
    },
    py::arg("data"),
    py::arg("grid"),
    py::arg("iters") = 4000,
    py::arg("burn") = 1000,
    py::arg("thin") = 10,
    py::arg("seed") = 0,
    "MCMC fit of the transfer-map model with its predictive density on `grid`.");

  m.def(
    "vi_normal_normal",
    [](const std::vector<double>& data, double alpha, std::size_t knots, std::uint64_t seed, double theta_star) {
      NormalNormalModel model(1.0, theta_star);
      auto g = posterior_grid(model, data, alpha);
      OptimizeOptions o;
      o.seed = seed;
      auto fit = optimize(model, data, alpha, knots, g, o);
      auto q = q_density(fit.params, g);
      auto exact = *model.exact_posterior(data, alpha, g);
      py::dict d;
      d["q"] = q;
      d["exact"] = exact;
      d["objective"] = fit.objective;
      d["sweeps"] = fit.sweeps;
      d["sigma"] = fit.params.sigma();
      d["kl_to_exact"] = divergence(DivergenceKind::kl(), q, exact);
      d["risk_integral"] = alpha < 1.0 ? risk_integral(q, model, alpha) : NAN;
      return d;
    },
    py::arg("data"),
    py::arg("alpha") = 0.99,
    py::arg("knots") = 16,
    py::arg("seed") = 0,
    py::arg("theta_star") = 0.0,
    "GP-IVI fit for y ~ N(theta, 1), theta ~ N(0, 1).");

  m.def("check_hellinger_bound",
        [](std::size_t trials, std::uint64_t seed) { return check_dict(check_hellinger_bound(trials, seed)); },
        py::arg("trials") = 200,
        py::arg("seed") = 0);
  m.def(
    "chi2_limit_experiment",
    [](std::size_t n, std::size_t reps, double theta_star, std::uint64_t seed) {
      Chi2Params p;
      p.theta_star = theta_star;
      return check_dict(chi2_limit_experiment(n, reps, p, seed));
    },
    py::arg("n") = 10000,
    py::arg("reps") = 2000,
    py::arg("theta_star") = 1.0,
    py::arg("seed") = 0);
  m.def("l1_support_search",
        [](const GridDensity& f0, double eps) { return check_dict(l1_support_search(f0, eps)); },
        py::arg("f0"),
        py::arg("eps"));
  m.def("fbeta_closed_form_check",
        [](std::size_t n, std::uint64_t seed) { return check_dict(fbeta_closed_form_check(n, seed)); },
        py::arg("densities") = 20,
        py::arg("seed") = 0);
  m.def(
    "mixture_identity_check",
    [](std::size_t n, const std::vector<double>& sigmas, std::uint64_t seed) {
      return check_dict(mixture_identity_check(n, sigmas, seed));
    },
    py::arg("densities") = 10,
    py::arg("sigmas") = std::vector<double>{ 0.02, 0.1 },
    py::arg("seed") = 0);

  m.def("load_csv", [](const std::string& path) { return load_csv(path); }, py::arg("path"));
  m.def(
    "run_cli",
    [](std::vector<std::string> args) {
      args.insert(args.begin(), "nllvm-lab");
      std::vector<const char*> argv;
      for (const auto& a : args)
        argv.push_back(a.c_str());
      return run_cli(static_cast<int>(argv.size()), argv.data());
    },
    py::arg("args"),
    "Runs the command line with the given arguments and returns its exit code.");
}
