#include "ergocov/domain.hpp"
#include "ergocov/error.hpp"
#include "ergocov/eval.hpp"
#include "ergocov/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ergocov;

namespace {

// Python side uses one point per row.
using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Points cols(const RowPoints& p) { return p.transpose(); }
RowPoints rows(const Points& p) { return p.transpose(); }

DomainSamples samples_from(const RowPoints& p, const std::optional<Vec>& w) { return DomainSamples(cols(p), w); }

py::tuple objective(bool log_form, const RowPoints& traj, const RowPoints& samples, double bandwidth,
                    const std::optional<Vec>& weights, bool include_constant) {
  const Eigen::Index m = samples.rows();
  Vec w = weights ? *weights : Vec::Constant(m, 1.0 / static_cast<double>(m));
  if (w.size() != m) throw InvalidArgument("weights must have one entry per sample");
  const ErgodicTarget target(cols(samples), w / w.sum());
  const auto k = KernelConfig::squared_euclidean(bandwidth);
  const ObjectiveEval e = log_form ? log_emmd(cols(traj), target, k, include_constant) : emmd(cols(traj), target, k);
  return py::make_tuple(e.value, rows(e.grad_omegas));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ergodic coverage trajectory optimization";
  m.attr("__version__") = "0.1.0";

  // Translators are tried newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DegenerateDomain>(m, "DegenerateDomain", PyExc_ValueError);
  py::register_exception<InvalidSchedule>(m, "InvalidSchedule", PyExc_ValueError);

  m.def(
      "load_samples",
      [](const std::string& path, std::optional<int> dim) {
        const auto fmt = format_from_path(path);
        if (!fmt) throw InvalidArgument("cannot infer sample format from extension: " + path);
        const DomainSamples s = load_samples(path, *fmt, dim);
        return py::make_tuple(rows(s.points()), s.weights());
      },
      py::arg("path"), py::arg("dim") = py::none(), "Returns (points[M, d], weights[M]).");

  m.def(
      "compute_extent", [](const RowPoints& p) { return compute_extent(DomainSamples(cols(p))); }, py::arg("points"));

  m.def(
      "normalize",
      [](const RowPoints& samples, const RowPoints& points) {
        const NormalizedDomain d{DomainSamples(cols(samples))};
        return py::make_tuple(rows(d.normalize_points(cols(points))), d.extent(), d.offset());
      },
      py::arg("samples"), py::arg("points"), "Returns (normalized points, extent, offset).");

  m.def(
      "emmd",
      [](const RowPoints& t, const RowPoints& s, double h, std::optional<Vec> w) {
        return objective(false, t, s, h, w, true);
      },
      py::arg("trajectory"), py::arg("samples"), py::arg("bandwidth"), py::arg("weights") = py::none(),
      "Returns (value, gradient[T, d]).");

  m.def(
      "log_emmd",
      [](const RowPoints& t, const RowPoints& s, double h, std::optional<Vec> w, bool c) {
        return objective(true, t, s, h, w, c);
      },
      py::arg("trajectory"), py::arg("samples"), py::arg("bandwidth"), py::arg("weights") = py::none(),
      py::arg("include_constant") = true, "Returns (value, gradient[T, d]).");

  m.def(
      "anneal_sequence",
      [](double h0, double h_phys_star, int K, double extent) {
        return anneal_sequence(AnnealingSchedule{h0, h_phys_star, K, extent});
      },
      py::arg("h0"), py::arg("h_phys_star"), py::arg("K"), py::arg("extent") = 1.0);

  m.def(
      "coverage",
      [](const RowPoints& polyline, const RowPoints& samples, double radius, std::optional<Vec> weights) {
        const CoverageResult c = coverage(cols(polyline), samples_from(samples, weights), radius);
        py::dict out;
        out["covered_fraction"] = c.covered_fraction;
        out["radius_phys"] = c.radius_phys;
        out["path_length"] = c.path_length;
        out["per_sample_covered"] = c.per_sample_covered;
        return out;
      },
      py::arg("polyline"), py::arg("samples"), py::arg("radius"), py::arg("weights") = py::none());

  m.def(
      "tsp_nearest_neighbor",
      [](const RowPoints& samples, const Vec& start, std::optional<double> L_max) {
        return rows(tsp_nearest_neighbor(DomainSamples(cols(samples)), start, L_max));
      },
      py::arg("samples"), py::arg("start"), py::arg("L_max") = py::none());

  py::class_<DynamicsModel>(m, "DynamicsModel")
      .def(py::init<>())
      .def_property(
          "kind", [](const DynamicsModel& d) { return to_string(d.kind); },
          [](DynamicsModel& d, const std::string& k) { d.kind = dynamics_kind_from_string(k); })
      .def_property(
          "velocity_bound", [](const DynamicsModel& d) { return to_string(d.velocity_bound); },
          [](DynamicsModel& d, const std::string& k) { d.velocity_bound = velocity_bound_from_string(k); })
      .def_readwrite("v_max", &DynamicsModel::v_max)
      .def_readwrite("a_max", &DynamicsModel::a_max)
      .def_readwrite("L_max", &DynamicsModel::L_max)
      .def_readwrite("T_max", &DynamicsModel::T_max)
      .def_readwrite("dt_min", &DynamicsModel::dt_min)
      .def_readwrite("dt_max", &DynamicsModel::dt_max)
      .def_readwrite("initial_state", &DynamicsModel::initial_state)
      .def_readwrite("final_state", &DynamicsModel::final_state);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &SolverConfig::horizon)
      .def_property(
          "h0", [](const SolverConfig& c) { return c.annealing.h0; }, [](SolverConfig& c, double v) { c.annealing.h0 = v; })
      .def_property(
          "h_phys_star", [](const SolverConfig& c) { return c.annealing.h_phys_star; },
          [](SolverConfig& c, double v) { c.annealing.h_phys_star = v; })
      .def_property(
          "K", [](const SolverConfig& c) { return c.annealing.K; }, [](SolverConfig& c, int v) { c.annealing.K = v; })
      .def_property(
          "inner_max_iterations", [](const SolverConfig& c) { return c.inner.max_iterations; },
          [](SolverConfig& c, int v) { c.inner.max_iterations = v; })
      .def_property(
          "objective", [](const SolverConfig& c) { return to_string(c.objective); },
          [](SolverConfig& c, const std::string& k) { c.objective = objective_kind_from_string(k); })
      .def_property(
          "seed_strategy", [](const SolverConfig& c) { return to_string(c.seed_strategy); },
          [](SolverConfig& c, const std::string& k) { c.seed_strategy = seed_strategy_from_string(k); })
      .def_readwrite("normalize_domain", &SolverConfig::normalize_domain)
      .def_readwrite("anneal", &SolverConfig::anneal)
      .def_readwrite("fixed_bandwidth", &SolverConfig::fixed_bandwidth)
      .def_readwrite("rng_seed", &SolverConfig::rng_seed);

  py::class_<SolverReport>(m, "SolverReport")
      .def_property_readonly("states", [](const SolverReport& r) { return rows(r.trajectory.states); })
      .def_property_readonly("dt", [](const SolverReport& r) { return r.trajectory.dt(); })
      .def_readonly("schedule", &SolverReport::schedule)
      .def_readonly("converged", &SolverReport::converged)
      .def_readonly("final_objective", &SolverReport::final_objective)
      .def_readonly("evaluations", &SolverReport::evaluations)
      .def_readonly("extent", &SolverReport::extent)
      .def_readonly("offset", &SolverReport::offset)
      .def_readonly("message", &SolverReport::message)
      .def_property_readonly("max_eq_violation", [](const SolverReport& r) { return r.residuals.max_eq_violation; })
      .def_property_readonly("max_ineq_violation",
                             [](const SolverReport& r) { return r.residuals.max_ineq_violation; })
      .def_property_readonly("trace_al_value", [](const SolverReport& r) {
        std::vector<double> v;
        v.reserve(r.trace.size());
        for (const auto& t : r.trace) v.push_back(t.al_value);
        return v;
      });

  m.def(
      "plan",
      [](const RowPoints& samples, DynamicsModel model, const SolverConfig& config, std::optional<Vec> weights) {
        const NormalizedDomain domain(samples_from(samples, weights));
        model.pos_dim = static_cast<int>(domain.dim());
        py::gil_scoped_release release;
        return solve(domain, model, config);
      },
      py::arg("samples"), py::arg("model"), py::arg("config"), py::arg("weights") = py::none(),
      "Solve one trajectory; positions are the first d columns of SolverReport.states.");
}
