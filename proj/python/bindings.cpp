#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flexgt/complexity.hpp"
#include "flexgt/experiment.hpp"
#include "flexgt/metrics.hpp"

namespace py = pybind11;
using namespace flexgt;

namespace {

Regime regime_from(const std::string& s) { return parse_regime(s); }

py::dict trajectory_to_dict(const Trajectory& t) {
  const std::size_t m = t.records.size();
  py::array_t<double> opt(m), cons(m), track(m), lyap(m), grad(m), fgap(m),
      fval(m);
  py::array_t<long> rounds(m), comp(m), comm(m);
  auto o = opt.mutable_unchecked<1>();
  auto c = cons.mutable_unchecked<1>();
  auto tr = track.mutable_unchecked<1>();
  auto l = lyap.mutable_unchecked<1>();
  auto g = grad.mutable_unchecked<1>();
  auto f = fgap.mutable_unchecked<1>();
  auto fv = fval.mutable_unchecked<1>();
  auto r = rounds.mutable_unchecked<1>();
  auto cp = comp.mutable_unchecked<1>();
  auto cm = comm.mutable_unchecked<1>();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& rec = t.records[k];
    o(k) = rec.opt_gap;
    c(k) = rec.cons_err;
    tr(k) = rec.track_err;
    l(k) = rec.lyapunov;
    g(k) = rec.grad_norm_sq;
    f(k) = rec.f_gap;
    fv(k) = rec.f_value;
    r(k) = rec.round;
    cp(k) = rec.comp_steps;
    cm(k) = rec.comm_steps;
  }
  py::dict d;
  d["round"] = rounds;
  d["opt_gap"] = opt;
  d["cons_err"] = cons;
  d["track_err"] = track;
  d["lyapunov"] = lyap;
  d["grad_norm_sq"] = grad;
  d["f_gap"] = fgap;
  d["f_value"] = fval;
  d["comp_steps"] = comp;
  d["comm_steps"] = comm;
  return d;
}

}  // namespace

PYBIND11_MODULE(_flexgt, m) {
  m.doc() =
      "Decentralized stochastic optimization simulator: snapshot gradient "
      "tracking with tunable communication (alpha) and computation (beta) "
      "steps per round, gossip mixing operators, convergence diagnostics and "
      "communication/computation cost models.";
  m.attr("__version__") = FLEXGT_VERSION;

  py::class_<Topology>(m, "Topology")
      .def_readonly("n", &Topology::n)
      .def_readonly("neighbors", &Topology::neighbors)
      .def("degree", &Topology::degree)
      .def("connected", &Topology::connected)
      .def("symmetric", &Topology::symmetric);

  py::class_<MixingMatrix>(m, "MixingMatrix")
      .def_readonly("W", &MixingMatrix::W)
      .def_readonly("rho_w", &MixingMatrix::rho_w);

  py::class_<MixingOperator>(m, "MixingOperator")
      .def_readonly("matrix", &MixingOperator::matrix)
      .def_readonly("alpha", &MixingOperator::alpha)
      .def_readonly("rho_bar", &MixingOperator::rho_bar)
      .def_readonly("eta", &MixingOperator::eta)
      .def_readonly("rho_w", &MixingOperator::rho_w)
      .def_readonly("bound", &MixingOperator::bound)
      .def_readonly("bound_violated", &MixingOperator::bound_violated)
      .def_readonly("diagnostic", &MixingOperator::diagnostic);

  m.def(
      "build_topology",
      [](const std::string& kind, int n, int degree) {
        return build_topology(parse_graph_kind(kind), n, degree);
      },
      py::arg("kind"), py::arg("n"), py::arg("degree") = 0);
  m.def("metropolis_weights", &metropolis_weights);
  m.def("spectral_gap", &spectral_gap);
  m.def(
      "make_operator",
      [](const MixingMatrix& W, const std::string& protocol, int alpha) {
        return make_operator(W, parse_protocol(protocol), alpha);
      },
      py::arg("W"), py::arg("protocol"), py::arg("alpha"));
  m.def("mixing_bound", [](const std::string& protocol, double rho_w,
                           int alpha) {
    return mixing_bound(parse_protocol(protocol), rho_w, alpha);
  });

  py::class_<Problem>(m, "Problem")
      .def_property_readonly("n", &Problem::n)
      .def_property_readonly("p", &Problem::p)
      .def_property_readonly("L", &Problem::L)
      .def_property_readonly("mu", &Problem::mu)
      .def_property_readonly("sigma", &Problem::sigma)
      .def_property_readonly("regime",
                             [](const Problem& p) { return to_string(p.regime()); })
      .def("grad", &Problem::grad)
      .def("grad_avg", &Problem::grad_avg)
      .def("value", &Problem::value)
      .def("value_avg", &Problem::value_avg)
      .def("stoch_grad", &Problem::stoch_grad, py::arg("i"), py::arg("x"),
           py::arg("seed"), py::arg("step"), py::arg("salt_offset") = 0)
      .def("optimum",
           [](const Problem& p) -> py::object {
             auto x = p.optimum();
             if (!x) return py::none();
             return py::cast(*x);
           })
      .def("heterogeneity", &Problem::heterogeneity)
      .def("describe",
           [](const Problem& p) { return p.describe().dump(); });

  m.def("make_ridge", &Problem::ridge, py::arg("n"), py::arg("p"),
        py::arg("mu"), py::arg("sigma"), py::arg("seed"));
  m.def("make_least_squares", &Problem::least_squares, py::arg("n"),
        py::arg("p"), py::arg("sigma"), py::arg("seed"));
  m.def("make_nonconvex", &Problem::logistic_nonconvex, py::arg("n"),
        py::arg("p"), py::arg("sigma"), py::arg("seed"),
        py::arg("samples_per_node") = 20, py::arg("lambda") = 0.1);

  m.def("stepsize_rule", [](const std::string& regime, double L, int beta,
                            double rho_bar) {
    return stepsize_rule(regime_from(regime), L, beta, rho_bar);
  });

  m.def(
      "run",
      [](const Problem& problem, const MixingOperator& op,
         const std::string& method, int alpha, int beta, double gamma,
         long rounds, std::uint64_t seed) {
        AlgoConfig cfg;
        cfg.method = parse_method(method);
        cfg.protocol = op.protocol;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.gamma = gamma;
        return trajectory_to_dict(
            run(problem, cfg, op, rounds, seed));
      },
      py::arg("problem"), py::arg("op"), py::arg("method"), py::arg("alpha"),
      py::arg("beta"), py::arg("gamma"), py::arg("rounds"), py::arg("seed"),
      "Run a seeded trajectory; returns per-round metric arrays.");

  py::class_<CostPoint>(m, "CostPoint")
      .def(py::init([](double comm, double comp, int alpha, int beta) {
             return CostPoint{comm, comp, alpha, beta};
           }),
           py::arg("comm"), py::arg("comp"), py::arg("alpha") = 1,
           py::arg("beta") = 1)
      .def_readonly("comm", &CostPoint::comm)
      .def_readonly("comp", &CostPoint::comp)
      .def_readonly("alpha", &CostPoint::alpha)
      .def_readonly("beta", &CostPoint::beta)
      .def("__repr__", [](const CostPoint& c) {
        return "CostPoint(comm=" + std::to_string(c.comm) +
               ", comp=" + std::to_string(c.comp) +
               ", alpha=" + std::to_string(c.alpha) +
               ", beta=" + std::to_string(c.beta) + ")";
      });

  m.def(
      "iteration_complexity",
      [](const std::string& regime, double L, double mu, double sigma, int n,
         double rho_w, double epsilon, int alpha, int beta,
         const std::string& protocol, double V0, double f0_gap, double R0) {
        ComplexityQuery q;
        q.regime = regime_from(regime);
        q.L = L;
        q.mu = mu;
        q.sigma = sigma;
        q.n = n;
        q.rho_w = rho_w;
        q.epsilon = epsilon;
        q.alpha = alpha;
        q.beta = beta;
        q.protocol = parse_protocol(protocol);
        q.V0 = V0;
        q.f0_gap = f0_gap;
        q.R0 = R0;
        return iteration_complexity(q);
      },
      py::arg("regime"), py::arg("L"), py::arg("mu"), py::arg("sigma"),
      py::arg("n"), py::arg("rho_w"), py::arg("epsilon"), py::arg("alpha") = 1,
      py::arg("beta") = 1, py::arg("protocol") = "direct", py::arg("V0") = 1.0,
      py::arg("f0_gap") = 1.0, py::arg("R0") = 0.0);

  m.def(
      "table_costs",
      [](const std::string& regime, double L, double mu, double sigma, int n,
         double rho_w, double epsilon, int alpha, int beta,
         const std::string& protocol, double V0, double f0_gap, double R0) {
        ComplexityQuery q;
        q.regime = regime_from(regime);
        q.L = L;
        q.mu = mu;
        q.sigma = sigma;
        q.n = n;
        q.rho_w = rho_w;
        q.epsilon = epsilon;
        q.alpha = alpha;
        q.beta = beta;
        q.protocol = parse_protocol(protocol);
        q.V0 = V0;
        q.f0_gap = f0_gap;
        q.R0 = R0;
        return table_costs(q);
      },
      py::arg("regime"), py::arg("L"), py::arg("mu"), py::arg("sigma"),
      py::arg("n"), py::arg("rho_w"), py::arg("epsilon"), py::arg("alpha") = 1,
      py::arg("beta") = 1, py::arg("protocol") = "direct", py::arg("V0") = 1.0,
      py::arg("f0_gap") = 1.0, py::arg("R0") = 0.0);

  m.def(
      "select_alpha",
      [](const std::string& regime, double rho_w, int n, int beta, double L,
         double mu, double R0) {
        return select_alpha(regime_from(regime), rho_w, n, beta, L, mu, R0);
      },
      py::arg("regime"), py::arg("rho_w"), py::arg("n"), py::arg("beta"),
      py::arg("L"), py::arg("mu"), py::arg("R0") = 0.0);

  m.def("pareto_frontier", &pareto_frontier);
}
