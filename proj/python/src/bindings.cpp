#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "routepref/cli.hpp"
#include "routepref/error.hpp"
#include "routepref/eval.hpp"
#include "routepref/io.hpp"
#include "routepref/solve.hpp"
#include "routepref/synthetic.hpp"

namespace py = pybind11;
using namespace routepref;

namespace {

Routing to_routing(const std::vector<std::vector<StopId>>& tours) { return Routing{tours}; }

EvalConfig make_config(const std::string& scheme, double lambda, double alpha, double beta, int order,
                       bool dist_only, std::uint64_t seed, double split) {
    EvalConfig c;
    c.scheme = WeighingScheme::parse(scheme);
    c.scheme.alpha = alpha;
    c.lambda = lambda;
    c.beta = beta;
    c.order = order;
    c.dist_only = dist_only;
    c.seed = seed;
    c.split = split;
    c.record_timing = false;
    return c;
}

py::dict record_dict(const EvalRecord& r) {
    py::dict d;
    d["timestamp"] = r.timestamp;
    d["scheme"] = r.scheme;
    d["order"] = r.order;
    d["lambda"] = r.lambda;
    d["beta"] = r.beta;
    d["alpha"] = r.alpha;
    d["rd_pct"] = r.rd_pct;
    d["ad_pct"] = r.ad_pct;
    d["predicted_km"] = r.predicted_km;
    d["actual_km"] = r.actual_km;
    d["solve_s"] = r.solve_s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Routing preference learning: metrics, estimation, CVRP solvers and evaluation";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
    py::register_exception<BudgetExhaustedError>(m, "BudgetExhaustedError", PyExc_RuntimeError);

    py::class_<HistoryDataset>(m, "HistoryDataset")
        .def("__len__", &HistoryDataset::size)
        .def_property_readonly("stop_names", [](const HistoryDataset& ds) { return ds.table.names(); })
        .def_property_readonly("timestamps",
                               [](const HistoryDataset& ds) {
                                   std::vector<int> t;
                                   for (const auto& i : ds.instances) t.push_back(i.timestamp);
                                   return t;
                               })
        .def("tours", [](const HistoryDataset& ds, int t) { return ds.instances.at(static_cast<std::size_t>(t - 1)).routing.tours; },
             py::arg("timestamp"))
        .def("save", [](const HistoryDataset& ds, const std::string& path) { save_history(ds, path); });

    py::class_<DistanceMatrix>(m, "DistanceMatrix")
        .def_property_readonly("stops", [](const DistanceMatrix& d) { return d.index.stops(); })
        .def_readonly("km", &DistanceMatrix::dist);

    py::class_<TransitionMatrix>(m, "TransitionMatrix")
        .def_property_readonly("stops", [](const TransitionMatrix& p) { return p.index.stops(); })
        .def_readonly("probs", &TransitionMatrix::probs)
        .def_readonly("flagged_rows", &TransitionMatrix::flagged_rows);

    m.def("load_history", [](const std::string& path) { return load_history(path); }, py::arg("path"));
    m.def(
        "load_distances",
        [](const std::string& path, HistoryDataset& ds) { return load_distance_matrix(path, ds.table); },
        py::arg("path"), py::arg("history"));

    m.def(
        "generate_synthetic",
        [](const std::string& config_json) {
            const auto data = generate_synthetic(SyntheticConfig::from_json(config_json));
            return py::make_tuple(data.history, data.distances, ground_truth_json(data.truth, data.history.table));
        },
        py::arg("config_json") = "{}",
        "Returns (history, distances, ground truth JSON) for a JSON configuration.");

    m.def("daisy_chain", [](const std::vector<std::vector<StopId>>& tours) { return daisy_chain(to_routing(tours)); },
          py::arg("tours"));
    m.def(
        "route_difference",
        [](const std::vector<std::vector<StopId>>& p, const std::vector<std::vector<StopId>>& a) {
            return route_difference(to_routing(p), to_routing(a));
        },
        py::arg("predicted"), py::arg("actual"));
    m.def(
        "arc_difference",
        [](const std::vector<std::vector<StopId>>& p, const std::vector<std::vector<StopId>>& a) {
            return arc_difference(to_routing(p), to_routing(a));
        },
        py::arg("predicted"), py::arg("actual"));

    m.def(
        "estimate_first_order",
        [](const HistoryDataset& ds, const std::string& scheme, double lambda, double alpha) {
            auto w = WeighingScheme::parse(scheme);
            w.alpha = alpha;
            return estimate_first_order(ds, w, lambda);
        },
        py::arg("history"), py::arg("scheme") = "unif", py::arg("lambda_") = 1.0, py::arg("alpha") = 0.7);

    m.def(
        "solve_costs",
        [](const Eigen::MatrixXd& costs, const std::vector<int>& demands, int fleet, int capacity,
           const std::string& method, std::uint64_t seed) {
            const auto n = static_cast<int>(demands.size());
            if (costs.rows() != n + 1 || costs.cols() != n + 1)
                throw std::invalid_argument("costs must be (n + 1) x (n + 1) with the depot at index 0");
            std::vector<StopId> stops;
            DemandMap q;
            for (int i = 1; i <= n; ++i) {
                stops.push_back(i);
                q[i] = demands[static_cast<std::size_t>(i - 1)];
            }
            const auto prob = CvrpProblem::from_costs(stops, fleet, capacity, q, costs);
            SolveReport r;
            if (method == "exact") r = solve_exact_first_order(prob);
            else if (method == "heuristic") r = solve_heuristic_first_order(prob, seed);
            else if (method == "oracle") r = brute_force_oracle(prob, 1);
            else throw std::invalid_argument("method must be exact, heuristic or oracle");
            return py::make_tuple(r.routing.tours, r.objective);
        },
        py::arg("costs"), py::arg("demands"), py::arg("fleet"), py::arg("capacity"), py::arg("method") = "exact",
        py::arg("seed") = 0,
        "Solves a first-order CVRP over stops 1..n; returns (tours, objective).");

    m.def(
        "incremental_evaluate",
        [](const HistoryDataset& ds, const DistanceMatrix* distances, const std::string& scheme, double lambda_,
           double alpha, double beta, int order, bool dist_only, std::uint64_t seed, double split, bool by_weekday,
           int jobs) {
            const auto cfg = make_config(scheme, lambda_, alpha, beta, order, dist_only, seed, split);
            std::vector<EvalRecord> recs;
            {
                py::gil_scoped_release release;
                recs = by_weekday ? incremental_evaluate_by_weekday(ds, distances, cfg, jobs)
                                  : incremental_evaluate(ds, distances, cfg, jobs);
            }
            py::list out;
            for (const auto& r : recs) out.append(record_dict(r));
            return out;
        },
        py::arg("history"), py::arg("distances") = nullptr, py::arg("scheme") = "unif", py::arg("lambda_") = 1.0,
        py::arg("alpha") = 0.7, py::arg("beta") = 1.0, py::arg("order") = 1, py::arg("dist_only") = false,
        py::arg("seed") = 0, py::arg("split") = 0.75, py::arg("by_weekday") = false, py::arg("jobs") = 1);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
