#pragma once

#include <random>
#include <vector>

#include "routepref/learn.hpp"
#include "routepref/routing.hpp"
#include "routepref/solve.hpp"

namespace routepref::testing {

/// Instance with unit demands and Q large enough for any tour.
inline HistoryInstance make_instance(int t, std::vector<Tour> tours, int fleet = 0) {
    HistoryInstance inst;
    inst.timestamp = t;
    inst.routing.tours = std::move(tours);
    inst.stops = inst.routing.stop_set();
    inst.fleet = fleet > 0 ? fleet : static_cast<int>(inst.routing.tours.size());
    for (StopId s : inst.stops) inst.demands[s] = 1;
    inst.capacity = static_cast<int>(inst.stops.size());
    return inst;
}

inline HistoryDataset make_dataset(const std::vector<std::vector<Tour>>& routings) {
    HistoryDataset ds;
    StopId max_id = 0;
    int t = 1;
    for (const auto& r : routings) {
        ds.instances.push_back(make_instance(t++, r));
        for (const auto& tour : r)
            for (StopId s : tour) max_id = std::max(max_id, s);
    }
    for (StopId s = 1; s <= max_id; ++s) ds.table.intern("s" + std::to_string(s));
    return ds;
}

inline std::vector<StopId> iota_stops(int n) {
    std::vector<StopId> v;
    for (int i = 1; i <= n; ++i) v.push_back(i);
    return v;
}

/// Random instance with uniform costs in [0, 10) and demands in [1, 4].
inline CvrpProblem random_problem(std::mt19937_64& rng, int n, int fleet, bool fleet_equality = false) {
    std::uniform_real_distribution<double> cost(0.0, 10.0);
    std::uniform_int_distribution<int> dem(1, 4);
    Eigen::MatrixXd c(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) c(i, j) = i == j ? kDiagonalCost : cost(rng);
    DemandMap q;
    int total = 0;
    for (int i = 1; i <= n; ++i) total += (q[i] = dem(rng));
    int maxq = 0;
    for (auto& [s, v] : q) maxq = std::max(maxq, v);
    const int cap = std::max(maxq, (total + fleet - 1) / fleet + 2);
    return CvrpProblem::from_costs(iota_stops(n), fleet, cap, q, c, fleet_equality);
}

/// Random second-order costs over the problem's local indices.
inline void attach_random_tensor(std::mt19937_64& rng, CvrpProblem& p) {
    std::uniform_real_distribution<double> cost(0.0, 10.0);
    SecondOrderCosts sc;
    sc.dim = p.size() + 1;
    sc.triple.resize(sc.dim * sc.dim * sc.dim);
    for (double& v : sc.triple) v = cost(rng);
    sc.depot.resize(sc.dim);
    for (double& v : sc.depot) v = cost(rng);
    p.second = std::move(sc);
}

}  // namespace routepref::testing
