#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "routepref/error.hpp"
#include "routepref/solve.hpp"

namespace routepref {

Eigen::MatrixXd build_arc_costs(const TransitionMatrix& p, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    const auto mu = p.probs.rows();
    Eigen::MatrixXd c(mu, mu);
    for (Eigen::Index i = 0; i < mu; ++i)
        for (Eigen::Index j = 0; j < mu; ++j)
            c(i, j) = i == j ? kDiagonalCost : -std::log(std::max(p.probs(i, j), epsilon));
    return c;
}

DemandMap CvrpProblem::demand_map() const {
    DemandMap m;
    for (std::size_t l = 1; l <= stops.size(); ++l) m[stops[l - 1]] = demand[l];
    return m;
}

int CvrpProblem::total_demand() const {
    int s = 0;
    for (int q : demand) s += q;
    return s;
}

namespace {

std::vector<int> local_demands(const std::vector<StopId>& stops, const DemandMap& demands) {
    std::vector<int> q(stops.size() + 1, 0);
    for (std::size_t l = 1; l <= stops.size(); ++l) {
        auto it = demands.find(stops[l - 1]);
        if (it == demands.end()) throw std::invalid_argument("no demand for stop " + std::to_string(stops[l - 1]));
        if (it->second <= 0) throw std::invalid_argument("demands must be positive");
        q[l] = it->second;
    }
    return q;
}

void check_stops(const std::vector<StopId>& stops) {
    std::vector<StopId> s = stops;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("duplicate stop in problem");
    if (!s.empty() && s.front() <= kDepot) throw std::invalid_argument("problem stops must exclude the depot");
}

}  // namespace

CvrpProblem CvrpProblem::from_costs(std::vector<StopId> stops, int fleet, int capacity, const DemandMap& demands,
                                    Eigen::MatrixXd local_costs, bool fleet_equality) {
    check_stops(stops);
    if (fleet < 1) throw std::invalid_argument("fleet size must be positive");
    if (capacity < 1) throw std::invalid_argument("capacity must be positive");
    const auto n1 = static_cast<Eigen::Index>(stops.size() + 1);
    if (local_costs.rows() != n1 || local_costs.cols() != n1)
        throw std::invalid_argument("cost matrix must be (n+1) x (n+1)");
    CvrpProblem p;
    p.demand = local_demands(stops, demands);
    p.stops = std::move(stops);
    p.fleet = fleet;
    p.capacity = capacity;
    p.fleet_equality = fleet_equality;
    p.costs = std::move(local_costs);
    return p;
}

CvrpProblem make_problem(const std::vector<StopId>& stops, int fleet, int capacity, const DemandMap& demands,
                         const TransitionMatrix& p, bool fleet_equality, double epsilon) {
    const Eigen::MatrixXd full = build_arc_costs(p, epsilon);
    const auto n1 = static_cast<Eigen::Index>(stops.size() + 1);
    std::vector<Eigen::Index> pos(stops.size() + 1);
    pos[0] = static_cast<Eigen::Index>(p.index.at(kDepot));
    for (std::size_t l = 1; l <= stops.size(); ++l) pos[l] = static_cast<Eigen::Index>(p.index.at(stops[l - 1]));
    Eigen::MatrixXd c(n1, n1);
    for (Eigen::Index a = 0; a < n1; ++a)
        for (Eigen::Index b = 0; b < n1; ++b) c(a, b) = full(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
    return CvrpProblem::from_costs(stops, fleet, capacity, demands, std::move(c), fleet_equality);
}

CvrpProblem make_problem(const std::vector<StopId>& stops, int fleet, int capacity, const DemandMap& demands,
                         const SecondOrderTensor& p, bool fleet_equality, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    const std::size_t n1 = stops.size() + 1;
    std::vector<std::size_t> pos(n1);
    pos[0] = p.index.at(kDepot);
    for (std::size_t l = 1; l < n1; ++l) pos[l] = p.index.at(stops[l - 1]);
    auto nlog = [epsilon](double v) { return -std::log(std::max(v, epsilon)); };

    SecondOrderCosts sc;
    sc.dim = n1;
    sc.triple.assign(n1 * n1 * n1, kDiagonalCost);
    sc.depot.assign(n1, kDiagonalCost);
    for (std::size_t a = 0; a < n1; ++a)
        for (std::size_t b = 0; b < n1; ++b)
            for (std::size_t c = 0; c < n1; ++c)
                if (b != c && a != b) sc.triple[(a * n1 + b) * n1 + c] = nlog(p.cell(pos[a], pos[b], pos[c]));
    for (std::size_t l = 1; l < n1; ++l) sc.depot[l] = nlog(p.depot_row(static_cast<Eigen::Index>(pos[l])));

    // First-order view: depot row for departures, the best continuation elsewhere. Used only for warm starts.
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n1), kDiagonalCost);
    for (std::size_t l = 1; l < n1; ++l) c(0, static_cast<Eigen::Index>(l)) = sc.depot[l];
    for (std::size_t b = 1; b < n1; ++b)
        for (std::size_t d = 0; d < n1; ++d) {
            if (d == b) continue;
            double best = kDiagonalCost;
            for (std::size_t a = 0; a < n1; ++a)
                if (a != b && a != d) best = std::min(best, sc.at(a, b, d));
            if (d == 0) best = std::min(best, sc.at(0, b, 0));
            c(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d)) = best;
        }
    auto prob = CvrpProblem::from_costs(stops, fleet, capacity, demands, std::move(c), fleet_equality);
    prob.second = std::move(sc);
    return prob;
}

CvrpProblem capacity_free_problem(const std::vector<StopId>& stops, int fleet,
                                  std::optional<Eigen::MatrixXd> local_costs) {
    DemandMap q;
    for (StopId s : stops) q[s] = 1;
    const auto n1 = static_cast<Eigen::Index>(stops.size() + 1);
    Eigen::MatrixXd c = local_costs ? *local_costs : Eigen::MatrixXd::Zero(n1, n1);
    const int cap = std::max<int>(1, static_cast<int>(stops.size()));
    return CvrpProblem::from_costs(stops, fleet, cap, q, std::move(c));
}

namespace {

std::unordered_map<StopId, std::size_t> local_map(const CvrpProblem& prob) {
    std::unordered_map<StopId, std::size_t> m;
    m[kDepot] = 0;
    for (std::size_t l = 1; l <= prob.stops.size(); ++l) m[prob.stops[l - 1]] = l;
    return m;
}

}  // namespace

double routing_cost(const CvrpProblem& prob, const Routing& r) {
    const auto loc = local_map(prob);
    auto L = [&](StopId s) {
        auto it = loc.find(s);
        if (it == loc.end()) throw std::invalid_argument("routing visits stop " + std::to_string(s) + " outside the problem");
        return it->second;
    };
    double total = 0.0;
    for (const Tour& t : r.canonical().tours) {
        if (t.empty()) continue;
        if (!prob.second) {
            std::size_t prev = 0;
            for (StopId s : t) {
                const auto l = L(s);
                total += prob.costs(static_cast<Eigen::Index>(prev), static_cast<Eigen::Index>(l));
                prev = l;
            }
            total += prob.costs(static_cast<Eigen::Index>(prev), 0);
        } else {
            const auto& sc = *prob.second;
            total += sc.depot[L(t.front())];
            for (std::size_t k = 0; k < t.size(); ++k) {
                const std::size_t a = k == 0 ? 0 : L(t[k - 1]);
                const std::size_t c = k + 1 == t.size() ? 0 : L(t[k + 1]);
                total += sc.at(a, L(t[k]), c);
            }
        }
    }
    return total;
}

std::vector<StopId> tie_key(const Routing& r) {
    if (r.tours.empty()) return {kDepot};
    return daisy_chain(r);
}

void check_trivially_feasible(const CvrpProblem& prob) {
    for (std::size_t l = 1; l < prob.demand.size(); ++l)
        if (prob.demand[l] > prob.capacity)
            throw InfeasibleError("stop " + std::to_string(prob.stops[l - 1]) + " demands " +
                                  std::to_string(prob.demand[l]) + " > capacity " + std::to_string(prob.capacity));
    if (static_cast<long>(prob.total_demand()) > static_cast<long>(prob.fleet) * prob.capacity)
        throw InfeasibleError("total demand " + std::to_string(prob.total_demand()) + " exceeds fleet capacity " +
                              std::to_string(static_cast<long>(prob.fleet) * prob.capacity));
    if (prob.fleet_equality && prob.size() < static_cast<std::size_t>(prob.fleet))
        throw InfeasibleError("exactly " + std::to_string(prob.fleet) + " tours requested for " +
                              std::to_string(prob.size()) + " stops");
}

}  // namespace routepref
