#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "routepref/learn.hpp"
#include "routepref/routing.hpp"

namespace routepref {

inline constexpr double kDefaultEpsilon = 1e-12;
/// Cost placed on the diagonal of arc-cost matrices; large enough never to be selected.
inline constexpr double kDiagonalCost = 1e9;
/// Objectives closer than this are treated as ties.
inline constexpr double kTieTolerance = 1e-9;

/// Arc costs c_ij = -log(max(p_ij, epsilon)) over the index of `p`.
Eigen::MatrixXd build_arc_costs(const TransitionMatrix& p, double epsilon = kDefaultEpsilon);

/// Costs of a second-order objective over local indices 0..n (0 = depot).
struct SecondOrderCosts {
    std::size_t dim = 0;          // n + 1
    std::vector<double> triple;   // [prev][cur][next], cur != 0 is the only part ever read
    std::vector<double> depot;    // cost of leaving the depot towards each local stop

    double at(std::size_t a, std::size_t b, std::size_t c) const { return triple[(a * dim + b) * dim + c]; }
};

/// A CVRP instance over local indices: local 0 is the depot, local l >= 1 is `stops[l - 1]`.
struct CvrpProblem {
    std::vector<StopId> stops;
    int fleet = 1;
    int capacity = 1;
    std::vector<int> demand;      // by local index, demand[0] == 0
    bool fleet_equality = false;  // exactly `fleet` tours instead of at most
    Eigen::MatrixXd costs;        // first-order arc costs by local index
    std::optional<SecondOrderCosts> second;

    std::size_t size() const { return stops.size(); }
    StopId stop(std::size_t local) const { return local == 0 ? kDepot : stops[local - 1]; }
    DemandMap demand_map() const;
    int total_demand() const;

    /// Builds a problem whose local cost matrix is `local_costs` ((n+1) x (n+1)).
    static CvrpProblem from_costs(std::vector<StopId> stops, int fleet, int capacity, const DemandMap& demands,
                                  Eigen::MatrixXd local_costs, bool fleet_equality = false);
};

/// First-order problem with costs -log p restricted to `stops`.
CvrpProblem make_problem(const std::vector<StopId>& stops, int fleet, int capacity, const DemandMap& demands,
                         const TransitionMatrix& p, bool fleet_equality = false,
                         double epsilon = kDefaultEpsilon);

/// Second-order problem: depot departures from the depot row, everything else from p(k | i, j).
CvrpProblem make_problem(const std::vector<StopId>& stops, int fleet, int capacity, const DemandMap& demands,
                         const SecondOrderTensor& p, bool fleet_equality = false,
                         double epsilon = kDefaultEpsilon);

/// Unit demands with Q = n: keeps load propagation (and thus subtour elimination) without a capacity limit.
CvrpProblem capacity_free_problem(const std::vector<StopId>& stops, int fleet,
                                  std::optional<Eigen::MatrixXd> local_costs = std::nullopt);

struct SolveLimits {
    std::uint64_t max_nodes = 200'000'000;
    double max_seconds = 120.0;
};

struct HeuristicOptions {
    std::uint64_t iterations = 300;
    double max_seconds = 30.0;
};

struct SolveReport {
    Routing routing;
    double objective = 0.0;
    bool optimal = false;
    std::uint64_t nodes_explored = 0;
    std::uint64_t iterations = 0;
    double wall_time = 0.0;
    /// Best objective after construction and after each improvement iteration (heuristic only).
    std::vector<double> trace;
};

/// Objective of `r` under the problem's cost model (second order when `prob.second` is set).
double routing_cost(const CvrpProblem& prob, const Routing& r);

/// Daisy chain of `r` used for tie-breaking (lexicographically smaller wins).
std::vector<StopId> tie_key(const Routing& r);

/// Branch and bound over daisy-chain extensions with load propagation.
SolveReport solve_exact_first_order(const CvrpProblem& prob, const SolveLimits& limits = {});

/// Same search with the objective made of depot departures and products of consecutive arcs.
SolveReport solve_exact_second_order(const CvrpProblem& prob, const SolveLimits& limits = {});

/// Regret insertion, then iterated ruin-and-recreate with local search. Deterministic for a seed.
SolveReport solve_heuristic_first_order(const CvrpProblem& prob, std::uint64_t seed = 0,
                                        const HeuristicOptions& options = {});

inline constexpr std::size_t kOracleMaxFirstOrder = 8;
inline constexpr std::size_t kOracleMaxSecondOrder = 6;

/// Exhaustive enumeration of every feasible routing. Refuses instances above the size limits.
SolveReport brute_force_oracle(const CvrpProblem& prob, int order);

/// Throws InfeasibleError when a demand exceeds Q, total demand exceeds m * Q,
/// or fleet equality asks for more tours than stops.
void check_trivially_feasible(const CvrpProblem& prob);

}  // namespace routepref
