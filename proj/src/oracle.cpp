#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "routepref/error.hpp"
#include "routepref/solve.hpp"

namespace routepref {

namespace {

/// Objective evaluated from the arc-incidence matrix x (and products x_ij x_jk for second order),
/// independently of the path-based accounting the solvers use.
double incidence_objective(const CvrpProblem& prob, const std::vector<std::vector<int>>& tours, int order,
                           std::vector<double>& x) {
    const std::size_t n1 = prob.size() + 1;
    std::fill(x.begin(), x.end(), 0.0);
    for (const auto& t : tours) {
        std::size_t prev = 0;
        for (int l : t) {
            x[prev * n1 + static_cast<std::size_t>(l)] = 1.0;
            prev = static_cast<std::size_t>(l);
        }
        x[prev * n1] = 1.0;
    }
    double obj = 0.0;
    if (order == 1) {
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t j = 0; j < n1; ++j)
                if (x[i * n1 + j] != 0.0) obj += prob.costs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[i * n1 + j];
        return obj;
    }
    const auto& sc = *prob.second;
    for (std::size_t j = 1; j < n1; ++j) obj += sc.depot[j] * x[j];
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 1; j < n1; ++j) {
            if (x[i * n1 + j] == 0.0) continue;
            for (std::size_t k = 0; k < n1; ++k) {
                const double y = x[i * n1 + j] * x[j * n1 + k];
                if (y != 0.0) obj += sc.at(i, j, k) * y;
            }
        }
    return obj;
}

}  // namespace

SolveReport brute_force_oracle(const CvrpProblem& prob, int order) {
    if (order != 1 && order != 2) throw std::invalid_argument("oracle order must be 1 or 2");
    if (order == 2 && !prob.second) throw std::invalid_argument("second-order oracle needs tensor costs");
    const std::size_t n = prob.size();
    if ((order == 1 && n > kOracleMaxFirstOrder) || (order == 2 && n > kOracleMaxSecondOrder))
        throw std::invalid_argument("instance too large for exhaustive enumeration");
    check_trivially_feasible(prob);

    const auto start = std::chrono::steady_clock::now();
    SolveReport rep;
    rep.optimal = true;
    if (n == 0) return rep;

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 1);
    std::vector<double> x((n + 1) * (n + 1));
    bool found = false;
    double best = 0.0;
    std::vector<StopId> best_key;
    const std::uint32_t cut_masks = 1u << (n - 1);
    do {
        for (std::uint32_t cuts = 0; cuts < cut_masks; ++cuts) {
            const int ntours = __builtin_popcount(cuts) + 1;
            if (ntours > prob.fleet || (prob.fleet_equality && ntours != prob.fleet)) continue;
            std::vector<std::vector<int>> tours(1);
            for (std::size_t k = 0; k < n; ++k) {
                tours.back().push_back(perm[k]);
                if (k + 1 < n && (cuts >> k & 1u)) tours.emplace_back();
            }
            bool canonical = true, fits = true;
            for (std::size_t t = 0; t < tours.size(); ++t) {
                if (t > 0 && tours[t].front() <= tours[t - 1].front()) canonical = false;
                int load = 0;
                for (int l : tours[t]) load += prob.demand[static_cast<std::size_t>(l)];
                if (load > prob.capacity) fits = false;
            }
            if (!canonical || !fits) continue;
            ++rep.nodes_explored;
            const double obj = incidence_objective(prob, tours, order, x);
            Routing r;
            for (const auto& t : tours) {
                Tour tt;
                for (int l : t) tt.push_back(prob.stop(static_cast<std::size_t>(l)));
                r.tours.push_back(std::move(tt));
            }
            auto key = tie_key(r);
            if (!found || obj < best - kTieTolerance || (obj <= best + kTieTolerance && key < best_key)) {
                found = true;
                best = obj;
                best_key = std::move(key);
                rep.routing = r.canonical();
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (!found) throw InfeasibleError("no routing satisfies the fleet and capacity constraints");
    rep.objective = best;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace routepref
