#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "routepref/error.hpp"
#include "routepref/solve.hpp"

namespace routepref {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMemoCap = 6'000'000;

struct StateKey {
    std::uint64_t mask;
    std::int32_t cur, prev, load, tours, req;
    bool operator==(const StateKey&) const = default;
};

struct StateKeyHash {
    std::size_t operator()(const StateKey& k) const {
        std::uint64_t h = k.mask * 0x9E3779B97F4A7C15ULL;
        for (std::int32_t v : {k.cur, k.prev, k.load, k.tours, k.req})
            h = (h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(v))) * 0xBF58476D1CE4E5B9ULL;
        return static_cast<std::size_t>(h ^ (h >> 31));
    }
};

/// Depth-first construction of the daisy chain, one arc at a time. Tours are generated in the
/// order of their smallest stop (each new tour must contain the lowest unvisited stop), so every
/// routing is reached exactly once. The load carried along a tour plays the role of u_i.
class BranchAndBound {
public:
    BranchAndBound(const CvrpProblem& prob, const SolveLimits& limits, bool second_order)
        : p_(prob), limits_(limits), second_(second_order), n_(static_cast<int>(prob.size())) {
        if (n_ > 63) throw std::invalid_argument("exact solver supports at most 63 stops");
        full_ = n_ == 64 ? ~0ULL : ((1ULL << n_) - 1);
        unvisited_demand_ = prob.total_demand();
    }

    void warm_start(const Routing& r) { consider(r, routing_cost(p_, r)); }

    SolveReport run() {
        start_ = Clock::now();
        path_ = {0};
        dfs(0, 0, 0.0);
        SolveReport rep;
        rep.nodes_explored = nodes_;
        rep.wall_time = std::chrono::duration<double>(Clock::now() - start_).count();
        if (!have_best_) {
            if (aborted_) throw BudgetExhaustedError("exact solver exhausted its budget without a feasible routing");
            throw InfeasibleError("no routing satisfies the fleet and capacity constraints");
        }
        rep.routing = best_routing_;
        rep.objective = routing_cost(p_, best_routing_);
        rep.optimal = !aborted_;
        return rep;
    }

private:
    static std::uint64_t bit(int local) { return 1ULL << (local - 1); }

    double arc(int prev, int cur, int next) const {
        if (!second_) return p_.costs(cur, next);
        if (cur == 0) return p_.second->depot[static_cast<std::size_t>(next)];
        return p_.second->at(static_cast<std::size_t>(prev), static_cast<std::size_t>(cur),
                             static_cast<std::size_t>(next));
    }

    void consider(const Routing& r, double obj) {
        auto key = tie_key(r);
        if (!have_best_ || obj < best_ - kTieTolerance || (obj <= best_ + kTieTolerance && key < best_key_)) {
            have_best_ = true;
            best_ = obj;
            best_key_ = std::move(key);
            best_routing_ = r.canonical();
        }
    }

    void record(double g) {
        Routing r;
        Tour t;
        for (std::size_t i = 1; i < path_.size(); ++i) {
            if (path_[i] == 0) {
                r.tours.push_back(t);
                t.clear();
            } else {
                t.push_back(p_.stop(static_cast<std::size_t>(path_[i])));
            }
        }
        consider(r, g);
    }

    bool out_of_budget() {
        if (nodes_ >= limits_.max_nodes) return true;
        if ((nodes_ & 1023) == 0)
            return std::chrono::duration<double>(Clock::now() - start_).count() > limits_.max_seconds;
        return false;
    }

    /// Sum of the `count` smallest values.
    static double smallest_sum(std::vector<double>& v, int count) {
        if (count <= 0) return 0.0;
        if (static_cast<std::size_t>(count) > v.size()) return kInf;
        std::nth_element(v.begin(), v.begin() + (count - 1), v.end());
        double s = 0.0;
        for (int i = 0; i < count; ++i) s += v[static_cast<std::size_t>(i)];
        return s;
    }

    /// Admissible bound on the cost still to be paid from this state, or +inf when infeasible.
    double lower_bound(int prev, int cur) {
        unvisited_.clear();
        for (std::uint64_t rest = ~mask_ & full_; rest; rest &= rest - 1)
            unvisited_.push_back(__builtin_ctzll(rest) + 1);
        const int k = static_cast<int>(unvisited_.size());
        const int Q = p_.capacity;
        int new_tours = 0;
        if (cur != 0) {
            const int spare = Q - load_;
            if (unvisited_demand_ > spare) new_tours = (unvisited_demand_ - spare + Q - 1) / Q;
        } else if (k > 0) {
            new_tours = std::max(1, (unvisited_demand_ + Q - 1) / Q);
        }
        if (p_.fleet_equality) new_tours = std::max(new_tours, p_.fleet - tours_);
        if (tours_ + new_tours > p_.fleet || new_tours > k) return kInf;

        double out = 0.0;
        scratch_.clear();
        for (int u : unvisited_) scratch_.push_back(arc(0, 0, u));
        out += smallest_sum(scratch_, new_tours);

        if (!second_) {
            const auto& c = p_.costs;
            if (cur != 0) {
                double best = c(cur, 0);
                for (int j : unvisited_) best = std::min(best, c(cur, j));
                out += best;
            }
            double in = 0.0;
            for (int u : unvisited_) {
                double bo = c(u, 0);
                double bi = c(0, u);
                if (cur != 0) bi = std::min(bi, c(cur, u));
                for (int j : unvisited_) {
                    if (j == u) continue;
                    bo = std::min(bo, c(u, j));
                    bi = std::min(bi, c(j, u));
                }
                out += bo;
                in += bi;
            }
            scratch_.clear();
            for (int u : unvisited_) scratch_.push_back(c(u, 0));
            if (cur != 0) scratch_.push_back(c(cur, 0));
            in += smallest_sum(scratch_, new_tours + (cur != 0 ? 1 : 0));
            return std::max(out, in);
        }

        if (cur != 0) {
            double best = arc(prev, cur, 0);
            for (int j : unvisited_) best = std::min(best, arc(prev, cur, j));
            out += best;
        }
        for (int u : unvisited_) {
            // Every unvisited stop is the middle of exactly one consecutive arc pair.
            double best = arc(0, u, 0);
            auto consider_pred = [&](int a) {
                for (int b : unvisited_)
                    if (b != u && b != a) best = std::min(best, arc(a, u, b));
                best = std::min(best, arc(a, u, 0));
            };
            consider_pred(0);
            if (cur != 0) consider_pred(cur);
            for (int a : unvisited_)
                if (a != u) consider_pred(a);
            out += best;
        }
        return out;
    }

    void dfs(int prev, int cur, double g) {
        if (aborted_) return;
        ++nodes_;
        if (out_of_budget()) {
            aborted_ = true;
            return;
        }
        if (cur == 0 && mask_ == full_) {
            if (!p_.fleet_equality || tours_ == p_.fleet) record(g);
            return;
        }
        const double lb = lower_bound(prev, cur);
        if (lb == kInf) return;
        if (have_best_ && g + lb > best_ + kTieTolerance) return;

        const bool req_pending = cur != 0 && !(mask_ & bit(req_));
        StateKey key{mask_, cur, second_ && cur != 0 ? prev : 0, cur != 0 ? load_ : 0, tours_, req_pending ? req_ : 0};
        if (auto it = memo_.find(key); it != memo_.end()) {
            if (g > it->second + kTieTolerance) return;
            it->second = std::min(it->second, g);
        } else if (memo_.size() < kMemoCap) {
            memo_.emplace(key, g);
        }

        std::vector<std::pair<double, int>> kids;
        if (cur == 0) {
            if (tours_ >= p_.fleet) return;
            const int req = __builtin_ctzll(~mask_ & full_) + 1;
            for (std::uint64_t rest = ~mask_ & full_; rest; rest &= rest - 1) {
                const int j = __builtin_ctzll(rest) + 1;
                kids.emplace_back(arc(0, 0, j), j);
            }
            std::sort(kids.begin(), kids.end());
            const int saved_req = req_;
            for (const auto& [cost, j] : kids) {
                mask_ |= bit(j);
                load_ = p_.demand[static_cast<std::size_t>(j)];
                unvisited_demand_ -= load_;
                ++tours_;
                req_ = req;
                path_.push_back(j);
                dfs(0, j, g + cost);
                path_.pop_back();
                --tours_;
                unvisited_demand_ += load_;
                load_ = 0;
                mask_ &= ~bit(j);
            }
            req_ = saved_req;
            return;
        }

        for (std::uint64_t rest = ~mask_ & full_; rest; rest &= rest - 1) {
            const int j = __builtin_ctzll(rest) + 1;
            if (load_ + p_.demand[static_cast<std::size_t>(j)] <= p_.capacity) kids.emplace_back(arc(prev, cur, j), j);
        }
        if (!req_pending) kids.emplace_back(arc(prev, cur, 0), 0);
        std::sort(kids.begin(), kids.end());
        for (const auto& [cost, j] : kids) {
            path_.push_back(j);
            if (j == 0) {
                const int saved_load = load_;
                load_ = 0;
                dfs(cur, 0, g + cost);
                load_ = saved_load;
            } else {
                const int q = p_.demand[static_cast<std::size_t>(j)];
                mask_ |= bit(j);
                load_ += q;
                unvisited_demand_ -= q;
                dfs(cur, j, g + cost);
                unvisited_demand_ += q;
                load_ -= q;
                mask_ &= ~bit(j);
            }
            path_.pop_back();
        }
    }

    const CvrpProblem& p_;
    SolveLimits limits_;
    bool second_;
    int n_;
    std::uint64_t full_ = 0;

    std::uint64_t mask_ = 0;
    int load_ = 0;
    int tours_ = 0;
    int req_ = 0;
    int unvisited_demand_ = 0;
    std::vector<int> path_;
    std::vector<int> unvisited_;
    std::vector<double> scratch_;

    bool have_best_ = false;
    double best_ = kInf;
    std::vector<StopId> best_key_;
    Routing best_routing_;

    std::uint64_t nodes_ = 0;
    bool aborted_ = false;
    Clock::time_point start_;
    std::unordered_map<StateKey, double, StateKeyHash> memo_;
};

SolveReport solve_exact(const CvrpProblem& prob, const SolveLimits& limits, bool second_order) {
    check_trivially_feasible(prob);
    if (prob.size() == 0) {
        SolveReport rep;
        rep.optimal = true;
        return rep;
    }
    BranchAndBound bb(prob, limits, second_order);
    try {
        HeuristicOptions warm;
        warm.iterations = 30;
        warm.max_seconds = 1.0;
        CvrpProblem first = prob;
        first.second.reset();
        bb.warm_start(solve_heuristic_first_order(first, 0, warm).routing);
    } catch (const std::exception&) {
        // no incumbent; the search starts cold
    }
    return bb.run();
}

}  // namespace

SolveReport solve_exact_first_order(const CvrpProblem& prob, const SolveLimits& limits) {
    if (prob.second) {
        CvrpProblem first = prob;
        first.second.reset();
        return solve_exact(first, limits, false);
    }
    return solve_exact(prob, limits, false);
}

SolveReport solve_exact_second_order(const CvrpProblem& prob, const SolveLimits& limits) {
    if (!prob.second) throw std::invalid_argument("second-order solve needs a problem with tensor costs");
    return solve_exact(prob, limits, true);
}

}  // namespace routepref
