#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <random>

#include "routepref/error.hpp"
#include "routepref/solve.hpp"

namespace routepref {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kImprove = 1e-10;

using Route = std::vector<int>;

struct Solution {
    std::vector<Route> routes;
    std::vector<int> loads;
};

class Heuristic {
public:
    Heuristic(const CvrpProblem& prob, std::uint64_t seed) : p_(prob), cost_(prob.costs), rng_(seed) {
        cost_(0, 0) = 0.0;  // an empty route is a (0, 0) "arc" that costs nothing
    }

    SolveReport run(const HeuristicOptions& opt) {
        const auto start = Clock::now();
        SolveReport rep;
        Solution best = initial();
        local_search(best);
        double best_cost = total(best);
        rep.trace.push_back(best_cost);

        const int n = static_cast<int>(p_.size());
        for (std::uint64_t it = 0; it < opt.iterations && n > 1; ++it) {
            if (std::chrono::duration<double>(Clock::now() - start).count() > opt.max_seconds) break;
            ++rep.iterations;
            Solution cand = best;
            std::vector<int> removed = ruin(cand);
            if (insert_regret(cand, removed)) {
                local_search(cand);
                const double c = total(cand);
                if (c < best_cost - kImprove) {
                    best = std::move(cand);
                    best_cost = c;
                }
            }
            rep.trace.push_back(best_cost);
        }

        for (const Route& r : best.routes) {
            if (r.empty()) continue;
            Tour t;
            for (int l : r) t.push_back(p_.stop(static_cast<std::size_t>(l)));
            rep.routing.tours.push_back(std::move(t));
        }
        rep.routing = rep.routing.canonical();
        rep.objective = routing_cost(p_, rep.routing);
        rep.optimal = false;
        rep.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
        return rep;
    }

private:
    double c(int a, int b) const { return cost_(a, b); }
    int q(int l) const { return p_.demand[static_cast<std::size_t>(l)]; }
    int n() const { return static_cast<int>(p_.size()); }

    std::uint64_t below(std::uint64_t bound) { return rng_() % bound; }
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    double route_cost(const Route& r) const {
        if (r.empty()) return 0.0;
        double s = c(0, r.front()) + c(r.back(), 0);
        for (std::size_t i = 1; i < r.size(); ++i) s += c(r[i - 1], r[i]);
        return s;
    }

    double total(const Solution& s) const {
        double t = 0.0;
        for (const Route& r : s.routes) t += route_cost(r);
        return t;
    }

    static int nonempty(const Solution& s) {
        return static_cast<int>(std::count_if(s.routes.begin(), s.routes.end(), [](const Route& r) { return !r.empty(); }));
    }

    Solution initial() {
        Solution s;
        s.routes.assign(static_cast<std::size_t>(p_.fleet), {});
        s.loads.assign(static_cast<std::size_t>(p_.fleet), 0);
        std::vector<int> pending(static_cast<std::size_t>(n()));
        std::iota(pending.begin(), pending.end(), 1);
        if (insert_regret(s, pending)) return s;
        if (first_fit(s)) return s;
        throw BudgetExhaustedError("heuristic could not find a feasible routing");
    }

    /// First-fit decreasing packing, each bin then ordered by cheapest insertion.
    bool first_fit(Solution& s) {
        std::vector<int> order(static_cast<std::size_t>(n()));
        std::iota(order.begin(), order.end(), 1);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return q(a) > q(b); });
        std::vector<std::vector<int>> bins(static_cast<std::size_t>(p_.fleet));
        std::vector<int> loads(static_cast<std::size_t>(p_.fleet), 0);
        for (int l : order) {
            bool placed = false;
            for (std::size_t b = 0; b < bins.size() && !placed; ++b) {
                if (loads[b] + q(l) <= p_.capacity) {
                    bins[b].push_back(l);
                    loads[b] += q(l);
                    placed = true;
                }
            }
            if (!placed) return false;
        }
        if (p_.fleet_equality && std::any_of(bins.begin(), bins.end(), [](const auto& b) { return b.empty(); }))
            return false;
        s.routes.assign(bins.size(), {});
        s.loads = loads;
        for (std::size_t b = 0; b < bins.size(); ++b)
            for (int l : bins[b]) {
                auto [delta, pos] = best_position(s.routes[b], l);
                (void)delta;
                s.routes[b].insert(s.routes[b].begin() + pos, l);
            }
        return true;
    }

    std::pair<double, std::size_t> best_position(const Route& r, int l) const {
        double best = kInf;
        std::size_t at = 0;
        for (std::size_t pos = 0; pos <= r.size(); ++pos) {
            const int a = pos == 0 ? 0 : r[pos - 1];
            const int b = pos == r.size() ? 0 : r[pos];
            const double d = c(a, l) + c(l, b) - c(a, b);
            if (d < best) {
                best = d;
                at = pos;
            }
        }
        return {best, at};
    }

    /// Regret-2 insertion of `pending`; in fleet-equality mode empty routes are seeded first.
    bool insert_regret(Solution& s, std::vector<int> pending) {
        std::sort(pending.begin(), pending.end());
        if (p_.fleet_equality) {
            for (std::size_t r = 0; r < s.routes.size() && !pending.empty(); ++r) {
                if (!s.routes[r].empty()) continue;
                auto far = std::max_element(pending.begin(), pending.end(), [&](int a, int b) {
                    return c(0, a) + c(a, 0) < c(0, b) + c(b, 0);
                });
                s.routes[r].push_back(*far);
                s.loads[r] += q(*far);
                pending.erase(far);
            }
        }
        while (!pending.empty()) {
            double best_regret = -kInf, best_first = kInf;
            std::size_t pick = 0, pick_route = 0, pick_pos = 0;
            for (std::size_t k = 0; k < pending.size(); ++k) {
                const int l = pending[k];
                double b1 = kInf, b2 = kInf;
                std::size_t r1 = 0, pos1 = 0;
                bool empty_seen = false;
                for (std::size_t r = 0; r < s.routes.size(); ++r) {
                    if (s.loads[r] + q(l) > p_.capacity) continue;
                    if (s.routes[r].empty()) {
                        if (empty_seen) continue;
                        empty_seen = true;
                    }
                    auto [d, pos] = best_position(s.routes[r], l);
                    if (d < b1) {
                        b2 = b1;
                        b1 = d;
                        r1 = r;
                        pos1 = pos;
                    } else if (d < b2) {
                        b2 = d;
                    }
                }
                if (b1 == kInf) return false;
                const double regret = b2 == kInf ? kInf : b2 - b1;
                const bool better = regret > best_regret + 1e-12 ||
                                    (regret >= best_regret - 1e-12 && b1 < best_first - 1e-12);
                if (k == 0 || better) {
                    best_regret = regret;
                    best_first = b1;
                    pick = k;
                    pick_route = r1;
                    pick_pos = pos1;
                }
            }
            const int l = pending[pick];
            s.routes[pick_route].insert(s.routes[pick_route].begin() + static_cast<long>(pick_pos), l);
            s.loads[pick_route] += q(l);
            pending.erase(pending.begin() + static_cast<long>(pick));
        }
        return true;
    }

    /// Removes a random or a cost-related group of stops.
    std::vector<int> ruin(Solution& s) {
        const int total_stops = n();
        const double frac = 0.1 + 0.3 * unit();
        const int k = std::clamp(static_cast<int>(frac * total_stops + 0.5), 1, std::max(1, total_stops - 1));
        std::vector<int> all(static_cast<std::size_t>(total_stops));
        std::iota(all.begin(), all.end(), 1);
        std::vector<int> removed;
        if (unit() < 0.5) {
            for (int i = 0; i < k; ++i) {
                const auto j = static_cast<std::size_t>(i) + below(all.size() - static_cast<std::size_t>(i));
                std::swap(all[static_cast<std::size_t>(i)], all[j]);
                removed.push_back(all[static_cast<std::size_t>(i)]);
            }
        } else {
            const int seed = all[below(all.size())];
            std::stable_sort(all.begin(), all.end(), [&](int a, int b) {
                const double da = a == seed ? -kInf : c(seed, a) + c(a, seed);
                const double db = b == seed ? -kInf : c(seed, b) + c(b, seed);
                return da < db;
            });
            removed.assign(all.begin(), all.begin() + k);
        }
        std::vector<bool> gone(static_cast<std::size_t>(total_stops) + 1, false);
        for (int l : removed) gone[static_cast<std::size_t>(l)] = true;
        for (std::size_t r = 0; r < s.routes.size(); ++r) {
            auto& route = s.routes[r];
            route.erase(std::remove_if(route.begin(), route.end(), [&](int l) { return gone[static_cast<std::size_t>(l)]; }),
                        route.end());
            s.loads[r] = 0;
            for (int l : route) s.loads[r] += q(l);
        }
        return removed;
    }

    void local_search(Solution& s) {
        for (int guard = 0; guard < 100000; ++guard)
            if (!relocate(s) && !swap(s) && !two_opt(s) && !two_opt_star(s)) break;
    }

    bool relocate(Solution& s) {
        const std::size_t R = s.routes.size();
        for (std::size_t a = 0; a < R; ++a) {
            const Route& A = s.routes[a];
            if (p_.fleet_equality && A.size() == 1) continue;
            for (std::size_t i = 0; i < A.size(); ++i) {
                const int x = A[i];
                const int pa = i == 0 ? 0 : A[i - 1];
                const int na = i + 1 == A.size() ? 0 : A[i + 1];
                const double removal = c(pa, na) - c(pa, x) - c(x, na);
                bool empty_seen = false;
                for (std::size_t b = 0; b < R; ++b) {
                    const Route& B = s.routes[b];
                    if (b != a) {
                        if (s.loads[b] + q(x) > p_.capacity) continue;
                        if (B.empty()) {
                            if (empty_seen || A.size() == 1) continue;
                            empty_seen = true;
                        }
                        for (std::size_t pos = 0; pos <= B.size(); ++pos) {
                            const int u = pos == 0 ? 0 : B[pos - 1];
                            const int v = pos == B.size() ? 0 : B[pos];
                            if (removal + c(u, x) + c(x, v) - c(u, v) < -kImprove) {
                                s.routes[a].erase(s.routes[a].begin() + static_cast<long>(i));
                                s.routes[b].insert(s.routes[b].begin() + static_cast<long>(pos), x);
                                s.loads[a] -= q(x);
                                s.loads[b] += q(x);
                                return true;
                            }
                        }
                    } else {
                        Route rest = A;
                        rest.erase(rest.begin() + static_cast<long>(i));
                        for (std::size_t pos = 0; pos <= rest.size(); ++pos) {
                            if (pos == i) continue;
                            const int u = pos == 0 ? 0 : rest[pos - 1];
                            const int v = pos == rest.size() ? 0 : rest[pos];
                            if (removal + c(u, x) + c(x, v) - c(u, v) < -kImprove) {
                                rest.insert(rest.begin() + static_cast<long>(pos), x);
                                s.routes[a] = std::move(rest);
                                return true;
                            }
                        }
                    }
                }
            }
        }
        return false;
    }

    bool swap(Solution& s) {
        const std::size_t R = s.routes.size();
        for (std::size_t a = 0; a < R; ++a) {
            for (std::size_t b = a; b < R; ++b) {
                Route& A = s.routes[a];
                Route& B = s.routes[b];
                for (std::size_t i = 0; i < A.size(); ++i) {
                    for (std::size_t j = (a == b ? i + 1 : 0); j < B.size(); ++j) {
                        const int x = A[i], y = B[j];
                        if (a == b) {
                            const double before = route_cost(A);
                            std::swap(A[i], A[j]);
                            if (route_cost(A) < before - kImprove) return true;
                            std::swap(A[i], A[j]);
                            continue;
                        }
                        if (s.loads[a] - q(x) + q(y) > p_.capacity || s.loads[b] - q(y) + q(x) > p_.capacity) continue;
                        const int pa = i == 0 ? 0 : A[i - 1], na = i + 1 == A.size() ? 0 : A[i + 1];
                        const int pb = j == 0 ? 0 : B[j - 1], nb = j + 1 == B.size() ? 0 : B[j + 1];
                        const double d = c(pa, y) + c(y, na) - c(pa, x) - c(x, na) + c(pb, x) + c(x, nb) - c(pb, y) -
                                         c(y, nb);
                        if (d < -kImprove) {
                            std::swap(A[i], B[j]);
                            s.loads[a] += q(y) - q(x);
                            s.loads[b] += q(x) - q(y);
                            return true;
                        }
                    }
                }
            }
        }
        return false;
    }

    /// Segment reversal inside one route (costs may be asymmetric, so the segment is re-priced).
    bool two_opt(Solution& s) {
        for (Route& A : s.routes) {
            const std::size_t len = A.size();
            if (len < 2) continue;
            std::vector<double> fwd(len, 0.0), bwd(len, 0.0);  // prefix costs along / against the route
            for (std::size_t k = 1; k < len; ++k) {
                fwd[k] = fwd[k - 1] + c(A[k - 1], A[k]);
                bwd[k] = bwd[k - 1] + c(A[k], A[k - 1]);
            }
            for (std::size_t i = 0; i + 1 < len; ++i) {
                const int before = i == 0 ? 0 : A[i - 1];
                for (std::size_t j = i + 1; j < len; ++j) {
                    const int after = j + 1 == len ? 0 : A[j + 1];
                    const double old_cost = c(before, A[i]) + (fwd[j] - fwd[i]) + c(A[j], after);
                    const double new_cost = c(before, A[j]) + (bwd[j] - bwd[i]) + c(A[i], after);
                    if (new_cost < old_cost - kImprove) {
                        std::reverse(A.begin() + static_cast<long>(i), A.begin() + static_cast<long>(j) + 1);
                        return true;
                    }
                }
            }
        }
        return false;
    }

    /// Exchange of route tails between two routes.
    bool two_opt_star(Solution& s) {
        const std::size_t R = s.routes.size();
        for (std::size_t a = 0; a < R; ++a) {
            for (std::size_t b = a + 1; b < R; ++b) {
                const Route& A = s.routes[a];
                const Route& B = s.routes[b];
                if (A.empty() && B.empty()) continue;
                std::vector<int> la(A.size() + 1, 0), lb(B.size() + 1, 0);
                for (std::size_t k = 0; k < A.size(); ++k) la[k + 1] = la[k] + q(A[k]);
                for (std::size_t k = 0; k < B.size(); ++k) lb[k + 1] = lb[k] + q(B[k]);
                for (std::size_t i = 0; i <= A.size(); ++i) {      // A keeps A[0, i)
                    for (std::size_t j = 0; j <= B.size(); ++j) {  // B keeps B[0, j)
                        if (i == A.size() && j == B.size()) continue;
                        if (i == 0 && j == 0) continue;
                        const std::size_t new_a = i + (B.size() - j);
                        const std::size_t new_b = j + (A.size() - i);
                        if (p_.fleet_equality && (new_a == 0 || new_b == 0)) continue;
                        if (la[i] + (lb.back() - lb[j]) > p_.capacity) continue;
                        if (lb[j] + (la.back() - la[i]) > p_.capacity) continue;
                        const int ai = i == 0 ? 0 : A[i - 1], an = i == A.size() ? 0 : A[i];
                        const int bj = j == 0 ? 0 : B[j - 1], bn = j == B.size() ? 0 : B[j];
                        const double d = c(ai, bn) + c(bj, an) - c(ai, an) - c(bj, bn);
                        if (d < -kImprove) {
                            Route na(A.begin(), A.begin() + static_cast<long>(i));
                            na.insert(na.end(), B.begin() + static_cast<long>(j), B.end());
                            Route nb(B.begin(), B.begin() + static_cast<long>(j));
                            nb.insert(nb.end(), A.begin() + static_cast<long>(i), A.end());
                            s.loads[a] = la[i] + (lb.back() - lb[j]);
                            s.loads[b] = lb[j] + (la.back() - la[i]);
                            s.routes[a] = std::move(na);
                            s.routes[b] = std::move(nb);
                            return true;
                        }
                    }
                }
            }
        }
        return false;
    }

    const CvrpProblem& p_;
    Eigen::MatrixXd cost_;
    std::mt19937_64 rng_;
};

}  // namespace

SolveReport solve_heuristic_first_order(const CvrpProblem& prob, std::uint64_t seed, const HeuristicOptions& options) {
    check_trivially_feasible(prob);
    if (prob.size() == 0) return {};
    CvrpProblem first = prob;
    first.second.reset();
    Heuristic h(first, seed);
    SolveReport rep = h.run(options);
    rep.objective = routing_cost(prob, rep.routing);
    return rep;
}

}  // namespace routepref
