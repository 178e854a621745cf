#include "routepref/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "routepref/error.hpp"

namespace routepref {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<StopId> tour_set(const Tour& t) {
    std::vector<StopId> s(t);
    std::sort(s.begin(), s.end());
    return s;
}

void require_same_stops(const Routing& predicted, const Routing& actual) {
    if (predicted.stop_set() != actual.stop_set())
        throw std::invalid_argument("predicted and actual routings cover different stops");
}

/// Learned rows restricted to the instance stops and renormalised, so they can be mixed with
/// distance probabilities defined over the same support.
TransitionMatrix restrict_rows(const TransitionMatrix& p, const StopIndex& sub) {
    TransitionMatrix r;
    r.index = sub;
    r.lambda = p.lambda;
    const auto mu = static_cast<Eigen::Index>(sub.size());
    r.probs = Eigen::MatrixXd::Zero(mu, mu);
    r.flagged_rows.assign(sub.size(), false);
    for (Eigen::Index i = 0; i < mu; ++i) {
        const auto pi = static_cast<Eigen::Index>(p.index.at(sub.stop(static_cast<std::size_t>(i))));
        double total = 0.0;
        for (Eigen::Index j = 0; j < mu; ++j) {
            if (i == j) continue;
            const double v = p.probs(pi, static_cast<Eigen::Index>(p.index.at(sub.stop(static_cast<std::size_t>(j)))));
            r.probs(i, j) = v;
            total += v;
        }
        if (total > 0.0) {
            r.probs.row(i) /= total;
        } else if (mu > 1) {
            r.probs.row(i).setConstant(1.0 / static_cast<double>(mu - 1));
            r.probs(i, i) = 0.0;
            r.flagged_rows[static_cast<std::size_t>(i)] = true;
        }
    }
    return r;
}

TransitionMatrix distance_probabilities(const DistanceMatrix* distances, const StopIndex& sub, const EvalConfig& cfg) {
    if (!distances) throw std::invalid_argument("distance probabilities need a distance matrix");
    const DistanceMatrix d = distances->restricted(sub);
    const double theta = cfg.theta_auto ? solve_theta_star(d) : cfg.theta;
    return softmax_distance_matrix(d, theta);
}

TransitionMatrix learned_first_order(const HistoryDataset& train, const HistoryInstance& target, const EvalConfig& cfg) {
    if (train.empty()) throw DataError("no training instances precede the instance to solve");
    return extend_uniform(estimate_first_order(train, cfg.scheme, cfg.lambda, target.stops), target.stops);
}

std::uint64_t step_seed(std::uint64_t seed, int timestamp) {
    return seed ^ (static_cast<std::uint64_t>(timestamp) * 0x9E3779B97F4A7C15ULL);
}

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn fn) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
    std::vector<std::exception_ptr> errors(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    // The error of the earliest step wins, whatever the schedule was.
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

EvalRecord evaluate_step(const HistoryDataset& ds, int sigma, const DistanceMatrix* distances, const EvalConfig& cfg,
                         const StepObserver& observer) {
    const HistoryInstance& target = ds.instances.at(static_cast<std::size_t>(sigma - 1));
    const HistoryDataset train = ds.before(sigma);
    if (observer && !cfg.dist_only && cfg.order == 1) observer(sigma, train, learned_first_order(train, target, cfg));
    const SolveReport rep = predict_routing(train, target, distances, cfg);

    EvalRecord r;
    r.timestamp = target.timestamp;
    r.weekday = target.weekday;
    r.scheme = cfg.label();
    r.order = cfg.order;
    r.lambda = cfg.lambda;
    r.beta = cfg.dist_only ? 0.0 : cfg.beta;
    r.alpha = cfg.scheme.alpha;
    r.rd_pct = route_difference(rep.routing, target.routing);
    r.ad_pct = arc_difference(rep.routing, target.routing);
    r.predicted_km = distances ? routing_km(rep.routing, *distances) : kNaN;
    r.actual_km = distances ? routing_km(target.routing, *distances) : kNaN;
    r.solve_s = cfg.record_timing ? rep.wall_time : 0.0;
    return r;
}

std::vector<EvalRecord> evaluate_steps(const HistoryDataset& ds, const std::vector<int>& sigmas,
                                       const DistanceMatrix* distances, const EvalConfig& cfg, int jobs,
                                       const StepObserver& observer) {
    std::vector<EvalRecord> out(sigmas.size());
    parallel_for(sigmas.size(), jobs, [&](std::size_t i) { out[i] = evaluate_step(ds, sigmas[i], distances, cfg, observer); });
    return out;
}

void require_ranked(const HistoryDataset& ds) {
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.instances[i].timestamp != static_cast<int>(i) + 1)
            throw DataError("history timestamps must be ranked 1..|H|");
}

}  // namespace

void EvalConfig::validate() const {
    scheme.validate();
    if (order != 1 && order != 2) throw std::invalid_argument("order must be 1 or 2");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    if (!(split >= 0.0 && split <= 1.0)) throw std::invalid_argument("split must lie in [0, 1]");
    if (!theta_auto && !(theta > 0.0 && std::isfinite(theta))) throw std::invalid_argument("theta must be > 0");
    if (order == 2 && (beta < 1.0 || dist_only))
        throw std::invalid_argument("distance probabilities are first order; use --order 1 with --beta or --dist-only");
}

std::string EvalConfig::label() const { return dist_only ? "dist" : scheme.name(); }

double route_difference(const Routing& predicted, const Routing& actual) {
    require_same_stops(predicted, actual);
    const std::size_t n = actual.num_stops();
    if (n == 0) return 0.0;
    std::vector<std::vector<StopId>> P, A;
    for (const Tour& t : predicted.canonical().tours) P.push_back(tour_set(t));
    for (const Tour& t : actual.canonical().tours) A.push_back(tour_set(t));
    std::vector<bool> p_used(P.size(), false), a_used(A.size(), false);

    std::size_t misplaced = 0;
    for (std::size_t round = 0; round < std::min(P.size(), A.size()); ++round) {
        std::size_t best = std::numeric_limits<std::size_t>::max(), bi = 0, bj = 0;
        for (std::size_t i = 0; i < P.size(); ++i) {
            if (p_used[i]) continue;
            for (std::size_t j = 0; j < A.size(); ++j) {
                if (a_used[j]) continue;
                std::vector<StopId> sym;
                std::set_symmetric_difference(P[i].begin(), P[i].end(), A[j].begin(), A[j].end(), std::back_inserter(sym));
                if (sym.size() < best) {
                    best = sym.size();
                    bi = i;
                    bj = j;
                }
            }
        }
        p_used[bi] = a_used[bj] = true;
        std::vector<StopId> missing;
        std::set_difference(A[bj].begin(), A[bj].end(), P[bi].begin(), P[bi].end(), std::back_inserter(missing));
        misplaced += missing.size();
    }
    // Stops of leftover predicted routes are already missing from some matched actual route.
    for (std::size_t j = 0; j < A.size(); ++j)
        if (!a_used[j]) misplaced += A[j].size();
    return 100.0 * static_cast<double>(misplaced) / static_cast<double>(n);
}

double arc_difference(const Routing& predicted, const Routing& actual) {
    require_same_stops(predicted, actual);
    if (actual.tours.empty()) return 0.0;
    const auto pa = chain_arcs(predicted);
    const std::set<std::pair<StopId, StopId>> pred(pa.begin(), pa.end());
    const auto arcs = chain_arcs(actual);
    std::size_t missing = 0;
    for (const auto& a : arcs)
        if (!pred.count(a)) ++missing;
    return 100.0 * static_cast<double>(missing) / static_cast<double>(arcs.size());
}

double routing_km(const Routing& r, const DistanceMatrix& d) {
    double km = 0.0;
    try {
        for (const Tour& t : r.tours) {
            StopId prev = kDepot;
            for (StopId s : t) {
                km += d.at(prev, s);
                prev = s;
            }
            km += d.at(prev, kDepot);
        }
    } catch (const std::out_of_range&) {
        throw DataError("distance matrix does not cover every stop of the routing");
    }
    return km;
}

SolveReport predict_routing(const HistoryDataset& train, const HistoryInstance& target,
                            const DistanceMatrix* distances, const EvalConfig& cfg) {
    cfg.validate();
    const StopIndex sub(target.stops);
    DemandMap demands = target.demands;
    int capacity = target.capacity;
    if (cfg.capacity_free || target.capacity_free) {
        for (StopId s : target.stops) demands[s] = 1;
        capacity = static_cast<int>(target.stops.size());
    }

    if (cfg.order == 2) {
        if (train.empty()) throw DataError("no training instances precede the instance to solve");
        const auto tensor = extend_uniform(estimate_second_order(train, cfg.scheme, cfg.lambda, target.stops), target.stops);
        const auto prob = make_problem(target.stops, target.fleet, capacity, demands, tensor, cfg.fleet_equality);
        return solve_exact_second_order(prob, cfg.limits);
    }

    TransitionMatrix p;
    if (cfg.dist_only) {
        p = distance_probabilities(distances, sub, cfg);
    } else if (cfg.beta >= 1.0) {
        p = learned_first_order(train, target, cfg);
    } else {
        const TransitionMatrix learned = restrict_rows(learned_first_order(train, target, cfg), sub);
        p = mix_matrices(learned, distance_probabilities(distances, sub, cfg), cfg.beta);
    }
    const auto prob = make_problem(target.stops, target.fleet, capacity, demands, p, cfg.fleet_equality);
    const bool exact = cfg.solver == SolverChoice::Exact ||
                       (cfg.solver == SolverChoice::Auto && target.stops.size() <= cfg.exact_max_stops);
    if (exact) return solve_exact_first_order(prob, cfg.limits);
    return solve_heuristic_first_order(prob, step_seed(cfg.seed, target.timestamp), cfg.heuristic);
}

int initial_training_size(std::size_t history_size, double split) {
    if (history_size < 2) throw DataError("incremental evaluation needs at least 2 instances");
    const auto eta = static_cast<long long>(std::floor(split * static_cast<double>(history_size)));
    return static_cast<int>(std::clamp<long long>(eta, 1, static_cast<long long>(history_size) - 1));
}

std::vector<EvalRecord> incremental_evaluate(const HistoryDataset& ds, const DistanceMatrix* distances,
                                             const EvalConfig& cfg, int jobs, const StepObserver& observer) {
    cfg.validate();
    require_ranked(ds);
    const int eta = initial_training_size(ds.size(), cfg.split);
    std::vector<int> sigmas;
    for (int s = eta + 1; s <= static_cast<int>(ds.size()); ++s) sigmas.push_back(s);
    return evaluate_steps(ds, sigmas, distances, cfg, jobs, observer);
}

std::vector<EvalRecord> incremental_evaluate_by_weekday(const HistoryDataset& ds, const DistanceMatrix* distances,
                                                        const EvalConfig& cfg, int jobs) {
    cfg.validate();
    std::map<int, HistoryDataset> groups;
    std::map<int, std::vector<int>> original;
    for (const auto& inst : ds.instances) {
        auto& g = groups[inst.weekday];
        g.table = ds.table;
        g.instances.push_back(inst);
        original[inst.weekday].push_back(inst.timestamp);
    }
    std::vector<EvalRecord> out;
    for (auto& [day, g] : groups) {
        if (g.size() < 2) continue;  // nothing to train on
        g.rerank();
        auto recs = incremental_evaluate(g, distances, cfg, jobs);
        for (auto& r : recs) r.timestamp = original[day][static_cast<std::size_t>(r.timestamp - 1)];
        out.insert(out.end(), recs.begin(), recs.end());
    }
    std::stable_sort(out.begin(), out.end(), [](const EvalRecord& a, const EvalRecord& b) { return a.timestamp < b.timestamp; });
    return out;
}

DriftMode parse_drift_mode(const std::string& s) {
    if (s == "drop") return DriftMode::Drop;
    if (s == "rise") return DriftMode::Rise;
    throw std::invalid_argument("drift mode must be 'drop' or 'rise'");
}

std::vector<DriftRecord> drift_scenario(const HistoryDataset& ds, const DistanceMatrix* distances,
                                        const EvalConfig& cfg, DriftMode mode, int drift_timestamp, int jobs) {
    cfg.validate();
    require_ranked(ds);
    const int h = static_cast<int>(ds.size());
    if (drift_timestamp < 2 || drift_timestamp > h)
        throw DataError("drift timestamp " + std::to_string(drift_timestamp) + " lies outside 2.." + std::to_string(h));
    HistoryDataset work = ds;
    int drift = drift_timestamp;
    if (mode == DriftMode::Rise) {
        std::reverse(work.instances.begin(), work.instances.end());
        work.rerank();
        drift = h + 2 - drift_timestamp;  // the last pre-drift instance now comes first after the switch
    }
    if (drift - 3 < 2 || drift + 9 > h)
        throw DataError("the drift window needs 3 instances before the drift (plus training data) and 10 from it; "
                        "history has " + std::to_string(h) + " instances with the drift at rank " + std::to_string(drift));
    work.instances.resize(static_cast<std::size_t>(drift + 9));
    std::vector<int> sigmas;
    for (int s = drift - 3; s <= drift + 9; ++s) sigmas.push_back(s);
    auto recs = evaluate_steps(work, sigmas, distances, cfg, jobs, {});
    std::vector<DriftRecord> out;
    for (std::size_t i = 0; i < recs.size(); ++i) out.push_back({sigmas[i] - drift, std::move(recs[i])});
    return out;
}

std::vector<DriftRecord> drift_scenario_by_weekday(const HistoryDataset& ds, const DistanceMatrix* distances,
                                                   const EvalConfig& cfg, DriftMode mode, int drift_timestamp,
                                                   int jobs) {
    cfg.validate();
    std::map<int, HistoryDataset> groups;
    std::map<int, std::vector<int>> original;
    for (const auto& inst : ds.instances) {
        auto& g = groups[inst.weekday];
        g.table = ds.table;
        g.instances.push_back(inst);
        original[inst.weekday].push_back(inst.timestamp);
    }
    std::vector<DriftRecord> out;
    for (auto& [day, g] : groups) {
        const auto& ts = original[day];
        const auto first_after = std::lower_bound(ts.begin(), ts.end(), drift_timestamp);
        const int local = static_cast<int>(first_after - ts.begin()) + 1;
        const int h = static_cast<int>(ts.size());
        const int rank = mode == DriftMode::Rise ? h + 2 - local : local;
        if (local < 2 || local > h || rank - 3 < 2 || rank + 9 > h) continue;
        g.rerank();
        auto recs = drift_scenario(g, distances, cfg, mode, local, jobs);
        for (auto& r : recs) {
            const int pos = mode == DriftMode::Rise ? h - r.record.timestamp : r.record.timestamp - 1;
            r.record.timestamp = ts[static_cast<std::size_t>(pos)];
        }
        out.insert(out.end(), recs.begin(), recs.end());
    }
    if (out.empty()) throw DataError("no weekday group holds a complete drift window");
    std::stable_sort(out.begin(), out.end(), [](const DriftRecord& a, const DriftRecord& b) { return a.offset < b.offset; });
    return out;
}

SweepAxis parse_sweep_axis(const std::string& s) {
    if (s == "lambda") return SweepAxis::Lambda;
    if (s == "alpha") return SweepAxis::Alpha;
    if (s == "beta") return SweepAxis::Beta;
    throw std::invalid_argument("sweep axis must be lambda, alpha or beta");
}

std::string axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Lambda: return "lambda";
        case SweepAxis::Alpha: return "alpha";
        case SweepAxis::Beta: return "beta";
    }
    return "beta";
}

SweepTable parameter_sweep(const HistoryDataset& ds, const DistanceMatrix* distances, const EvalConfig& base,
                           SweepAxis axis, const std::vector<double>& values, int jobs) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    SweepTable table;
    table.axis = axis;
    for (double v : values) {
        EvalConfig cfg = base;
        switch (axis) {
            case SweepAxis::Lambda: cfg.lambda = v; break;
            case SweepAxis::Alpha: cfg.scheme.alpha = v; break;
            case SweepAxis::Beta: cfg.beta = v; break;
        }
        const auto recs = incremental_evaluate(ds, distances, cfg, jobs);
        SweepColumn col;
        col.value = v;
        double actual = 0.0;
        for (const auto& r : recs) {
            col.rd_pct += r.rd_pct;
            col.ad_pct += r.ad_pct;
            col.avg_km += r.predicted_km;
            col.avg_s += r.solve_s;
            actual += r.actual_km;
        }
        const double k = static_cast<double>(recs.size());
        col.rd_pct /= k;
        col.ad_pct /= k;
        col.avg_km /= k;
        col.avg_s /= k;
        table.actual_km = actual / k;
        table.columns.push_back(col);
    }
    return table;
}

}  // namespace routepref
