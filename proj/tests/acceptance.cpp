// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "routepref/eval.hpp"
#include "routepref/learn.hpp"
#include "routepref/solve.hpp"
#include "routepref/synthetic.hpp"
#include "support.hpp"

using namespace routepref;
namespace fs = std::filesystem;

namespace {

constexpr double kObjTol = 1e-9;
constexpr double kStochTol = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::vector<SchemeKind> kKinds{SchemeKind::Unif, SchemeKind::Time, SchemeKind::Time2,
                                     SchemeKind::Simi, SchemeKind::Simi2, SchemeKind::Exp};

EvalConfig quiet() {
    EvalConfig c;
    c.record_timing = false;
    return c;
}

// 1
Outcome oracle_first_order() {
    std::mt19937_64 rng(1001);
    const auto t0 = std::chrono::steady_clock::now();
    int equal = 0;
    for (int i = 0; i < 50; ++i) {
        const int n = 2 + static_cast<int>(rng() % 7);
        const int m = 1 + static_cast<int>(rng() % 2);
        const auto prob = testing::random_problem(rng, n, m);
        const double exact = solve_exact_first_order(prob).objective;
        const double brute = brute_force_oracle(prob, 1).objective;
        equal += std::abs(exact - brute) <= kObjTol;
    }
    const double s = seconds_since(t0);
    return {equal == 50 && s < 60.0, fmt("%d/50 equal within 1e-9, %.2f s (limit 60 s)", equal, s)};
}

// 2
Outcome oracle_second_order() {
    std::mt19937_64 rng(2002);
    const auto t0 = std::chrono::steady_clock::now();
    int equal = 0;
    for (int i = 0; i < 20; ++i) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const int m = 1 + static_cast<int>(rng() % 2);
        auto prob = testing::random_problem(rng, n, m);
        testing::attach_random_tensor(rng, prob);
        const double exact = solve_exact_second_order(prob).objective;
        const double brute = brute_force_oracle(prob, 2).objective;
        equal += std::abs(exact - brute) <= kObjTol;
    }
    const double s = seconds_since(t0);
    return {equal == 20 && s < 300.0, fmt("%d/20 equal within 1e-9, %.2f s (limit 300 s)", equal, s)};
}

// 3
Outcome softmax_equivalence() {
    std::mt19937_64 rng(3003);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    int equal = 0;
    double worst = 0.0;
    for (int i = 0; i < 30; ++i) {
        const int n = 3 + static_cast<int>(rng() % 5);
        const int m = 1 + static_cast<int>(rng() % 2);
        std::vector<std::pair<double, double>> xy(static_cast<std::size_t>(n + 1), {0.0, 0.0});
        for (int s = 1; s <= n; ++s) xy[static_cast<std::size_t>(s)] = {coord(rng), coord(rng)};
        DistanceMatrix d;
        d.index = StopIndex(testing::iota_stops(n));
        d.dist.resize(n + 1, n + 1);
        for (int a = 0; a <= n; ++a)
            for (int b = 0; b <= n; ++b)
                d.dist(a, b) = std::hypot(xy[static_cast<std::size_t>(a)].first - xy[static_cast<std::size_t>(b)].first,
                                          xy[static_cast<std::size_t>(a)].second - xy[static_cast<std::size_t>(b)].second);
        const auto stops = testing::iota_stops(n);
        DemandMap q;
        for (StopId s : stops) q[s] = 1;

        Eigen::MatrixXd km = d.dist;
        km.diagonal().setConstant(kDiagonalCost);
        const auto by_distance = CvrpProblem::from_costs(stops, m, n, q, km, true);
        const double best_km = brute_force_oracle(by_distance, 1).objective;

        const auto p = softmax_distance_matrix(d, solve_theta_star(d));
        const auto by_softmax = make_problem(stops, m, n, q, p, true);
        const double got_km = routing_km(solve_exact_first_order(by_softmax).routing, d);
        worst = std::max(worst, std::abs(got_km - best_km));
        equal += std::abs(got_km - best_km) <= kObjTol;
    }
    return {equal == 30, fmt("%d/30 softmax-optimal routings at the minimum distance, worst gap %.3g km", equal, worst)};
}

// 4
Outcome stochasticity() {
    std::mt19937_64 rng(4004);
    double worst = 0.0;
    long zeros = 0, cells = 0;
    int runs = 0;
    for (int k = 0; k < 10; ++k) {
        std::vector<std::vector<Tour>> routings;
        const int universe = 4 + static_cast<int>(rng() % 4);
        const int count = 2 + static_cast<int>(rng() % 6);
        for (int t = 0; t < count; ++t) {
            std::vector<StopId> s;
            for (int v = 1; v <= universe; ++v)
                if (rng() % 3 != 0) s.push_back(v);
            if (s.empty()) s.push_back(1);
            std::shuffle(s.begin(), s.end(), rng);
            std::vector<Tour> tours;
            for (StopId v : s) {
                if (tours.empty() || rng() % 3 == 0) tours.emplace_back();
                tours.back().push_back(v);
            }
            routings.push_back(tours);
        }
        const auto ds = testing::make_dataset(routings);
        const auto current = ds.instances.back().stops;
        for (auto kind : kKinds) {
            for (double lambda : {0.0, 0.5, 1.0}) {
                const WeighingScheme w{kind};
                const auto p = estimate_first_order(ds, w, lambda, current);
                for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
                    worst = std::max(worst, std::abs(p.probs.row(i).sum() - 1.0));
                    for (Eigen::Index j = 0; j < p.probs.cols(); ++j)
                        if (lambda > 0.0 && i != j) {
                            ++cells;
                            zeros += !(p.probs(i, j) > 0.0);
                        }
                }
                const auto s = estimate_second_order(ds, w, lambda, current);
                const std::size_t mu = s.size();
                worst = std::max(worst, std::abs(s.depot_row.sum() - 1.0));
                for (std::size_t i = 0; i < mu; ++i)
                    for (std::size_t j = 1; j < mu; ++j) {
                        if (i == j) continue;
                        double sum = 0.0;
                        for (std::size_t l = 0; l < mu; ++l) {
                            sum += s.cell(i, j, l);
                            if (lambda > 0.0 && l != j) {
                                ++cells;
                                zeros += !(s.cell(i, j, l) > 0.0);
                            }
                        }
                        worst = std::max(worst, std::abs(sum - 1.0));
                    }
                runs += 2;
            }
        }
    }
    return {worst <= kStochTol && zeros == 0,
            fmt("%d estimates, max |row sum - 1| = %.3g (limit 1e-12), %ld of %ld smoothed support cells zero", runs, worst,
                zeros, cells)};
}

// 5
Outcome memorization() {
    int bad = 0, steps = 0;
    for (auto kind : kKinds) {
        const std::vector<std::vector<Tour>> copies(5, {{4, 1, 6}, {2, 5}, {3}});
        const auto ds = testing::make_dataset(copies);
        auto cfg = quiet();
        cfg.scheme.kind = kind;
        cfg.lambda = 0.0;
        cfg.split = 0.2;
        for (const auto& r : incremental_evaluate(ds, nullptr, cfg)) {
            ++steps;
            bad += r.rd_pct != 0.0 || r.ad_pct != 0.0;
        }
    }
    return {bad == 0 && steps == 24, fmt("%d steps over 6 schemes, %d with RD or AD above 0", steps, bad)};
}

// 6
Outcome mixing_endpoints() {
    int same = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        SyntheticConfig sc;
        sc.n_regular = 12;
        sc.n_adhoc = 10;
        sc.p_adhoc = 0.2;
        sc.fleet_before = 3;
        sc.fleet_after = 3;
        sc.days_per_week = 1;
        sc.weeks = 16;
        sc.seed = seed;
        const auto data = generate_synthetic(sc);
        for (auto kind : {SchemeKind::Unif, SchemeKind::Exp}) {
            auto pure = quiet();
            pure.scheme.kind = kind;
            auto one = pure;
            one.beta = 1.0;
            one.theta = 0.25;
            auto dist = quiet();
            dist.dist_only = true;
            auto zero = pure;
            zero.beta = 0.0;
            for (auto solver : {SolverChoice::Exact, SolverChoice::Heuristic}) {
                pure.solver = one.solver = dist.solver = zero.solver = solver;
                const auto a = incremental_evaluate(data.history, &data.distances, pure);
                const auto b = incremental_evaluate(data.history, &data.distances, one);
                const auto c = incremental_evaluate(data.history, &data.distances, dist);
                const auto d = incremental_evaluate(data.history, &data.distances, zero);
                for (std::size_t i = 0; i < a.size(); ++i) {
                    total += 2;
                    same += a[i].rd_pct == b[i].rd_pct && a[i].ad_pct == b[i].ad_pct &&
                            a[i].predicted_km == b[i].predicted_km;
                    same += c[i].rd_pct == d[i].rd_pct && c[i].ad_pct == d[i].ad_pct &&
                            c[i].predicted_km == d[i].predicted_km;
                }
                const auto& target = data.history.instances.back();
                const auto train = data.history.before(target.timestamp);
                total += 2;
                same += predict_routing(train, target, &data.distances, pure).routing ==
                        predict_routing(train, target, &data.distances, one).routing;
                same += predict_routing(train, target, &data.distances, dist).routing ==
                        predict_routing(train, target, &data.distances, zero).routing;
            }
        }
    }
    return {same == total, fmt("%d/%d beta = 1 and beta = 0 predictions identical to the pure runs", same, total)};
}

// 7
// Weights are alpha (1 - alpha)^(T - t) with T = newest + 1, so the share of the last k instances in
// a history of N is (1 - 0.3^k) / (1 - 0.3^N): exactly 1 - 0.3^3 as N grows, and never below it.
Outcome exp_adaptation() {
    constexpr int kBefore = 20, kAfter = 3;
    std::vector<std::vector<Tour>> routings;
    for (int t = 0; t < kBefore; ++t) routings.push_back({{1, 2, 3}});
    for (int t = 0; t < kAfter; ++t) routings.push_back({{4, 5}});
    const auto ds = testing::make_dataset(routings);
    const auto w = compute_weights(ds, {4, 5}, WeighingScheme{SchemeKind::Exp, 0.7});
    double post = 0.0, total = 0.0;
    for (auto [t, v] : w) {
        total += v;
        if (t > kBefore) post += v;
    }
    const double share = post / total;
    const double limit = 1.0 - std::pow(0.3, kAfter);
    const double expected = limit / (1.0 - std::pow(0.3, kBefore + kAfter));
    const bool ok = std::abs(share - expected) <= 1e-12 && share >= limit - 1e-12;
    return {ok, fmt("post-drift share %.15f, analytic %.15f, floor 1 - 0.3^3 = %.15f (tolerance 1e-12)", share, expected,
                    limit)};
}

struct DriftMeans {
    double rd = 0.0, ad = 0.0;
};

DriftMeans post_drift_means(const SyntheticData& data, const EvalConfig& cfg) {
    const auto recs = drift_scenario_by_weekday(data.history, &data.distances, cfg, DriftMode::Drop,
                                                *data.truth.drift_timestamp, 4);
    DriftMeans m;
    int n = 0;
    for (const auto& r : recs)
        if (r.offset >= 1 && r.offset <= 9) {
            m.rd += r.record.rd_pct;
            m.ad += r.record.ad_pct;
            ++n;
        }
    m.rd /= n;
    m.ad /= n;
    return m;
}

// 8
Outcome drift_ordering() {
    int ok = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticConfig sc;
        sc.weeks = 40;
        sc.drift_week = 30;
        sc.seed = seed;
        const auto data = generate_synthetic(sc);
        auto cfg = quiet();
        cfg.scheme = WeighingScheme{SchemeKind::Exp, 0.7};
        const auto e = post_drift_means(data, cfg);
        cfg.scheme = WeighingScheme{SchemeKind::Time2};
        const auto t2 = post_drift_means(data, cfg);
        cfg.scheme = WeighingScheme{SchemeKind::Unif};
        const auto u = post_drift_means(data, cfg);
        auto dcfg = quiet();
        dcfg.dist_only = true;
        const auto d = post_drift_means(data, dcfg);
        const bool pass = e.rd <= t2.rd && t2.rd <= u.rd && e.ad <= t2.ad && t2.ad <= u.ad &&
                          std::max({e.ad, t2.ad, u.ad}) < d.ad;
        ok += pass;
        per_seed += fmt(" [seed %d %s: EXP %.1f/%.1f TIME2 %.1f/%.1f UNIF %.1f/%.1f DIST AD %.1f]", static_cast<int>(seed),
                        pass ? "ok" : "no", e.rd, e.ad, t2.rd, t2.ad, u.rd, u.ad, d.ad);
    }
    return {ok >= 4, fmt("ordering held on %d/5 seeds (need 4), RD/AD over offsets 1..9:", ok) + per_seed};
}

double mean_ad(const std::vector<EvalRecord>& recs) {
    double s = 0.0;
    for (const auto& r : recs) s += r.ad_pct;
    return s / static_cast<double>(recs.size());
}

// 9
Outcome capacity_free() {
    int ok = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticConfig sc;
        sc.weeks = 40;
        sc.planner_noise = 0.1;
        sc.seed = 100 + seed;
        const auto data = generate_synthetic(sc);
        HistoryDataset stripped = data.history;
        for (auto& inst : stripped.instances) apply_capacity_free(inst);
        const auto cfg = quiet();
        auto dcfg = quiet();
        dcfg.dist_only = true;
        const double with = mean_ad(incremental_evaluate_by_weekday(data.history, &data.distances, cfg, 4));
        const double without = mean_ad(incremental_evaluate_by_weekday(stripped, &data.distances, cfg, 4));
        const double dist = mean_ad(incremental_evaluate_by_weekday(data.history, &data.distances, dcfg, 4));
        const bool pass = std::abs(with - without) <= 10.0 && with < dist && without < dist;
        ok += pass;
        per_seed += fmt(" [seed %d %s: %.1f vs %.1f, DIST %.1f]", static_cast<int>(seed), pass ? "ok" : "no", with,
                        without, dist);
    }
    return {ok >= 4, fmt("held on %d/5 seeds (need 4), UNIF AD with vs without demands:", ok) + per_seed};
}

// 10
Outcome performance() {
    std::mt19937_64 rng(1010);
    double exact_worst = 0.0, heur_worst = 0.0;
    bool all_optimal = true;
    auto time_exact = [&](const CvrpProblem& p) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = solve_exact_first_order(p);
        exact_worst = std::max(exact_worst, seconds_since(t0));
        all_optimal &= r.optimal;
    };
    auto time_heur = [&](const CvrpProblem& p) {
        const auto t0 = std::chrono::steady_clock::now();
        solve_heuristic_first_order(p, 7);
        heur_worst = std::max(heur_worst, seconds_since(t0));
    };
    for (int m : {2, 3, 4}) {
        time_exact(testing::random_problem(rng, 15, m));
        time_heur(testing::random_problem(rng, 25, m + 2));
    }
    // Learned preference costs on realistic instances.
    SyntheticConfig sc;
    sc.weeks = 40;
    sc.drift_week = 30;
    const auto data = generate_synthetic(sc);
    for (int t : {120, 160, 200}) {
        const auto& target = data.history.instances[static_cast<std::size_t>(t - 1)];
        const auto train = data.history.before(t);
        std::vector<StopId> chain;
        for (const auto& tour : target.routing.tours)
            for (StopId s : tour) chain.push_back(s);
        const auto p = extend_uniform(estimate_first_order(train, WeighingScheme{SchemeKind::Exp}, 1.0), target.stops);
        for (std::size_t n : {std::size_t{15}, std::size_t{25}}) {
            std::vector<StopId> keep(chain.begin(), chain.begin() + static_cast<long>(std::min(n, chain.size())));
            std::sort(keep.begin(), keep.end());
            DemandMap q;
            int total = 0;
            for (StopId s : keep) total += (q[s] = target.demands.at(s));
            const int m = n == 15 ? 3 : 5;
            const int cap = static_cast<int>(std::ceil(1.1 * total / m)) + 1;
            const auto prob = make_problem(keep, m, cap, q, p);
            if (n == 15) time_exact(prob);
            else time_heur(prob);
        }
    }
    return {exact_worst < 10.0 && heur_worst < 5.0 && all_optimal,
            fmt("exact n=15 worst %.3f s (limit 10 s, all proven optimal: %s), heuristic n=25 worst %.3f s (limit 5 s)",
                exact_worst, all_optimal ? "yes" : "no", heur_worst)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 11
Outcome determinism(const std::string& tool) {
    if (tool.empty() || !fs::exists(tool)) return {false, "command-line tool not found at '" + tool + "'"};
    const fs::path dir = fs::temp_directory_path() / ("routepref_accept_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    const std::string d = dir.string();
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"weeks": 12, "drift_week": 8, "seed": 11, "n_regular": 20, "n_adhoc": 20})";
    }
    const std::string common = " --history " + d + "/h.jsonl --distances " + d + "/d.csv --no-timing";
    struct Cmd {
        std::string name, args, out_file;
    };
    const std::vector<Cmd> cmds{
        {"generate", "generate --config " + d + "/cfg.json --out " + d + "/h@.jsonl --distances-out " + d +
                         "/d@.csv --truth-out " + d + "/t@.json",
         ""},
        {"learn", "learn --history " + d + "/h.jsonl --scheme exp --out " + d + "/p@.csv", "p@.csv"},
        {"learn2", "learn --history " + d + "/h.jsonl --order 2 --lambda 0.5 --at 5 --out " + d + "/s@.json", "s@.json"},
        {"solve", "solve" + common + " --scheme time2 --beta 0.6 --theta auto --out " + d + "/r@.json", "r@.json"},
        {"evaluate", "evaluate" + common + " --scheme exp --jobs 4 --out " + d + "/e@.csv", "e@.csv"},
        {"evaluate-weekday", "evaluate" + common + " --dist-only --heuristic --group-by weekday --jobs 3", ""},
        {"drift", "drift" + common + " --drift-at 41 --mode rise --jobs 4 --out " + d + "/x@.csv", "x@.csv"},
        {"sweep", "sweep" + common + " --axis beta --values 0,0.2,1 --jobs 2 --out " + d + "/w@.csv", "w@.csv"},
    };
    auto subst = [](std::string s, int k) {
        for (std::size_t p; (p = s.find('@')) != std::string::npos;) s.replace(p, 1, std::to_string(k));
        return s;
    };
    int identical = 0;
    std::string failed;
    bool prepared = false;
    for (const auto& c : cmds) {
        std::vector<std::string> outputs;
        bool ran = true;
        for (int k = 0; k < 3; ++k) {
            const std::string stdout_file = d + "/" + c.name + std::to_string(k) + ".out";
            const std::string cmd = tool + " " + subst(c.args, k) + " > " + stdout_file + " 2>/dev/null";
            ran &= std::system(cmd.c_str()) == 0;
            std::string blob = slurp(stdout_file);
            if (c.name == "generate") {
                blob += slurp(d + "/" + subst("h@.jsonl", k)) + slurp(d + "/" + subst("d@.csv", k)) +
                        slurp(d + "/" + subst("t@.json", k));
            } else if (!c.out_file.empty()) {
                blob += slurp(d + "/" + subst(c.out_file, k));
            }
            outputs.push_back(std::move(blob));
        }
        if (c.name == "generate" && !prepared) {
            fs::copy_file(dir / "h0.jsonl", dir / "h.jsonl");
            fs::copy_file(dir / "d0.csv", dir / "d.csv");
            prepared = true;
        }
        const bool same = ran && !outputs[0].empty() && outputs[0] == outputs[1] && outputs[1] == outputs[2];
        identical += same;
        if (!same) failed += " " + c.name + (ran ? "" : "(exit != 0)");
    }
    fs::remove_all(dir);
    const int total = static_cast<int>(cmds.size());
    return {identical == total, fmt("%d/%d invocations byte-identical over 3 runs", identical, total) +
                                    (failed.empty() ? std::string() : "; differing:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string tool = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"first-order exact solver equals brute force", oracle_first_order},
        {"second-order exact solver equals brute force", oracle_second_order},
        {"softmax at theta* reproduces the distance optimum", softmax_equivalence},
        {"learned matrices are stochastic, smoothing is positive", stochasticity},
        {"memorization gives zero RD and AD", memorization},
        {"mixing endpoints equal the pure runs", mixing_endpoints},
        {"EXP moves weight to post-drift instances", exp_adaptation},
        {"drift adaptation ordering EXP <= TIME2 <= UNIF < DIST", drift_ordering},
        {"capacity-free learning stays close to capacitated", capacity_free},
        {"performance envelope", performance},
        {"CLI outputs are deterministic", [&] { return determinism(tool); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
