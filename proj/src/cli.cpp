#include "routepref/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "routepref/error.hpp"
#include "routepref/eval.hpp"
#include "routepref/io.hpp"
#include "routepref/synthetic.hpp"

namespace routepref::cli {

namespace {

constexpr std::size_t kSecondOrderWarnStops = 10;

/// Flags shared by every subcommand that learns or solves.
struct ModelFlags {
    std::string scheme = "unif";
    int order = 1;
    double lambda = 1.0;
    double beta = 1.0;
    double alpha = 0.7;
    std::string theta = "1";
    double split = 0.75;
    std::uint64_t seed = 0;
    bool exact = false;
    bool heuristic = false;
    bool fleet_equality = false;
    bool capacity_free = false;
    bool dist_only = false;
    bool no_timing = false;
    int jobs = 1;
    std::string group_by;
    std::uint64_t iterations = HeuristicOptions{}.iterations;
    double time_limit = SolveLimits{}.max_seconds;

    EvalConfig config() const {
        EvalConfig c;
        c.scheme = WeighingScheme::parse(scheme);
        c.scheme.alpha = alpha;
        c.order = order;
        c.lambda = lambda;
        c.beta = beta;
        if (theta == "auto") {
            c.theta_auto = true;
        } else {
            try {
                c.theta = parse_double(theta, "--theta");
            } catch (const DataError& e) {
                throw std::invalid_argument(e.what());
            }
        }
        c.split = split;
        c.seed = seed;
        c.solver = exact ? SolverChoice::Exact : heuristic ? SolverChoice::Heuristic : SolverChoice::Auto;
        c.fleet_equality = fleet_equality;
        c.capacity_free = capacity_free;
        c.dist_only = dist_only;
        c.record_timing = !no_timing;
        c.heuristic.iterations = iterations;
        c.heuristic.max_seconds = time_limit;
        c.limits.max_seconds = time_limit;
        if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
        c.validate();
        return c;
    }
};

void add_learning_flags(CLI::App* app, ModelFlags& f) {
    app->add_option("--scheme", f.scheme, "Weighing scheme: unif, time, time2, simi, simi2, exp")
        ->capture_default_str();
    app->add_option("--order", f.order, "Markov order, 1 or 2")->capture_default_str();
    app->add_option("--lambda", f.lambda, "Laplace smoothing")->capture_default_str();
    app->add_option("--alpha", f.alpha, "EXP decay in (0, 1)")->capture_default_str();
}

void add_model_flags(CLI::App* app, ModelFlags& f) {
    add_learning_flags(app, f);
    app->add_option("--beta", f.beta, "Weight of learned preferences against distance probabilities")
        ->capture_default_str();
    app->add_option("--theta", f.theta, "Softmax scale for distance probabilities, or 'auto'")->capture_default_str();
    app->add_option("--seed", f.seed, "Heuristic seed")->capture_default_str();
    auto* ex = app->add_flag("--exact", f.exact, "Always use branch and bound");
    auto* he = app->add_flag("--heuristic", f.heuristic, "Always use the heuristic");
    ex->excludes(he);
    app->add_flag("--fleet-equality", f.fleet_equality, "Require exactly m tours");
    app->add_flag("--capacity-free", f.capacity_free, "Ignore demands: unit loads with Q = n");
    app->add_flag("--dist-only", f.dist_only, "DIST baseline: distance probabilities only");
    app->add_flag("--no-timing", f.no_timing, "Write 0 for solve times so outputs are reproducible");
    app->add_option("--iterations", f.iterations, "Heuristic improvement iterations")->capture_default_str();
    app->add_option("--time-limit", f.time_limit, "Per-solve time budget in seconds")->capture_default_str();
}

void add_eval_flags(CLI::App* app, ModelFlags& f) {
    add_model_flags(app, f);
    app->add_option("--split", f.split, "Share of the history used for initial training")->capture_default_str();
    app->add_option("--jobs", f.jobs, "Evaluation threads")->capture_default_str();
}

void add_grouping_flag(CLI::App* app, ModelFlags& f) {
    app->add_option("--group-by", f.group_by, "Evaluate each weekday separately")->check(CLI::IsMember({"weekday"}));
}

/// Writes to `path`, or to `out` when the path is empty.
void emit(const std::string& path, std::ostream& out, const std::function<void(std::ostream&)>& write) {
    if (path.empty()) {
        write(out);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open '" + path + "' for writing");
    write(file);
    file.flush();
    if (!file) throw DataError("failed writing '" + path + "'");
}

HistoryDataset read_history(const std::string& path, std::ostream& err) {
    Warnings w;
    auto ds = load_history(path, &w);
    for (const auto& m : w) err << "warning: " << m << '\n';
    return ds;
}

std::optional<DistanceMatrix> read_distances(const std::string& path, StopTable& table) {
    if (path.empty()) return std::nullopt;
    return load_distance_matrix(path, table);
}

/// Loads the first instance of a history-format file and re-expresses it in `table`'s ids.
HistoryInstance read_instance(const std::string& path, StopTable& table, int timestamp, std::ostream& err) {
    const auto single = read_history(path, err);
    if (single.size() != 1) throw DataError(path + ": expected exactly one instance");
    const auto& src = single.instances.front();
    auto id = [&](StopId s) { return table.intern(single.table.name(s)); };
    HistoryInstance inst;
    inst.timestamp = timestamp;
    inst.weekday = src.weekday;
    inst.fleet = src.fleet;
    inst.capacity = src.capacity;
    inst.capacity_free = src.capacity_free;
    for (StopId s : src.stops) inst.stops.push_back(id(s));
    std::sort(inst.stops.begin(), inst.stops.end());
    for (auto [s, q] : src.demands) inst.demands[id(s)] = q;
    for (const auto& t : src.routing.tours) {
        Tour mapped;
        for (StopId s : t) mapped.push_back(id(s));
        inst.routing.tours.push_back(std::move(mapped));
    }
    return inst;
}

void warn_second_order(const EvalConfig& cfg, std::size_t stops, std::ostream& err) {
    if (cfg.order == 2 && stops > kSecondOrderWarnStops)
        err << "warning: second-order solves are exact and may take very long above " << kSecondOrderWarnStops
            << " stops (instance has " << stops << ")\n";
}

void warn_second_order(const EvalConfig& cfg, const HistoryDataset& ds, std::ostream& err) {
    std::size_t most = 0;
    for (const auto& inst : ds.instances) most = std::max(most, inst.stops.size());
    warn_second_order(cfg, most, err);
}

const DistanceMatrix* ptr(const std::optional<DistanceMatrix>& d) { return d ? &*d : nullptr; }

std::string fmt(double v) { return std::isnan(v) ? "nan" : format_double(v); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learn vehicle routing preferences from historical routings and predict new ones"};
    app.name("routepref");
    app.require_subcommand(1);

    ModelFlags flags;
    std::string history, distances, out_path;

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic planner history");
    std::string config_path, distances_out, truth_out;
    std::optional<std::uint64_t> gen_seed;
    bool no_demands = false;
    gen->add_option("--config", config_path, "JSON synthetic configuration");
    gen->add_option("--seed", gen_seed, "Override the configuration seed");
    gen->add_flag("--no-demands", no_demands, "Write capacity-free instances");
    gen->add_option("--out", out_path, "History file (JSON lines)")->required();
    gen->add_option("--distances-out", distances_out, "Distance matrix CSV");
    gen->add_option("--truth-out", truth_out, "Ground truth JSON");

    // learn
    auto* learn = app.add_subcommand("learn", "Estimate a transition matrix from a history");
    std::optional<int> at;
    learn->add_option("--history", history, "History file")->required();
    learn->add_option("--at", at, "Learn from the instances before this timestamp only");
    learn->add_option("--out", out_path, "Matrix file (CSV, or JSON for --order 2)")->required();
    add_learning_flags(learn, flags);

    // solve
    auto* solve = app.add_subcommand("solve", "Predict the routing of one instance");
    std::string instance_path;
    solve->add_option("--history", history, "History file")->required();
    auto* at_opt = solve->add_option("--at", at, "Predict this history instance from the ones before it");
    solve->add_option("--instance", instance_path, "Predict this one-instance file from the whole history")
        ->excludes(at_opt);
    solve->add_option("--distances", distances, "Distance matrix CSV");
    solve->add_option("--out", out_path, "Routing file (JSON)");
    add_model_flags(solve, flags);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Incremental train-and-test over a history");
    evaluate->add_option("--history", history, "History file")->required();
    evaluate->add_option("--distances", distances, "Distance matrix CSV");
    evaluate->add_option("--out", out_path, "Records CSV (stdout when omitted)");
    add_eval_flags(evaluate, flags);
    add_grouping_flag(evaluate, flags);

    // drift
    auto* drift = app.add_subcommand("drift", "Evaluate the instances around a concept drift");
    int drift_at = 0;
    std::string mode = "drop";
    drift->add_option("--history", history, "History file")->required();
    drift->add_option("--distances", distances, "Distance matrix CSV");
    drift->add_option("--drift-at", drift_at, "First timestamp of the new regime")->required();
    drift->add_option("--mode", mode, "drop, or rise to cross the drift backwards")
        ->check(CLI::IsMember({"drop", "rise"}))
        ->capture_default_str();
    drift->add_option("--out", out_path, "Records CSV (stdout when omitted)");
    add_eval_flags(drift, flags);
    add_grouping_flag(drift, flags);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Mean errors per value of lambda, alpha or beta");
    std::string axis;
    std::vector<double> values;
    sweep->add_option("--history", history, "History file")->required();
    sweep->add_option("--distances", distances, "Distance matrix CSV");
    sweep->add_option("--axis", axis, "lambda, alpha or beta")->required()->check(CLI::IsMember({"lambda", "alpha", "beta"}));
    sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    sweep->add_option("--out", out_path, "Table CSV (stdout when omitted)");
    add_eval_flags(sweep, flags);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (gen->parsed()) {
            SyntheticConfig cfg;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw DataError("cannot open '" + config_path + "' for reading");
                std::stringstream text;
                text << in.rdbuf();
                cfg = SyntheticConfig::from_json(text.str());
            }
            if (gen_seed) cfg.seed = *gen_seed;
            if (no_demands) cfg.with_demands = false;
            const auto data = generate_synthetic(cfg);
            save_history(data.history, out_path);
            if (!distances_out.empty()) save_distance_matrix(data.distances, data.history.table, distances_out);
            if (!truth_out.empty())
                emit(truth_out, out, [&](std::ostream& o) { o << ground_truth_json(data.truth, data.history.table) << '\n'; });
            const auto& st = data.truth.stats;
            out << "instances " << data.history.size() << '\n';
            out << "drift_timestamp " << (data.truth.drift_timestamp ? std::to_string(*data.truth.drift_timestamp) : "none")
                << '\n';
            out << "mean_stops_before " << fmt(st.mean_stops_before) << '\n';
            out << "mean_tours_before " << fmt(st.mean_tours_before) << '\n';
            out << "mean_stops_after " << fmt(st.mean_stops_after) << '\n';
            out << "mean_tours_after " << fmt(st.mean_tours_after) << '\n';
            return kOk;
        }

        const EvalConfig cfg = flags.config();
        HistoryDataset ds = read_history(history, err);

        if (learn->parsed()) {
            const HistoryDataset train = at ? ds.before(*at) : ds;
            if (train.empty()) throw DataError("no instances precede --at " + std::to_string(*at));
            if (cfg.order == 2) {
                save_second_order(estimate_second_order(train, cfg.scheme, cfg.lambda), ds.table, out_path);
            } else {
                save_transition_matrix(estimate_first_order(train, cfg.scheme, cfg.lambda), ds.table, out_path);
            }
            out << "learned from " << train.size() << " instances over " << train.all_stops().size() << " stops\n";
            return kOk;
        }

        if (solve->parsed()) {
            HistoryInstance target;
            HistoryDataset train;
            if (!instance_path.empty()) {
                target = read_instance(instance_path, ds.table, ds.max_timestamp() + 1, err);
                train = ds;
            } else {
                const int t = at.value_or(ds.max_timestamp());
                if (t < 1 || t > ds.max_timestamp())
                    throw DataError("--at " + std::to_string(t) + " is not a timestamp of the history");
                target = ds.instances[static_cast<std::size_t>(t - 1)];
                train = ds.before(t);
            }
            const auto dist = read_distances(distances, ds.table);
            if (cfg.uses_distances() && !dist) throw std::invalid_argument("--beta < 1 and --dist-only need --distances");
            warn_second_order(cfg, target.stops.size(), err);
            const auto report = predict_routing(train, target, ptr(dist), cfg);
            if (!out_path.empty()) save_routing(report.routing, ds.table, out_path);
            out << "objective " << fmt(report.objective) << '\n';
            out << "optimal " << (report.optimal ? "true" : "false") << '\n';
            out << "tours " << report.routing.tours.size() << '\n';
            out << "rd_pct " << fmt(route_difference(report.routing, target.routing)) << '\n';
            out << "ad_pct " << fmt(arc_difference(report.routing, target.routing)) << '\n';
            if (dist) {
                out << "predicted_km " << fmt(routing_km(report.routing, *dist)) << '\n';
                out << "actual_km " << fmt(routing_km(target.routing, *dist)) << '\n';
            }
            out << "solve_s " << fmt(cfg.record_timing ? report.wall_time : 0.0) << '\n';
            if (out_path.empty()) {
                for (const auto& tour : report.routing.tours) {
                    out << "tour";
                    for (StopId s : tour) out << ' ' << ds.table.name(s);
                    out << '\n';
                }
            }
            return kOk;
        }

        const auto dist = read_distances(distances, ds.table);
        if (cfg.uses_distances() && !dist) throw std::invalid_argument("--beta < 1 and --dist-only need --distances");
        warn_second_order(cfg, ds, err);
        const bool by_weekday = flags.group_by == "weekday";

        if (evaluate->parsed()) {
            const auto recs = by_weekday ? incremental_evaluate_by_weekday(ds, ptr(dist), cfg, flags.jobs)
                                         : incremental_evaluate(ds, ptr(dist), cfg, flags.jobs);
            emit(out_path, out, [&](std::ostream& o) { write_records(recs, o); });
            return kOk;
        }
        if (drift->parsed()) {
            const DriftMode m = parse_drift_mode(mode);
            const auto recs = by_weekday ? drift_scenario_by_weekday(ds, ptr(dist), cfg, m, drift_at, flags.jobs)
                                         : drift_scenario(ds, ptr(dist), cfg, m, drift_at, flags.jobs);
            emit(out_path, out, [&](std::ostream& o) { write_drift_records(recs, o); });
            return kOk;
        }
        if (sweep->parsed()) {
            const auto table = parameter_sweep(ds, ptr(dist), cfg, parse_sweep_axis(axis), values, flags.jobs);
            emit(out_path, out, [&](std::ostream& o) { write_sweep_table(table, o); });
            return kOk;
        }
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const BudgetExhaustedError& e) {
        err << "budget exhausted: " << e.what() << '\n';
        return kInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace routepref::cli
