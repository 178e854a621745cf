#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "routepref/learn.hpp"
#include "routepref/routing.hpp"
#include "routepref/solve.hpp"

namespace routepref {

enum class SolverChoice { Auto, Exact, Heuristic };

/// Everything that decides how a routing is predicted from history.
struct EvalConfig {
    WeighingScheme scheme;
    int order = 1;
    double lambda = 1.0;
    double beta = 1.0;          // 1 = learned preferences only, 0 = distance probabilities only
    double theta = 1.0;         // softmax scale for distance probabilities
    bool theta_auto = false;    // use theta* of the instance instead of `theta`
    bool dist_only = false;     // DIST baseline: skip learning entirely
    SolverChoice solver = SolverChoice::Auto;
    std::size_t exact_max_stops = 12;  // Auto picks the exact solver up to this many stops
    bool fleet_equality = false;
    bool capacity_free = false;
    std::uint64_t seed = 0;
    double split = 0.75;
    bool record_timing = true;  // false writes solve_s = 0 so outputs are byte-stable
    SolveLimits limits;
    HeuristicOptions heuristic;

    /// Throws std::invalid_argument on out-of-domain parameters.
    void validate() const;
    /// Scheme column of the records: the scheme name, or "dist" for the baseline.
    std::string label() const;
    bool uses_distances() const { return dist_only || beta < 1.0; }
};

/// One evaluated instance. Kilometres are NaN when no distance matrix was supplied.
struct EvalRecord {
    int timestamp = 0;
    std::string scheme;
    int order = 1;
    double lambda = 0.0;
    double beta = 1.0;
    double alpha = 0.7;
    double rd_pct = 0.0;
    double ad_pct = 0.0;
    double predicted_km = 0.0;
    double actual_km = 0.0;
    double solve_s = 0.0;
    int weekday = 0;  // carried for grouping, not serialised

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Percentage of stops placed in a different route than in `actual`, after greedy route matching.
/// Throws std::invalid_argument when the stop sets differ.
double route_difference(const Routing& predicted, const Routing& actual);

/// Percentage of directed daisy-chain arcs of `actual` missing from `predicted`.
double arc_difference(const Routing& predicted, const Routing& actual);

/// Total kilometres driven by `r`, depot legs included.
double routing_km(const Routing& r, const DistanceMatrix& d);

/// Learns from `train` and solves `target`. `distances` may be null unless the config needs it.
SolveReport predict_routing(const HistoryDataset& train, const HistoryInstance& target,
                            const DistanceMatrix* distances, const EvalConfig& cfg);

/// Called once per evaluation step with the training set and the learned first-order matrix
/// (after unseen stops were added). Not called for second-order or distance-only runs.
using StepObserver = std::function<void(int sigma, const HistoryDataset& train, const TransitionMatrix& learned)>;

/// eta = floor(split * |H|), clamped so that at least one instance trains and one is tested.
int initial_training_size(std::size_t history_size, double split);

/// Train on t < sigma, predict instance sigma, for sigma = eta + 1 .. |H|.
/// Steps run on up to `jobs` threads; records come back in timestamp order.
std::vector<EvalRecord> incremental_evaluate(const HistoryDataset& ds, const DistanceMatrix* distances,
                                             const EvalConfig& cfg, int jobs = 1, const StepObserver& observer = {});

/// Runs incremental_evaluate separately on each weekday group. Records keep their global timestamps.
std::vector<EvalRecord> incremental_evaluate_by_weekday(const HistoryDataset& ds, const DistanceMatrix* distances,
                                                        const EvalConfig& cfg, int jobs = 1);

enum class DriftMode { Drop, Rise };

DriftMode parse_drift_mode(const std::string& s);

struct DriftRecord {
    int offset = 0;  // -3 .. 9, 0 = first instance after the drift
    EvalRecord record;
};

/// Evaluates the 3 instances before and the 10 after the drift, training on everything older.
/// `drift_timestamp` is the first post-drift instance in the original ranking. Rise mode
/// reverses the ranking first, so the drift is crossed in the other direction.
/// Throws DataError when the window does not fit in the history.
std::vector<DriftRecord> drift_scenario(const HistoryDataset& ds, const DistanceMatrix* distances,
                                        const EvalConfig& cfg, DriftMode mode, int drift_timestamp, int jobs = 1);

/// drift_scenario on each weekday group; the group drift is its first instance at or after
/// `drift_timestamp` (original ranking). Groups whose window does not fit are skipped; throws
/// DataError when none fits. Records keep their global timestamps.
std::vector<DriftRecord> drift_scenario_by_weekday(const HistoryDataset& ds, const DistanceMatrix* distances,
                                                   const EvalConfig& cfg, DriftMode mode, int drift_timestamp,
                                                   int jobs = 1);

enum class SweepAxis { Lambda, Alpha, Beta };

SweepAxis parse_sweep_axis(const std::string& s);
std::string axis_name(SweepAxis axis);

struct SweepColumn {
    double value = 0.0;
    double rd_pct = 0.0;
    double ad_pct = 0.0;
    double avg_km = 0.0;
    double avg_s = 0.0;
};

/// Mean RD / AD / km / time per value, plus the mean km of the actual routings.
struct SweepTable {
    SweepAxis axis = SweepAxis::Beta;
    std::vector<SweepColumn> columns;
    double actual_km = 0.0;
};

SweepTable parameter_sweep(const HistoryDataset& ds, const DistanceMatrix* distances, const EvalConfig& base,
                           SweepAxis axis, const std::vector<double>& values, int jobs = 1);

}  // namespace routepref
