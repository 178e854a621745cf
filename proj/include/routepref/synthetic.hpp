#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "routepref/learn.hpp"
#include "routepref/routing.hpp"

namespace routepref {

/// Shape of a synthetic planner history. Defaults mirror a mid-sized depot: about 35 stops and
/// 9 vehicles a day before the drift, about 25 stops and 6 vehicles after it.
struct SyntheticConfig {
    int n_regular = 30;
    int n_adhoc = 43;
    double p_regular = 0.98;
    double p_adhoc = 0.14;
    int weeks = 40;
    int days_per_week = 5;           // weekday tags 1..days_per_week
    int fleet_before = 9;
    int fleet_after = 6;
    std::optional<int> drift_week;   // 0-based week at which the regime switches
    double drift_keep_regular = 0.65; // share of regular stops still served after the drift
    double drift_reorder = 0.35;      // share of stops moved to a new place in the preferred order
    double planner_noise = 0.05;      // chance, per step, of visiting the two next preferred stops in swapped order
    int weekday_swaps = 2;            // adjacent swaps that make each weekday's preference distinct
    double area_km = 20.0;            // stops lie in a square of this side around the depot
    int demand_min = 1;
    int demand_max = 3;
    double capacity_slack = 1.1;      // Q = ceil(slack * total demand / m), raised until m tours suffice
    bool with_demands = true;         // false writes capacity-free instances
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when a field is out of domain.
    void validate() const;
    std::size_t instances() const { return static_cast<std::size_t>(weeks) * static_cast<std::size_t>(days_per_week); }

    static SyntheticConfig from_json(const std::string& text);
    std::string to_json() const;
};

/// Per-regime averages reported by the generator itself.
struct SyntheticStats {
    int instances_before = 0;
    int instances_after = 0;
    double mean_stops_before = 0.0;
    double mean_stops_after = 0.0;
    double mean_tours_before = 0.0;
    double mean_tours_after = 0.0;
    double mean_fleet_before = 0.0;
    double mean_fleet_after = 0.0;
};

/// What the planner really followed.
struct GroundTruth {
    /// First timestamp of the new regime, when a drift was planted.
    std::optional<int> drift_timestamp;
    /// Preferred daisy chain per weekday (index weekday - 1): 0, tour 1, 0, tour 2, ... over every
    /// stop that can occur in the regime. The planner follows it and returns to the depot at each 0.
    std::vector<std::vector<StopId>> chain_before;
    std::vector<std::vector<StopId>> chain_after;
    /// Planar coordinates in km by stop id; the depot sits at the origin.
    std::vector<std::pair<double, double>> coords;
    double decay = 0.5;
    SyntheticStats stats;

    /// Row-stochastic preference over the chain's stops: p_ij proportional to decay^(steps - 1), where
    /// steps counts the moves from i to the next occurrence of j along the cyclic chain.
    /// The argmax of each row is its successor in the chain.
    TransitionMatrix latent_matrix(bool after_drift, int weekday) const;
};

struct SyntheticData {
    HistoryDataset history;
    DistanceMatrix distances;
    GroundTruth truth;
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

/// JSON dump of the ground truth (drift timestamp, orders, coordinates, statistics).
std::string ground_truth_json(const GroundTruth& truth, const StopTable& table);

}  // namespace routepref
