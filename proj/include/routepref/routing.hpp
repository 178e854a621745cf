#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace routepref {

/// Dense stop index. 0 is always the depot.
using StopId = std::int32_t;
inline constexpr StopId kDepot = 0;

/// Ordered stops of one vehicle, depot excluded on both ends.
using Tour = std::vector<StopId>;

/// A set of depot-anchored tours.
struct Routing {
    std::vector<Tour> tours;

    /// Sorted union of all tour stops.
    std::vector<StopId> stop_set() const;
    std::size_t num_stops() const;

    /// Tours sorted by their first stop; the order daisy_chain uses.
    Routing canonical() const;

    /// Equality as a set of tours (tour order is irrelevant, stop order inside a tour is not).
    bool same_tours(const Routing& other) const { return canonical().tours == other.canonical().tours; }

    friend bool operator==(const Routing&, const Routing&) = default;
};

using DemandMap = std::map<StopId, int>;

/// Outcome of checking a routing against the CVRP constraints.
struct ValidationReport {
    bool tours_well_formed = true;   // non-empty, no depot inside a tour
    bool visits_exactly_once = true; // every stop of the instance appears once, nothing else
    bool fleet_ok = true;            // number of tours <= m (or == m in strict mode)
    bool capacity_ok = true;         // load of every tour <= Q
    std::vector<std::string> violations;

    bool ok() const { return tours_well_formed && visits_exactly_once && fleet_ok && capacity_ok; }
};

/// Checks `r` against fleet size `fleet`, the instance demands (whose keys define the
/// stop set) and capacity. Violations are reported, never thrown.
ValidationReport validate_routing(const Routing& r, int fleet, const DemandMap& demands, int capacity,
                                  bool fleet_equality = false);

/// Concatenates the canonical tours into 0, t1..., 0, t2..., 0 with the (0 -> 0) hops collapsed.
/// Throws std::invalid_argument for a routing without tours.
std::vector<StopId> daisy_chain(const Routing& r);

/// Inverse of daisy_chain: splits a depot-separated chain back into tours.
Routing split_chain(const std::vector<StopId>& chain);

/// Directed arcs (i, j) of the daisy chain; there is never a (0, 0) arc.
std::vector<std::pair<StopId, StopId>> chain_arcs(const Routing& r);

/// Bidirectional mapping between stop names and dense ids. Id 0 is the depot, named "0".
class StopTable {
public:
    static constexpr std::string_view kDepotName = "0";

    StopTable();

    /// Returns the id of `name`, registering it when unseen.
    StopId intern(const std::string& name);
    std::optional<StopId> find(const std::string& name) const;
    const std::string& name(StopId id) const { return names_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    friend bool operator==(const StopTable& a, const StopTable& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, StopId> ids_;
};

/// One historical tuple (V^t, m^t, z^t, x^t).
struct HistoryInstance {
    int timestamp = 1;          // rank in 1..|H|
    int weekday = 0;            // 0 = untagged
    std::vector<StopId> stops;  // sorted, depot excluded
    int fleet = 1;
    DemandMap demands;
    int capacity = 1;
    /// Demands were absent from the input: q_i = 1 and Q = n were substituted.
    bool capacity_free = false;
    Routing routing;

    friend bool operator==(const HistoryInstance&, const HistoryInstance&) = default;
};

/// Timestamp-ordered history H plus the stop-name table its ids refer to.
struct HistoryDataset {
    std::vector<HistoryInstance> instances;
    StopTable table;

    /// V_all: sorted union of the instance stop sets (depot excluded).
    std::vector<StopId> all_stops() const;
    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }
    int max_timestamp() const { return instances.empty() ? 0 : instances.back().timestamp; }

    /// Instances with timestamp < t, keeping the table.
    HistoryDataset before(int t) const;
    /// Reassigns timestamps 1..|H| in current order.
    void rerank();
};

/// Fills in the capacity-free defaults (q_i = 1, Q = n) and sets the flag.
void apply_capacity_free(HistoryInstance& inst);

/// Jaccard coefficient |A n B| / |A u B| of two sorted stop sets.
/// Throws std::invalid_argument when both are empty.
double jaccard(const std::vector<StopId>& a, const std::vector<StopId>& b);

}  // namespace routepref
