#include "routepref/routing.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace routepref {

std::vector<StopId> Routing::stop_set() const {
    std::vector<StopId> out;
    for (const auto& t : tours) out.insert(out.end(), t.begin(), t.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t Routing::num_stops() const {
    std::size_t n = 0;
    for (const auto& t : tours) n += t.size();
    return n;
}

Routing Routing::canonical() const {
    Routing out = *this;
    std::stable_sort(out.tours.begin(), out.tours.end(), [](const Tour& a, const Tour& b) {
        if (a.empty() || b.empty()) return a.size() < b.size();
        return a.front() < b.front();
    });
    return out;
}

ValidationReport validate_routing(const Routing& r, int fleet, const DemandMap& demands, int capacity,
                                  bool fleet_equality) {
    ValidationReport rep;
    std::map<StopId, int> seen;
    for (std::size_t k = 0; k < r.tours.size(); ++k) {
        const Tour& tour = r.tours[k];
        if (tour.empty()) {
            rep.tours_well_formed = false;
            rep.violations.push_back("tour " + std::to_string(k) + " is empty");
        }
        long load = 0;
        for (StopId s : tour) {
            if (s == kDepot) {
                rep.tours_well_formed = false;
                rep.violations.push_back("tour " + std::to_string(k) + " contains the depot");
                continue;
            }
            ++seen[s];
            auto it = demands.find(s);
            if (it == demands.end()) {
                rep.visits_exactly_once = false;
                rep.violations.push_back("stop " + std::to_string(s) + " is not part of the instance");
            } else {
                load += it->second;
            }
        }
        if (load > capacity) {
            rep.capacity_ok = false;
            rep.violations.push_back("tour " + std::to_string(k) + " load " + std::to_string(load) + " > " +
                                     std::to_string(capacity));
        }
    }
    for (const auto& [s, q] : demands) {
        (void)q;
        auto it = seen.find(s);
        int count = it == seen.end() ? 0 : it->second;
        if (count != 1) {
            rep.visits_exactly_once = false;
            rep.violations.push_back("stop " + std::to_string(s) + " visited " + std::to_string(count) + " times");
        }
    }
    const auto ntours = static_cast<int>(r.tours.size());
    if (ntours > fleet || (fleet_equality && ntours != fleet)) {
        rep.fleet_ok = false;
        rep.violations.push_back(std::to_string(ntours) + " tours for fleet " + std::to_string(fleet));
    }
    return rep;
}

std::vector<StopId> daisy_chain(const Routing& r) {
    if (r.tours.empty()) throw std::invalid_argument("daisy_chain: routing has no tours");
    std::vector<StopId> chain{kDepot};
    for (const Tour& t : r.canonical().tours) {
        chain.insert(chain.end(), t.begin(), t.end());
        chain.push_back(kDepot);
    }
    return chain;
}

Routing split_chain(const std::vector<StopId>& chain) {
    Routing r;
    Tour cur;
    for (StopId s : chain) {
        if (s == kDepot) {
            if (!cur.empty()) r.tours.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(s);
        }
    }
    if (!cur.empty()) r.tours.push_back(std::move(cur));
    return r;
}

std::vector<std::pair<StopId, StopId>> chain_arcs(const Routing& r) {
    std::vector<std::pair<StopId, StopId>> arcs;
    for (const Tour& t : r.canonical().tours) {
        StopId prev = kDepot;
        for (StopId s : t) {
            arcs.emplace_back(prev, s);
            prev = s;
        }
        arcs.emplace_back(prev, kDepot);
    }
    return arcs;
}

StopTable::StopTable() {
    names_.emplace_back(kDepotName);
    ids_.emplace(std::string(kDepotName), kDepot);
}

StopId StopTable::intern(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<StopId>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<StopId> StopTable::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::vector<StopId> HistoryDataset::all_stops() const {
    std::set<StopId> all;
    for (const auto& inst : instances) all.insert(inst.stops.begin(), inst.stops.end());
    return {all.begin(), all.end()};
}

HistoryDataset HistoryDataset::before(int t) const {
    HistoryDataset out;
    out.table = table;
    for (const auto& inst : instances)
        if (inst.timestamp < t) out.instances.push_back(inst);
    return out;
}

void HistoryDataset::rerank() {
    int t = 1;
    for (auto& inst : instances) inst.timestamp = t++;
}

void apply_capacity_free(HistoryInstance& inst) {
    inst.demands.clear();
    for (StopId s : inst.stops) inst.demands[s] = 1;
    inst.capacity = static_cast<int>(inst.stops.size());
    inst.capacity_free = true;
}

double jaccard(const std::vector<StopId>& a, const std::vector<StopId>& b) {
    if (a.empty() && b.empty()) throw std::invalid_argument("jaccard: both stop sets are empty");
    std::vector<StopId> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    const double uni = static_cast<double>(a.size() + b.size() - inter.size());
    return static_cast<double>(inter.size()) / uni;
}

}  // namespace routepref
