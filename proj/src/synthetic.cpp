#include "routepref/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace routepref {

namespace {

using ordered_json = nlohmann::ordered_json;

// Explicit draws instead of <random> distributions so the output is identical across standard libraries.
struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double unit() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine() % n); }
    int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
};

std::string stop_label(char prefix, int i, int count) {
    const int width = count >= 100 ? 3 : 2;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, i);
    return buf;
}

std::vector<StopId> perturb(std::vector<StopId> order, int swaps, Rng& rng) {
    if (order.size() < 2) return order;
    for (int s = 0; s < swaps; ++s) {
        const std::size_t i = rng.below(order.size() - 1);
        std::swap(order[i], order[i + 1]);
    }
    return order;
}

std::vector<StopId> reorder(std::vector<StopId> order, double share, Rng& rng) {
    const auto moves = static_cast<std::size_t>(std::lround(share * static_cast<double>(order.size())));
    for (std::size_t k = 0; k < moves && order.size() > 1; ++k) {
        const std::size_t from = rng.below(order.size());
        const StopId s = order[from];
        order.erase(order.begin() + static_cast<long>(from));
        const std::size_t to = rng.below(order.size() + 1);
        order.insert(order.begin() + static_cast<long>(to), s);
    }
    return order;
}

/// Cuts `order` into `fleet` consecutive tours holding about the same expected number of stops
/// and returns the chain 0, tour, 0, tour, ...
std::vector<StopId> make_chain(const std::vector<StopId>& order, const std::vector<double>& inclusion, int fleet) {
    double expected = 0.0;
    for (StopId s : order) expected += inclusion[static_cast<std::size_t>(s)];
    std::vector<StopId> chain{kDepot};
    double seen = 0.0;
    int cut = 1;
    for (StopId s : order) {
        if (cut < fleet && seen >= expected * cut / fleet && chain.back() != kDepot) {
            chain.push_back(kDepot);
            ++cut;
        }
        chain.push_back(s);
        seen += inclusion[static_cast<std::size_t>(s)];
    }
    return chain;
}

/// The planner walks today's stops along the preferred chain, going back to the depot where the
/// chain does and whenever the next stop would overload the vehicle. Noise swaps two consecutive
/// stops of the same tour.
std::vector<Tour> plan(std::vector<StopId> seq, const std::vector<int>& segment, const DemandMap& q, int capacity,
                       double noise, Rng rng) {
    auto seg = [&](StopId s) { return segment[static_cast<std::size_t>(s)]; };
    for (std::size_t k = 0; noise > 0.0 && k + 1 < seq.size(); ++k) {
        if (seg(seq[k]) == seg(seq[k + 1]) && rng.unit() < noise) {
            std::swap(seq[k], seq[k + 1]);
            ++k;
        }
    }
    std::vector<Tour> tours;
    int load = 0;
    for (StopId s : seq) {
        if (tours.empty() || seg(s) != seg(tours.back().back()) || load + q.at(s) > capacity) {
            tours.emplace_back();
            load = 0;
        }
        tours.back().push_back(s);
        load += q.at(s);
    }
    return tours;
}

}  // namespace

void SyntheticConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    };
    prob(p_regular, "p_regular");
    prob(p_adhoc, "p_adhoc");
    prob(planner_noise, "planner_noise");
    prob(drift_keep_regular, "drift_keep_regular");
    prob(drift_reorder, "drift_reorder");
    if (n_regular < 0 || n_adhoc < 0 || n_regular + n_adhoc < 1) throw std::invalid_argument("need at least one stop");
    if (n_regular * p_regular + n_adhoc * p_adhoc <= 0.0)
        throw std::invalid_argument("inclusion probabilities yield empty instances");
    if (weeks < 1 || days_per_week < 1) throw std::invalid_argument("weeks and days_per_week must be positive");
    if (fleet_before < 1 || fleet_after < 1) throw std::invalid_argument("fleet sizes must be positive");
    if (drift_week && (*drift_week < 1 || *drift_week >= weeks))
        throw std::invalid_argument("drift_week must lie in 1..weeks-1");
    if (weekday_swaps < 0) throw std::invalid_argument("weekday_swaps must be >= 0");
    if (!(area_km > 0.0)) throw std::invalid_argument("area_km must be positive");
    if (demand_min < 1 || demand_max < demand_min) throw std::invalid_argument("need 1 <= demand_min <= demand_max");
    if (!(capacity_slack >= 1.0)) throw std::invalid_argument("capacity_slack must be >= 1");
}

SyntheticConfig SyntheticConfig::from_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw std::invalid_argument("synthetic config must be a JSON object");
    SyntheticConfig c;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "n_regular") c.n_regular = v.get<int>();
            else if (k == "n_adhoc") c.n_adhoc = v.get<int>();
            else if (k == "p_regular") c.p_regular = v.get<double>();
            else if (k == "p_adhoc") c.p_adhoc = v.get<double>();
            else if (k == "weeks") c.weeks = v.get<int>();
            else if (k == "days_per_week") c.days_per_week = v.get<int>();
            else if (k == "fleet_profile") {
                c.fleet_before = v.at(0).get<int>();
                c.fleet_after = v.at(1).get<int>();
            } else if (k == "fleet_before") c.fleet_before = v.get<int>();
            else if (k == "fleet_after") c.fleet_after = v.get<int>();
            else if (k == "drift_week") c.drift_week = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
            else if (k == "drift_keep_regular") c.drift_keep_regular = v.get<double>();
            else if (k == "drift_reorder") c.drift_reorder = v.get<double>();
            else if (k == "planner_noise") c.planner_noise = v.get<double>();
            else if (k == "weekday_swaps") c.weekday_swaps = v.get<int>();
            else if (k == "area_km") c.area_km = v.get<double>();
            else if (k == "demand_min") c.demand_min = v.get<int>();
            else if (k == "demand_max") c.demand_max = v.get<int>();
            else if (k == "capacity_slack") c.capacity_slack = v.get<double>();
            else if (k == "with_demands") c.with_demands = v.get<bool>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else throw std::invalid_argument("unknown synthetic config field '" + k + "'");
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("synthetic config field '" + k + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

std::string SyntheticConfig::to_json() const {
    ordered_json j;
    j["n_regular"] = n_regular;
    j["n_adhoc"] = n_adhoc;
    j["p_regular"] = p_regular;
    j["p_adhoc"] = p_adhoc;
    j["weeks"] = weeks;
    j["days_per_week"] = days_per_week;
    j["fleet_profile"] = {fleet_before, fleet_after};
    j["drift_week"] = drift_week ? ordered_json(*drift_week) : ordered_json(nullptr);
    j["drift_keep_regular"] = drift_keep_regular;
    j["drift_reorder"] = drift_reorder;
    j["planner_noise"] = planner_noise;
    j["weekday_swaps"] = weekday_swaps;
    j["area_km"] = area_km;
    j["demand_min"] = demand_min;
    j["demand_max"] = demand_max;
    j["capacity_slack"] = capacity_slack;
    j["with_demands"] = with_demands;
    j["seed"] = seed;
    return j.dump(2);
}

TransitionMatrix GroundTruth::latent_matrix(bool after_drift, int weekday) const {
    const auto& chain = (after_drift ? chain_after : chain_before).at(static_cast<std::size_t>(weekday - 1));
    const int len = static_cast<int>(chain.size());
    std::vector<StopId> stops;
    for (StopId s : chain)
        if (s != kDepot) stops.push_back(s);

    TransitionMatrix p;
    p.index = StopIndex(stops);
    const auto mu = static_cast<Eigen::Index>(p.index.size());
    p.probs = Eigen::MatrixXd::Zero(mu, mu);
    p.flagged_rows.assign(p.index.size(), false);
    // Stops occur once in the chain; the depot row starts from the chain head.
    std::vector<int> pos(p.index.size(), 0);
    for (int k = 0; k < len; ++k)
        if (chain[static_cast<std::size_t>(k)] != kDepot) pos[p.index.at(chain[static_cast<std::size_t>(k)])] = k;
    auto steps_to = [&](int from, StopId to) {
        for (int d = 1; d <= len; ++d)
            if (chain[static_cast<std::size_t>((from + d) % len)] == to) return d;
        return len;
    };
    for (Eigen::Index i = 0; i < mu; ++i) {
        for (Eigen::Index j = 0; j < mu; ++j) {
            if (i == j) continue;
            const int steps = steps_to(pos[static_cast<std::size_t>(i)], p.index.stop(static_cast<std::size_t>(j)));
            p.probs(i, j) = std::pow(decay, steps - 1);
        }
        p.probs.row(i) /= p.probs.row(i).sum();
    }
    return p;
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    SyntheticData out;
    auto& table = out.history.table;
    std::vector<StopId> regular, adhoc;
    for (int i = 1; i <= cfg.n_regular; ++i) regular.push_back(table.intern(stop_label('R', i, cfg.n_regular)));
    for (int i = 1; i <= cfg.n_adhoc; ++i) adhoc.push_back(table.intern(stop_label('A', i, cfg.n_adhoc)));
    const auto total = static_cast<std::size_t>(cfg.n_regular + cfg.n_adhoc);

    GroundTruth& truth = out.truth;
    truth.coords.assign(total + 1, {0.0, 0.0});
    std::vector<double> angle(total + 1, 0.0);
    const double start = rng.unit() * 2.0 * std::numbers::pi;
    for (std::size_t s = 1; s <= total; ++s) {
        const double x = (rng.unit() - 0.5) * cfg.area_km;
        const double y = (rng.unit() - 0.5) * cfg.area_km;
        truth.coords[s] = {x, y};
        angle[s] = std::fmod(std::atan2(y, x) - start + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
    }

    std::vector<StopId> base(total);
    std::iota(base.begin(), base.end(), 1);
    std::stable_sort(base.begin(), base.end(), [&](StopId a, StopId b) {
        return angle[static_cast<std::size_t>(a)] < angle[static_cast<std::size_t>(b)];
    });
    std::vector<StopId> kept = regular;
    for (std::size_t i = kept.size(); i > 1; --i) std::swap(kept[i - 1], kept[rng.below(i)]);
    kept.resize(static_cast<std::size_t>(std::lround(cfg.drift_keep_regular * cfg.n_regular)));
    std::sort(kept.begin(), kept.end());

    std::vector<double> incl_before(total + 1, 0.0), incl_after(total + 1, 0.0);
    for (StopId s : regular) incl_before[static_cast<std::size_t>(s)] = cfg.p_regular;
    for (StopId s : kept) incl_after[static_cast<std::size_t>(s)] = cfg.p_regular;
    for (StopId s : adhoc) incl_before[static_cast<std::size_t>(s)] = incl_after[static_cast<std::size_t>(s)] = cfg.p_adhoc;
    auto present = [](const std::vector<StopId>& order, const std::vector<double>& incl) {
        std::vector<StopId> out;
        for (StopId s : order)
            if (incl[static_cast<std::size_t>(s)] > 0.0) out.push_back(s);
        return out;
    };

    const std::vector<StopId> shifted = reorder(base, cfg.drift_reorder, rng);
    for (int d = 0; d < cfg.days_per_week; ++d) {
        truth.chain_before.push_back(
            make_chain(present(perturb(base, cfg.weekday_swaps, rng), incl_before), incl_before, cfg.fleet_before));
        truth.chain_after.push_back(cfg.drift_week ? make_chain(present(perturb(shifted, cfg.weekday_swaps, rng), incl_after),
                                                                incl_after, cfg.fleet_after)
                                                   : truth.chain_before.back());
    }

    auto& stats = truth.stats;
    for (std::size_t i = 0; i < cfg.instances(); ++i) {
        const int week = static_cast<int>(i) / cfg.days_per_week;
        const int weekday = static_cast<int>(i) % cfg.days_per_week + 1;
        const bool after = cfg.drift_week && week >= *cfg.drift_week;
        if (after && !truth.drift_timestamp) truth.drift_timestamp = static_cast<int>(i) + 1;

        HistoryInstance inst;
        inst.timestamp = static_cast<int>(i) + 1;
        inst.weekday = weekday;
        for (StopId s : after ? kept : regular)
            if (rng.unit() < cfg.p_regular) inst.stops.push_back(s);
        for (StopId s : adhoc)
            if (rng.unit() < cfg.p_adhoc) inst.stops.push_back(s);
        std::sort(inst.stops.begin(), inst.stops.end());
        if (inst.stops.empty())
            throw std::invalid_argument("configuration produced an empty instance at t = " + std::to_string(inst.timestamp));

        int total_demand = 0, max_demand = 0;
        for (StopId s : inst.stops) {
            const int q = rng.between(cfg.demand_min, cfg.demand_max);
            inst.demands[s] = q;
            total_demand += q;
            max_demand = std::max(max_demand, q);
        }
        inst.fleet = std::min(after ? cfg.fleet_after : cfg.fleet_before, static_cast<int>(inst.stops.size()));

        const auto& chain = (after ? truth.chain_after : truth.chain_before)[static_cast<std::size_t>(weekday - 1)];
        std::vector<int> segment(total + 1, 0);
        std::vector<StopId> todays;
        int seg = 0;
        for (StopId s : chain) {
            if (s == kDepot) {
                ++seg;
            } else {
                segment[static_cast<std::size_t>(s)] = seg;
                if (std::binary_search(inst.stops.begin(), inst.stops.end(), s)) todays.push_back(s);
            }
        }

        const Rng planner(rng.engine());
        int capacity = std::max(max_demand, static_cast<int>(std::ceil(cfg.capacity_slack * total_demand / inst.fleet)));
        std::vector<Tour> tours = plan(todays, segment, inst.demands, capacity, cfg.planner_noise, planner);
        while (static_cast<int>(tours.size()) > inst.fleet) {
            ++capacity;
            tours = plan(todays, segment, inst.demands, capacity, cfg.planner_noise, planner);
        }
        inst.capacity = capacity;
        inst.routing.tours = std::move(tours);
        if (!cfg.with_demands) apply_capacity_free(inst);

        const double n = static_cast<double>(inst.stops.size());
        const double k = static_cast<double>(inst.routing.tours.size());
        if (after) {
            ++stats.instances_after;
            stats.mean_stops_after += n;
            stats.mean_tours_after += k;
            stats.mean_fleet_after += inst.fleet;
        } else {
            ++stats.instances_before;
            stats.mean_stops_before += n;
            stats.mean_tours_before += k;
            stats.mean_fleet_before += inst.fleet;
        }
        out.history.instances.push_back(std::move(inst));
    }
    if (stats.instances_before > 0) {
        stats.mean_stops_before /= stats.instances_before;
        stats.mean_tours_before /= stats.instances_before;
        stats.mean_fleet_before /= stats.instances_before;
    }
    if (stats.instances_after > 0) {
        stats.mean_stops_after /= stats.instances_after;
        stats.mean_tours_after /= stats.instances_after;
        stats.mean_fleet_after /= stats.instances_after;
    }

    std::vector<StopId> all(total);
    std::iota(all.begin(), all.end(), 1);
    out.distances.index = StopIndex(all);
    out.distances.dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total + 1), static_cast<Eigen::Index>(total + 1));
    for (std::size_t a = 0; a <= total; ++a)
        for (std::size_t b = 0; b <= total; ++b)
            out.distances.dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                std::hypot(truth.coords[a].first - truth.coords[b].first, truth.coords[a].second - truth.coords[b].second);
    return out;
}

std::string ground_truth_json(const GroundTruth& truth, const StopTable& table) {
    ordered_json j;
    j["drift_timestamp"] = truth.drift_timestamp ? ordered_json(*truth.drift_timestamp) : ordered_json(nullptr);
    auto names = [&](const std::vector<std::vector<StopId>>& orders) {
        ordered_json arr = ordered_json::array();
        for (const auto& o : orders) {
            ordered_json row = ordered_json::array();
            for (StopId s : o) row.push_back(table.name(s));
            arr.push_back(std::move(row));
        }
        return arr;
    };
    j["chain_before"] = names(truth.chain_before);
    j["chain_after"] = names(truth.chain_after);
    ordered_json coords = ordered_json::object();
    for (std::size_t s = 0; s < truth.coords.size(); ++s)
        coords[table.name(static_cast<StopId>(s))] = {truth.coords[s].first, truth.coords[s].second};
    j["coords"] = std::move(coords);
    const auto& st = truth.stats;
    j["stats"] = {{"instances_before", st.instances_before}, {"instances_after", st.instances_after},
                  {"mean_stops_before", st.mean_stops_before}, {"mean_stops_after", st.mean_stops_after},
                  {"mean_tours_before", st.mean_tours_before}, {"mean_tours_after", st.mean_tours_after},
                  {"mean_fleet_before", st.mean_fleet_before}, {"mean_fleet_after", st.mean_fleet_after}};
    return j.dump(2);
}

}  // namespace routepref
