#include "routepref/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "routepref/error.hpp"

namespace routepref {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

// Minimal RFC 4180 field handling: quotes only when needed.
std::string csv_field(const std::string& s) {
    const bool quote = s.find_first_of(",\"\r\n") != std::string::npos ||
                       (!s.empty() && (s.front() == ' ' || s.back() == ' '));
    if (!quote) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> split_csv(const std::string& line, const std::string& at) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) throw DataError(at + "unterminated quoted field");
    return fields;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

int require_int(const json& obj, const char* key, const std::string& at) {
    auto it = obj.find(key);
    if (it == obj.end()) throw DataError(at + key + ": missing");
    if (!it->is_number_integer()) throw DataError(at + key + ": expected an integer");
    return it->get<int>();
}

std::string stop_name(const json& v, const std::string& at, const std::string& field) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw DataError(at + field + ": stop names must be strings");
}

struct SquareMatrix {
    StopIndex index;
    Eigen::MatrixXd values;
};

SquareMatrix parse_square(std::istream& in, const std::string& source, StopTable& table) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (read_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        header = split_csv(line, where(source, lineno));
        break;
    }
    if (header.size() < 2) throw DataError(source + ": missing header row of stop names");
    std::vector<std::string> names(header.begin() + 1, header.end());
    std::vector<StopId> ids;
    std::set<std::string> seen;
    for (const auto& name : names) {
        if (name.empty()) throw DataError(where(source, lineno) + "empty stop name in header");
        if (!seen.insert(name).second) throw DataError(where(source, lineno) + "duplicate stop '" + name + "'");
        ids.push_back(table.intern(name));
    }
    if (!seen.count(std::string(StopTable::kDepotName)))
        throw DataError(where(source, lineno) + "header lacks the depot column '0'");

    StopIndex index(ids);
    const std::size_t mu = names.size();
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mu), static_cast<Eigen::Index>(mu));
    std::size_t row = 0;
    while (read_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string at = where(source, lineno);
        auto cells = split_csv(line, at);
        if (row >= mu) throw DataError(at + "more rows than header columns (matrix is not square)");
        if (cells.size() != mu + 1)
            throw DataError(at + "expected " + std::to_string(mu + 1) + " cells, found " + std::to_string(cells.size()));
        if (cells[0] != names[row])
            throw DataError(at + "row name '" + cells[0] + "' does not match header column '" + names[row] + "'");
        const auto r = static_cast<Eigen::Index>(index.at(ids[row]));
        for (std::size_t col = 0; col < mu; ++col) {
            const double v = parse_double(cells[col + 1], at + "column '" + names[col] + "'");
            values(r, static_cast<Eigen::Index>(index.at(ids[col]))) = v;
        }
        ++row;
    }
    if (row != mu)
        throw DataError(source + ": " + std::to_string(row) + " rows for " + std::to_string(mu) +
                        " columns (matrix is not square)");
    return {std::move(index), std::move(values)};
}

void write_square(std::ostream& out, const StopIndex& index, const Eigen::MatrixXd& values, const StopTable& table) {
    out << "stop";
    for (StopId s : index.stops()) out << ',' << csv_field(table.name(s));
    out << '\n';
    for (std::size_t i = 0; i < index.size(); ++i) {
        out << csv_field(table.name(index.stop(i)));
        for (std::size_t j = 0; j < index.size(); ++j)
            out << ',' << format_double(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << '\n';
    }
}

const char* const kRecordColumns[] = {"timestamp", "scheme", "order", "lambda", "beta", "alpha",
                                      "rd_pct", "ad_pct", "predicted_km", "actual_km", "solve_s"};

void write_record_fields(std::ostream& out, const EvalRecord& r) {
    out << r.timestamp << ',' << csv_field(r.scheme) << ',' << r.order << ',' << format_double(r.lambda) << ','
        << format_double(r.beta) << ',' << format_double(r.alpha) << ',' << format_double(r.rd_pct) << ','
        << format_double(r.ad_pct) << ',' << format_double(r.predicted_km) << ',' << format_double(r.actual_km)
        << ',' << format_double(r.solve_s);
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& what) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
    if (b < e && *b == '+') ++b;
    double v = 0.0;
    auto res = std::from_chars(b, e, v);
    if (b == e || res.ec != std::errc() || res.ptr != e) throw DataError(what + ": '" + s + "' is not a number");
    return v;
}

HistoryDataset parse_history(std::istream& in, const std::string& source, Warnings* warnings) {
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    HistoryDataset ds;
    std::vector<std::size_t> lines;
    std::string line;
    std::size_t lineno = 0;
    std::size_t capacity_free = 0;
    static const std::set<std::string> kKnown{"t", "weekday", "m", "Q", "demands", "tours"};

    while (read_line(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string at = where(source, lineno);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(at + "invalid JSON: " + e.what());
        }
        if (!obj.is_object()) throw DataError(at + "expected one JSON object per line");
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!kKnown.count(it.key())) warn(at + it.key() + ": unknown field ignored");

        HistoryInstance inst;
        inst.timestamp = require_int(obj, "t", at);
        if (obj.contains("weekday")) {
            inst.weekday = require_int(obj, "weekday", at);
            if (inst.weekday < 0) throw DataError(at + "weekday: must be >= 0");
        }
        inst.fleet = require_int(obj, "m", at);
        if (inst.fleet < 1) throw DataError(at + "m: fleet size must be positive");

        auto tours = obj.find("tours");
        if (tours == obj.end()) throw DataError(at + "tours: missing");
        if (!tours->is_array() || tours->empty()) throw DataError(at + "tours: expected a non-empty list of tours");
        std::set<StopId> visited;
        for (std::size_t k = 0; k < tours->size(); ++k) {
            const json& tj = (*tours)[k];
            const std::string field = "tours[" + std::to_string(k) + "]";
            if (!tj.is_array() || tj.empty()) throw DataError(at + field + ": expected a non-empty list of stops");
            Tour tour;
            for (std::size_t i = 0; i < tj.size(); ++i) {
                const std::string f = field + "[" + std::to_string(i) + "]";
                const std::string name = stop_name(tj[i], at, f);
                if (name.empty()) throw DataError(at + f + ": empty stop name");
                if (name == StopTable::kDepotName) throw DataError(at + f + ": the depot '0' cannot appear inside a tour");
                const StopId id = ds.table.intern(name);
                if (!visited.insert(id).second) throw DataError(at + f + ": stop '" + name + "' is visited twice");
                tour.push_back(id);
            }
            inst.routing.tours.push_back(std::move(tour));
        }
        inst.stops.assign(visited.begin(), visited.end());

        auto demands = obj.find("demands");
        if (demands == obj.end() || demands->is_null()) {
            if (obj.contains("Q")) warn(at + "Q: ignored because demands are absent");
            apply_capacity_free(inst);
            ++capacity_free;
        } else {
            if (!demands->is_object()) throw DataError(at + "demands: expected an object of stop: quantity");
            inst.capacity = require_int(obj, "Q", at);
            if (inst.capacity < 1) throw DataError(at + "Q: capacity must be positive");
            for (auto it = demands->begin(); it != demands->end(); ++it) {
                const std::string f = "demands." + it.key();
                if (!it->is_number_integer() || it->get<long long>() < 1)
                    throw DataError(at + f + ": expected a positive integer");
                auto id = ds.table.find(it.key());
                if (!id || !visited.count(*id))
                    throw DataError(at + f + ": stop is not visited by any tour");
                inst.demands[*id] = it->get<int>();
            }
            for (StopId s : inst.stops)
                if (!inst.demands.count(s))
                    throw DataError(at + "demands: stop '" + ds.table.name(s) + "' has no demand");
        }

        auto report = validate_routing(inst.routing, inst.fleet, inst.demands, inst.capacity);
        for (const auto& v : report.violations) warn(at + "routing: " + v + " (kept for learning)");

        ds.instances.push_back(std::move(inst));
        lines.push_back(lineno);
    }
    if (ds.instances.empty()) throw DataError(source + ": no instances");
    if (capacity_free > 0)
        warn(source + ": " + std::to_string(capacity_free) +
             " instance(s) without demands use unit demands with Q = n (capacity-free mode)");

    std::vector<std::size_t> order(ds.instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ds.instances[a].timestamp < ds.instances[b].timestamp;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        const auto& a = ds.instances[order[i - 1]];
        const auto& b = ds.instances[order[i]];
        if (a.timestamp == b.timestamp)
            throw DataError(where(source, lines[order[i]]) + "t: duplicate timestamp " + std::to_string(b.timestamp) +
                            " (first seen on line " + std::to_string(lines[order[i - 1]]) + ")");
    }
    if (!std::is_sorted(order.begin(), order.end())) {
        warn(source + ": instances were not in timestamp order and have been re-sorted");
        std::vector<HistoryInstance> sorted;
        sorted.reserve(order.size());
        for (std::size_t i : order) sorted.push_back(std::move(ds.instances[i]));
        ds.instances = std::move(sorted);
    }
    ds.rerank();
    return ds;
}

HistoryDataset load_history(const std::filesystem::path& path, Warnings* warnings) {
    auto in = open_in(path);
    return parse_history(in, path.string(), warnings);
}

void write_history(const HistoryDataset& ds, std::ostream& out) {
    for (const auto& inst : ds.instances) {
        ordered_json obj;
        obj["t"] = inst.timestamp;
        obj["weekday"] = inst.weekday;
        obj["m"] = inst.fleet;
        if (!inst.capacity_free) {
            obj["Q"] = inst.capacity;
            ordered_json dem = ordered_json::object();
            for (const auto& [s, q] : inst.demands) dem[ds.table.name(s)] = q;
            obj["demands"] = std::move(dem);
        }
        ordered_json tours = ordered_json::array();
        for (const Tour& t : inst.routing.tours) {
            ordered_json tj = ordered_json::array();
            for (StopId s : t) tj.push_back(ds.table.name(s));
            tours.push_back(std::move(tj));
        }
        obj["tours"] = std::move(tours);
        out << obj.dump() << '\n';
    }
}

void save_history(const HistoryDataset& ds, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_history(ds, out);
    finish(out, path);
}

DistanceMatrix parse_distance_matrix(std::istream& in, const std::string& source, StopTable& table) {
    auto sq = parse_square(in, source, table);
    DistanceMatrix d{std::move(sq.index), std::move(sq.values)};
    for (Eigen::Index i = 0; i < d.dist.rows(); ++i)
        for (Eigen::Index j = 0; j < d.dist.cols(); ++j) {
            const double v = d.dist(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw DataError(source + ": distance from '" + table.name(d.index.stop(static_cast<std::size_t>(i))) +
                                "' to '" + table.name(d.index.stop(static_cast<std::size_t>(j))) +
                                "' must be finite and non-negative");
        }
    d.dist.diagonal().setZero();
    return d;
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& path, StopTable& table) {
    auto in = open_in(path);
    return parse_distance_matrix(in, path.string(), table);
}

void save_distance_matrix(const DistanceMatrix& d, const StopTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_square(out, d.index, d.dist, table);
    finish(out, path);
}

void save_transition_matrix(const TransitionMatrix& p, const StopTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_square(out, p.index, p.probs, table);
    finish(out, path);
}

TransitionMatrix load_transition_matrix(const std::filesystem::path& path, StopTable& table) {
    auto in = open_in(path);
    auto sq = parse_square(in, path.string(), table);
    TransitionMatrix p;
    p.index = std::move(sq.index);
    p.probs = std::move(sq.values);
    p.flagged_rows.assign(p.index.size(), false);
    return p;
}

void save_second_order(const SecondOrderTensor& p, const StopTable& table, const std::filesystem::path& path) {
    ordered_json doc;
    ordered_json stops = ordered_json::array();
    for (StopId s : p.index.stops()) stops.push_back(table.name(s));
    doc["stops"] = std::move(stops);
    doc["lambda"] = p.lambda;
    doc["depot_row"] = std::vector<double>(p.depot_row.data(), p.depot_row.data() + p.depot_row.size());
    const std::size_t mu = p.size();
    ordered_json cube = ordered_json::array();
    for (std::size_t i = 0; i < mu; ++i) {
        ordered_json plane = ordered_json::array();
        for (std::size_t j = 0; j < mu; ++j) {
            std::vector<double> row(mu);
            for (std::size_t k = 0; k < mu; ++k) row[k] = p.cell(i, j, k);
            plane.push_back(std::move(row));
        }
        cube.push_back(std::move(plane));
    }
    doc["probs"] = std::move(cube);
    auto out = open_out(path);
    out << doc.dump() << '\n';
    finish(out, path);
}

SecondOrderTensor load_second_order(const std::filesystem::path& path, StopTable& table) {
    auto in = open_in(path);
    json doc;
    try {
        doc = json::parse(in);
        SecondOrderTensor p;
        std::vector<StopId> ids;
        for (const auto& n : doc.at("stops")) ids.push_back(table.intern(n.get<std::string>()));
        p.index = StopIndex(ids);
        const std::size_t mu = p.size();
        if (ids.size() != mu) throw DataError(path.string() + ": stops must be distinct and include '0'");
        // Stored in index order, which is ascending id order.
        for (std::size_t i = 0; i < mu; ++i)
            if (ids[i] != p.index.stop(i)) throw DataError(path.string() + ": stops are not in canonical order");
        p.lambda = doc.at("lambda").get<double>();
        auto depot = doc.at("depot_row").get<std::vector<double>>();
        if (depot.size() != mu) throw DataError(path.string() + ": depot_row has the wrong length");
        p.depot_row = Eigen::Map<Eigen::VectorXd>(depot.data(), static_cast<Eigen::Index>(mu));
        p.probs.assign(mu * mu * mu, 0.0);
        const auto& cube = doc.at("probs");
        if (cube.size() != mu) throw DataError(path.string() + ": probs has the wrong shape");
        for (std::size_t i = 0; i < mu; ++i) {
            if (cube[i].size() != mu) throw DataError(path.string() + ": probs has the wrong shape");
            for (std::size_t j = 0; j < mu; ++j) {
                auto row = cube[i][j].get<std::vector<double>>();
                if (row.size() != mu) throw DataError(path.string() + ": probs has the wrong shape");
                for (std::size_t k = 0; k < mu; ++k) p.cell(i, j, k) = row[k];
            }
        }
        p.flagged_slices.assign(mu * mu, false);
        return p;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_routing(const Routing& r, const StopTable& table, const std::filesystem::path& path) {
    ordered_json tours = ordered_json::array();
    for (const Tour& t : r.tours) {
        ordered_json tj = ordered_json::array();
        for (StopId s : t) tj.push_back(table.name(s));
        tours.push_back(std::move(tj));
    }
    ordered_json doc;
    doc["tours"] = std::move(tours);
    auto out = open_out(path);
    out << doc.dump() << '\n';
    finish(out, path);
}

Routing load_routing(const std::filesystem::path& path, StopTable& table) {
    auto in = open_in(path);
    const std::string src = path.string();
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(src + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("tours") || !doc["tours"].is_array())
        throw DataError(src + ": expected an object with a 'tours' list");
    Routing r;
    for (std::size_t k = 0; k < doc["tours"].size(); ++k) {
        const json& tj = doc["tours"][k];
        const std::string field = "tours[" + std::to_string(k) + "]";
        if (!tj.is_array()) throw DataError(src + ": " + field + ": expected a list of stops");
        Tour t;
        for (std::size_t i = 0; i < tj.size(); ++i) {
            const std::string name = stop_name(tj[i], src + ": ", field);
            if (name == StopTable::kDepotName) throw DataError(src + ": " + field + ": the depot cannot appear inside a tour");
            t.push_back(table.intern(name));
        }
        r.tours.push_back(std::move(t));
    }
    return r;
}

void write_records(const std::vector<EvalRecord>& records, std::ostream& out) {
    for (std::size_t i = 0; i < std::size(kRecordColumns); ++i) out << (i ? "," : "") << kRecordColumns[i];
    out << '\n';
    for (const auto& r : records) {
        write_record_fields(out, r);
        out << '\n';
    }
}

void save_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_records(records, out);
    finish(out, path);
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
    auto in = open_in(path);
    const std::string src = path.string();
    std::string line;
    std::size_t lineno = 1;
    if (!read_line(in, line)) throw DataError(src + ": empty records file");
    auto header = split_csv(line, where(src, 1));
    if (header != std::vector<std::string>(std::begin(kRecordColumns), std::end(kRecordColumns)))
        throw DataError(where(src, 1) + "unexpected records header");
    std::vector<EvalRecord> out;
    while (read_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string at = where(src, lineno);
        auto f = split_csv(line, at);
        if (f.size() != header.size()) throw DataError(at + "expected " + std::to_string(header.size()) + " columns");
        EvalRecord r;
        r.timestamp = static_cast<int>(parse_double(f[0], at + "timestamp"));
        r.scheme = f[1];
        r.order = static_cast<int>(parse_double(f[2], at + "order"));
        r.lambda = parse_double(f[3], at + "lambda");
        r.beta = parse_double(f[4], at + "beta");
        r.alpha = parse_double(f[5], at + "alpha");
        r.rd_pct = parse_double(f[6], at + "rd_pct");
        r.ad_pct = parse_double(f[7], at + "ad_pct");
        r.predicted_km = parse_double(f[8], at + "predicted_km");
        r.actual_km = parse_double(f[9], at + "actual_km");
        r.solve_s = parse_double(f[10], at + "solve_s");
        out.push_back(std::move(r));
    }
    return out;
}

void write_drift_records(const std::vector<DriftRecord>& records, std::ostream& out) {
    out << "offset";
    for (const char* c : kRecordColumns) out << ',' << c;
    out << '\n';
    for (const auto& d : records) {
        out << d.offset << ',';
        write_record_fields(out, d.record);
        out << '\n';
    }
}

void save_drift_records(const std::vector<DriftRecord>& records, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_drift_records(records, out);
    finish(out, path);
}

void write_sweep_table(const SweepTable& table, std::ostream& out) {
    out << axis_name(table.axis);
    for (const auto& c : table.columns) out << ',' << format_double(c.value);
    out << ",actual\n";
    auto row = [&](const char* name, auto get, const std::string& actual) {
        out << name;
        for (const auto& c : table.columns) out << ',' << format_double(get(c));
        out << ',' << actual << '\n';
    };
    row("rd_pct", [](const SweepColumn& c) { return c.rd_pct; }, "0");
    row("ad_pct", [](const SweepColumn& c) { return c.ad_pct; }, "0");
    row("avg_km", [](const SweepColumn& c) { return c.avg_km; }, format_double(table.actual_km));
    row("avg_s", [](const SweepColumn& c) { return c.avg_s; }, "");
}

void save_sweep_table(const SweepTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_sweep_table(table, out);
    finish(out, path);
}

}  // namespace routepref
