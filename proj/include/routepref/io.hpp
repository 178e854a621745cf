#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "routepref/eval.hpp"
#include "routepref/learn.hpp"
#include "routepref/routing.hpp"

namespace routepref {

/// Non-fatal findings while loading (re-sorted records, capacity or fleet violations, ...).
using Warnings = std::vector<std::string>;

/// Reads a JSON-lines history: one object per line with keys t, weekday, m, Q, demands, tours.
/// Stop names are interned in order of appearance; "0" is the depot and may not appear in tours.
/// Instances are ordered by t and re-ranked to 1..|H|. Missing demands select the capacity-free mode.
/// Throws DataError with "source:line: field: message" diagnostics.
HistoryDataset load_history(const std::filesystem::path& path, Warnings* warnings = nullptr);
HistoryDataset parse_history(std::istream& in, const std::string& source, Warnings* warnings = nullptr);

void save_history(const HistoryDataset& ds, const std::filesystem::path& path);
void write_history(const HistoryDataset& ds, std::ostream& out);

/// Square CSV: header row and first column hold stop names ("0" = depot), cell (i, j) = km from i to j.
/// Unknown names are interned into `table`.
DistanceMatrix load_distance_matrix(const std::filesystem::path& path, StopTable& table);
DistanceMatrix parse_distance_matrix(std::istream& in, const std::string& source, StopTable& table);
void save_distance_matrix(const DistanceMatrix& d, const StopTable& table, const std::filesystem::path& path);

/// The same square layout for a learned first-order matrix.
void save_transition_matrix(const TransitionMatrix& p, const StopTable& table, const std::filesystem::path& path);
TransitionMatrix load_transition_matrix(const std::filesystem::path& path, StopTable& table);

/// JSON document with stops, lambda, depot_row and the probs[i][j][k] cube.
void save_second_order(const SecondOrderTensor& p, const StopTable& table, const std::filesystem::path& path);
SecondOrderTensor load_second_order(const std::filesystem::path& path, StopTable& table);

/// {"tours": [["a", "b"], ["c"]]}
void save_routing(const Routing& r, const StopTable& table, const std::filesystem::path& path);
Routing load_routing(const std::filesystem::path& path, StopTable& table);

/// CSV with the fixed column order timestamp, scheme, order, lambda, beta, alpha, rd_pct, ad_pct,
/// predicted_km, actual_km, solve_s.
void save_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
void write_records(const std::vector<EvalRecord>& records, std::ostream& out);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);

/// Drift records get a leading offset column.
void save_drift_records(const std::vector<DriftRecord>& records, const std::filesystem::path& path);
void write_drift_records(const std::vector<DriftRecord>& records, std::ostream& out);

/// Rows rd_pct, ad_pct, avg_km, avg_s; one column per swept value plus "actual".
void save_sweep_table(const SweepTable& table, const std::filesystem::path& path);
void write_sweep_table(const SweepTable& table, std::ostream& out);

/// Shortest decimal text that reads back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);

}  // namespace routepref
