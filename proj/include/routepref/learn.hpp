#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routepref/routing.hpp"

namespace routepref {

enum class SchemeKind { Unif, Time, Time2, Simi, Simi2, Exp };

/// Prior weight per historical instance.
struct WeighingScheme {
    SchemeKind kind = SchemeKind::Unif;
    double alpha = 0.7;    // EXP only, in (0, 1)
    double exponent = 0.0; // TIME/SIMI power; 0 selects the kind's default (1, or 2 for the squared kinds)

    double effective_exponent() const;
    /// Throws std::invalid_argument when alpha or exponent is out of domain.
    void validate() const;
    std::string name() const;
    static WeighingScheme parse(const std::string& name);
};

/// Sorted set of stop ids (always containing the depot) with O(1) id -> position lookup.
class StopIndex {
public:
    StopIndex() : StopIndex(std::vector<StopId>{}) {}
    explicit StopIndex(std::vector<StopId> stops);

    std::size_t size() const { return stops_.size(); }
    const std::vector<StopId>& stops() const { return stops_; }
    StopId stop(std::size_t pos) const { return stops_[pos]; }
    bool contains(StopId s) const { return position(s).has_value(); }
    std::optional<std::size_t> position(StopId s) const;
    /// Position of `s`; throws std::out_of_range when absent.
    std::size_t at(StopId s) const;

    friend bool operator==(const StopIndex& a, const StopIndex& b) { return a.stops_ == b.stops_; }

private:
    std::vector<StopId> stops_;
    std::vector<int> pos_;
};

/// Row-stochastic first-order matrix over `index`; the diagonal is always 0.
struct TransitionMatrix {
    StopIndex index;
    Eigen::MatrixXd probs;
    double lambda = 0.0;
    /// Rows that had no mass and were set uniform over their support.
    std::vector<bool> flagged_rows;

    double at(StopId from, StopId to) const { return probs(index.at(from), index.at(to)); }
    std::size_t size() const { return index.size(); }
};

/// Second-order tensor p(k | i, j) stored row-major as [i][j][k], plus the first-order depot row.
struct SecondOrderTensor {
    StopIndex index;
    std::vector<double> probs;
    Eigen::VectorXd depot_row;
    double lambda = 0.0;
    std::vector<bool> flagged_slices; // indexed i * mu + j

    std::size_t size() const { return index.size(); }
    double& cell(std::size_t i, std::size_t j, std::size_t k) { return probs[(i * size() + j) * size() + k]; }
    double cell(std::size_t i, std::size_t j, std::size_t k) const { return probs[(i * size() + j) * size() + k]; }
    double at(StopId i, StopId j, StopId k) const { return cell(index.at(i), index.at(j), index.at(k)); }
};

/// Kilometres between stops; non-negative with zero diagonal. May be asymmetric.
struct DistanceMatrix {
    StopIndex index;
    Eigen::MatrixXd dist;

    double at(StopId from, StopId to) const { return dist(index.at(from), index.at(to)); }
    /// Sub-matrix over `sub`; throws DataError when a stop of `sub` is missing.
    DistanceMatrix restricted(const StopIndex& sub) const;
    /// Throws DataError on negative entries or a non-zero diagonal.
    void validate() const;
};

/// w_t for every instance of `ds`, with the current rank T = max timestamp + 1.
/// `current` is V^T (needed by SIMI/SIMI2 only).
std::map<int, double> compute_weights(const HistoryDataset& ds, const std::vector<StopId>& current,
                                      const WeighingScheme& scheme);

/// F = sum_t w_t A^t over the daisy-chain arcs, indexed by `index`.
Eigen::MatrixXd frequency_matrix(const HistoryDataset& ds, const std::map<int, double>& weights,
                                 const StopIndex& index);

/// p_ij = (f_ij + lambda) / sum_{k != i} (f_ik + lambda). Rows without mass become uniform and flagged.
TransitionMatrix laplace_normalize(const Eigen::MatrixXd& freq, double lambda, const StopIndex& index);

/// Frequencies, smoothing and normalisation over V_all of `ds`.
TransitionMatrix estimate_first_order(const HistoryDataset& ds, const WeighingScheme& scheme, double lambda,
                                      const std::vector<StopId>& current = {});

SecondOrderTensor estimate_second_order(const HistoryDataset& ds, const WeighingScheme& scheme, double lambda,
                                        const std::vector<StopId>& current = {});

/// Softmax of -theta * d over each row (diagonal excluded).
TransitionMatrix softmax_distance_matrix(const DistanceMatrix& d, double theta = 1.0);

/// The theta* > 0 solving sum_k exp(-theta d_0k) = 1 over the depot row.
double solve_theta_star(const DistanceMatrix& d);

/// beta * p + (1 - beta) * d, cell by cell.
TransitionMatrix mix_matrices(const TransitionMatrix& p, const TransitionMatrix& d, double beta);

/// Adds `stops` missing from `p` with uniform rows; existing rows get the uniform mass for the new
/// columns and are renormalised over the enlarged support.
TransitionMatrix extend_uniform(const TransitionMatrix& p, const std::vector<StopId>& stops);
SecondOrderTensor extend_uniform(const SecondOrderTensor& p, const std::vector<StopId>& stops);

}  // namespace routepref
