#include "routepref/learn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "routepref/error.hpp"

namespace routepref {

double WeighingScheme::effective_exponent() const {
    if (exponent > 0.0) return exponent;
    return (kind == SchemeKind::Time2 || kind == SchemeKind::Simi2) ? 2.0 : 1.0;
}

void WeighingScheme::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (exponent < 0.0 || !std::isfinite(exponent)) throw std::invalid_argument("scheme exponent must be > 0");
}

std::string WeighingScheme::name() const {
    switch (kind) {
        case SchemeKind::Unif: return "unif";
        case SchemeKind::Time: return "time";
        case SchemeKind::Time2: return "time2";
        case SchemeKind::Simi: return "simi";
        case SchemeKind::Simi2: return "simi2";
        case SchemeKind::Exp: return "exp";
    }
    return "unif";
}

WeighingScheme WeighingScheme::parse(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    WeighingScheme w;
    if (s == "unif") w.kind = SchemeKind::Unif;
    else if (s == "time") w.kind = SchemeKind::Time;
    else if (s == "time2") w.kind = SchemeKind::Time2;
    else if (s == "simi") w.kind = SchemeKind::Simi;
    else if (s == "simi2") w.kind = SchemeKind::Simi2;
    else if (s == "exp") w.kind = SchemeKind::Exp;
    else throw std::invalid_argument("unknown weighing scheme '" + name + "'");
    return w;
}

StopIndex::StopIndex(std::vector<StopId> stops) : stops_(std::move(stops)) {
    stops_.push_back(kDepot);
    std::sort(stops_.begin(), stops_.end());
    stops_.erase(std::unique(stops_.begin(), stops_.end()), stops_.end());
    if (stops_.front() < 0) throw std::invalid_argument("negative stop id");
    pos_.assign(static_cast<std::size_t>(stops_.back()) + 1, -1);
    for (std::size_t i = 0; i < stops_.size(); ++i) pos_[static_cast<std::size_t>(stops_[i])] = static_cast<int>(i);
}

std::optional<std::size_t> StopIndex::position(StopId s) const {
    if (s < 0 || static_cast<std::size_t>(s) >= pos_.size()) return std::nullopt;
    int p = pos_[static_cast<std::size_t>(s)];
    if (p < 0) return std::nullopt;
    return static_cast<std::size_t>(p);
}

std::size_t StopIndex::at(StopId s) const {
    auto p = position(s);
    if (!p) throw std::out_of_range("stop " + std::to_string(s) + " is not in the matrix index");
    return *p;
}

DistanceMatrix DistanceMatrix::restricted(const StopIndex& sub) const {
    DistanceMatrix out;
    out.index = sub;
    const auto n = static_cast<Eigen::Index>(sub.size());
    out.dist.resize(n, n);
    std::vector<std::size_t> map(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        auto p = index.position(sub.stop(i));
        if (!p) throw DataError("distance matrix has no entry for stop id " + std::to_string(sub.stop(i)));
        map[i] = *p;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out.dist(i, j) = dist(static_cast<Eigen::Index>(map[static_cast<std::size_t>(i)]),
                                  static_cast<Eigen::Index>(map[static_cast<std::size_t>(j)]));
    return out;
}

void DistanceMatrix::validate() const {
    if (dist.rows() != dist.cols() || static_cast<std::size_t>(dist.rows()) != index.size())
        throw DataError("distance matrix is not square over its index");
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
        if (dist(i, i) != 0.0) throw DataError("distance matrix has a non-zero diagonal");
        for (Eigen::Index j = 0; j < dist.cols(); ++j)
            if (!(dist(i, j) >= 0.0) || !std::isfinite(dist(i, j)))
                throw DataError("distance matrix has a negative or non-finite entry");
    }
}

std::map<int, double> compute_weights(const HistoryDataset& ds, const std::vector<StopId>& current,
                                      const WeighingScheme& scheme) {
    scheme.validate();
    const bool simi = scheme.kind == SchemeKind::Simi || scheme.kind == SchemeKind::Simi2;
    if (simi && current.empty())
        throw std::invalid_argument("similarity weighing needs a non-empty current stop set");
    std::vector<StopId> cur = current;
    std::sort(cur.begin(), cur.end());
    cur.erase(std::remove(cur.begin(), cur.end(), kDepot), cur.end());

    const double T = static_cast<double>(ds.max_timestamp() + 1);
    const double a = scheme.effective_exponent();
    std::map<int, double> w;
    for (const auto& inst : ds.instances) {
        const double t = inst.timestamp;
        double wt = 1.0;
        switch (scheme.kind) {
            case SchemeKind::Unif: wt = 1.0; break;
            case SchemeKind::Time:
            case SchemeKind::Time2: wt = std::pow(t / T, a); break;
            case SchemeKind::Exp: wt = scheme.alpha * std::pow(1.0 - scheme.alpha, T - t); break;
            case SchemeKind::Simi:
            case SchemeKind::Simi2: wt = std::pow(jaccard(inst.stops, cur), a); break;
        }
        w[inst.timestamp] = wt;
    }
    return w;
}

namespace {

double weight_of(const std::map<int, double>& weights, int t) {
    auto it = weights.find(t);
    if (it == weights.end()) throw std::invalid_argument("no weight for timestamp " + std::to_string(t));
    return it->second;
}

StopIndex index_for(const HistoryDataset& ds, const std::vector<StopId>& extra = {}) {
    auto stops = ds.all_stops();
    stops.insert(stops.end(), extra.begin(), extra.end());
    return StopIndex(std::move(stops));
}

}  // namespace

Eigen::MatrixXd frequency_matrix(const HistoryDataset& ds, const std::map<int, double>& weights,
                                 const StopIndex& index) {
    const auto mu = static_cast<Eigen::Index>(index.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(mu, mu);
    for (const auto& inst : ds.instances) {
        const double w = weight_of(weights, inst.timestamp);
        if (inst.routing.tours.empty()) continue;
        for (const auto& [i, j] : chain_arcs(inst.routing))
            F(static_cast<Eigen::Index>(index.at(i)), static_cast<Eigen::Index>(index.at(j))) += w;
    }
    return F;
}

TransitionMatrix laplace_normalize(const Eigen::MatrixXd& freq, double lambda, const StopIndex& index) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
    const auto mu = freq.rows();
    if (freq.cols() != mu || static_cast<std::size_t>(mu) != index.size())
        throw std::invalid_argument("frequency matrix does not match the stop index");
    if (mu < 2) throw std::invalid_argument("a transition matrix needs at least one stop besides the depot");
    if ((freq.array() < 0.0).any()) throw std::invalid_argument("frequencies must be non-negative");

    TransitionMatrix P;
    P.index = index;
    P.lambda = lambda;
    P.probs = Eigen::MatrixXd::Zero(mu, mu);
    P.flagged_rows.assign(static_cast<std::size_t>(mu), false);
    for (Eigen::Index i = 0; i < mu; ++i) {
        double denom = 0.0;
        for (Eigen::Index k = 0; k < mu; ++k)
            if (k != i) denom += freq(i, k) + lambda;
        for (Eigen::Index j = 0; j < mu; ++j) {
            if (j == i) continue;
            P.probs(i, j) = denom > 0.0 ? (freq(i, j) + lambda) / denom : 1.0 / static_cast<double>(mu - 1);
        }
        if (denom <= 0.0) P.flagged_rows[static_cast<std::size_t>(i)] = true;
    }
    return P;
}

TransitionMatrix estimate_first_order(const HistoryDataset& ds, const WeighingScheme& scheme, double lambda,
                                      const std::vector<StopId>& current) {
    if (ds.empty()) throw std::invalid_argument("cannot estimate from an empty dataset");
    const auto w = compute_weights(ds, current, scheme);
    const auto index = index_for(ds);
    return laplace_normalize(frequency_matrix(ds, w, index), lambda, index);
}

SecondOrderTensor estimate_second_order(const HistoryDataset& ds, const WeighingScheme& scheme, double lambda,
                                        const std::vector<StopId>& current) {
    if (ds.empty()) throw std::invalid_argument("cannot estimate from an empty dataset");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
    const auto w = compute_weights(ds, current, scheme);
    const auto index = index_for(ds);
    const std::size_t mu = index.size();
    if (mu < 2) throw std::invalid_argument("a transition tensor needs at least one stop besides the depot");

    SecondOrderTensor out;
    out.index = index;
    out.lambda = lambda;
    out.probs.assign(mu * mu * mu, 0.0);
    Eigen::VectorXd depart = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mu));

    for (const auto& inst : ds.instances) {
        const double wt = weight_of(w, inst.timestamp);
        if (inst.routing.tours.empty()) continue;
        const auto chain = daisy_chain(inst.routing);
        for (std::size_t p = 1; p + 1 < chain.size(); ++p) {
            if (chain[p] == kDepot) continue;  // (s -> 0 -> s') bridges two tours
            out.cell(index.at(chain[p - 1]), index.at(chain[p]), index.at(chain[p + 1])) += wt;
        }
        for (std::size_t p = 0; p + 1 < chain.size(); ++p)
            if (chain[p] == kDepot) depart(static_cast<Eigen::Index>(index.at(chain[p + 1]))) += wt;
    }

    out.flagged_slices.assign(mu * mu, false);
    const double uniform = 1.0 / static_cast<double>(mu - 1);
    for (std::size_t i = 0; i < mu; ++i) {
        for (std::size_t j = 0; j < mu; ++j) {
            double denom = 0.0;
            for (std::size_t k = 0; k < mu; ++k)
                if (k != j) denom += out.cell(i, j, k) + lambda;
            for (std::size_t k = 0; k < mu; ++k) {
                double& c = out.cell(i, j, k);
                if (k == j) c = 0.0;
                else c = denom > 0.0 ? (c + lambda) / denom : uniform;
            }
            if (denom <= 0.0) out.flagged_slices[i * mu + j] = true;
        }
    }

    out.depot_row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mu));
    double denom = 0.0;
    for (std::size_t k = 1; k < mu; ++k) denom += depart(static_cast<Eigen::Index>(k)) + lambda;
    for (std::size_t k = 1; k < mu; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out.depot_row(kk) = denom > 0.0 ? (depart(kk) + lambda) / denom : uniform;
    }
    return out;
}

TransitionMatrix softmax_distance_matrix(const DistanceMatrix& d, double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw std::invalid_argument("theta must be > 0");
    const auto mu = d.dist.rows();
    if (mu < 2) throw std::invalid_argument("softmax needs at least one stop besides the depot");
    TransitionMatrix P;
    P.index = d.index;
    P.lambda = 0.0;
    P.probs = Eigen::MatrixXd::Zero(mu, mu);
    P.flagged_rows.assign(static_cast<std::size_t>(mu), false);
    for (Eigen::Index i = 0; i < mu; ++i) {
        double lo = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < mu; ++k)
            if (k != i) lo = std::min(lo, d.dist(i, k));
        double sum = 0.0;
        for (Eigen::Index k = 0; k < mu; ++k) {
            if (k == i) continue;
            P.probs(i, k) = std::exp(-theta * (d.dist(i, k) - lo));
            sum += P.probs(i, k);
        }
        P.probs.row(i) /= sum;
    }
    return P;
}

double solve_theta_star(const DistanceMatrix& d) {
    const auto mu = d.dist.rows();
    std::vector<double> row;
    for (Eigen::Index k = 1; k < mu; ++k) row.push_back(d.dist(0, k));
    if (row.size() < 2)
        throw std::invalid_argument("theta*: needs at least two stops (g(theta) = 1 only at theta = 0 otherwise)");
    if (std::any_of(row.begin(), row.end(), [](double x) { return !(x > 0.0); }))
        throw std::invalid_argument("theta*: every depot distance must be positive for g(theta) = 1 to have a root");

    auto g = [&](double theta) {
        double s = 0.0;
        for (double x : row) s += std::exp(-theta * x);
        return s;
    };
    double lo = 0.0;
    double hi = 1.0 / *std::min_element(row.begin(), row.end());
    while (g(hi) > 1.0) {
        lo = hi;
        hi *= 2.0;
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = g(mid);
        if (v > 1.0) lo = mid;
        else hi = mid;
        if (hi - lo <= 1e-16 * hi) break;
    }
    return mid;
}

TransitionMatrix mix_matrices(const TransitionMatrix& p, const TransitionMatrix& d, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    if (!(p.index == d.index) || p.probs.rows() != d.probs.rows())
        throw std::invalid_argument("mix_matrices: matrices are over different stop sets");
    TransitionMatrix out = p;
    out.probs = beta * p.probs + (1.0 - beta) * d.probs;
    return out;
}

TransitionMatrix extend_uniform(const TransitionMatrix& p, const std::vector<StopId>& stops) {
    std::vector<StopId> all = p.index.stops();
    all.insert(all.end(), stops.begin(), stops.end());
    StopIndex idx(std::move(all));
    if (idx.size() == p.index.size()) return p;

    const auto mu = static_cast<Eigen::Index>(idx.size());
    const double u = 1.0 / static_cast<double>(mu - 1);
    const auto added = static_cast<double>(idx.size() - p.index.size());
    TransitionMatrix out;
    out.index = idx;
    out.lambda = p.lambda;
    out.probs = Eigen::MatrixXd::Zero(mu, mu);
    out.flagged_rows.assign(idx.size(), false);
    for (Eigen::Index i = 0; i < mu; ++i) {
        const auto old_i = p.index.position(idx.stop(static_cast<std::size_t>(i)));
        if (!old_i) {
            for (Eigen::Index j = 0; j < mu; ++j)
                if (j != i) out.probs(i, j) = u;
            out.flagged_rows[static_cast<std::size_t>(i)] = true;
            continue;
        }
        const double scale = 1.0 + added * u;
        for (Eigen::Index j = 0; j < mu; ++j) {
            if (j == i) continue;
            const auto old_j = p.index.position(idx.stop(static_cast<std::size_t>(j)));
            const double v = old_j ? p.probs(static_cast<Eigen::Index>(*old_i), static_cast<Eigen::Index>(*old_j)) : u;
            out.probs(i, j) = v / scale;
        }
        out.flagged_rows[static_cast<std::size_t>(i)] = p.flagged_rows[*old_i];
    }
    return out;
}

SecondOrderTensor extend_uniform(const SecondOrderTensor& p, const std::vector<StopId>& stops) {
    std::vector<StopId> all = p.index.stops();
    all.insert(all.end(), stops.begin(), stops.end());
    StopIndex idx(std::move(all));
    if (idx.size() == p.index.size()) return p;

    const std::size_t mu = idx.size();
    const double u = 1.0 / static_cast<double>(mu - 1);
    const double scale = 1.0 + static_cast<double>(mu - p.index.size()) * u;
    std::vector<std::optional<std::size_t>> old(mu);
    for (std::size_t i = 0; i < mu; ++i) old[i] = p.index.position(idx.stop(i));

    SecondOrderTensor out;
    out.index = idx;
    out.lambda = p.lambda;
    out.probs.assign(mu * mu * mu, 0.0);
    out.flagged_slices.assign(mu * mu, false);
    for (std::size_t i = 0; i < mu; ++i) {
        for (std::size_t j = 0; j < mu; ++j) {
            const bool known = old[i] && old[j];
            for (std::size_t k = 0; k < mu; ++k) {
                if (k == j) continue;
                if (!known) out.cell(i, j, k) = u;
                else out.cell(i, j, k) = (old[k] ? p.cell(*old[i], *old[j], *old[k]) : u) / scale;
            }
            out.flagged_slices[i * mu + j] = known ? p.flagged_slices[*old[i] * p.size() + *old[j]] : true;
        }
    }
    out.depot_row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mu));
    for (std::size_t k = 1; k < mu; ++k)
        out.depot_row(static_cast<Eigen::Index>(k)) =
            (old[k] ? p.depot_row(static_cast<Eigen::Index>(*old[k])) : u) / scale;
    return out;
}

}  // namespace routepref
