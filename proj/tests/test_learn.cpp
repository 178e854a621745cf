#include <doctest.h>

#include <cmath>
#include <random>

#include "routepref/error.hpp"
#include "routepref/learn.hpp"
#include "support.hpp"

using namespace routepref;
using routepref::testing::make_dataset;

namespace {

const std::vector<SchemeKind> kAllKinds{SchemeKind::Unif, SchemeKind::Time, SchemeKind::Time2,
                                        SchemeKind::Simi, SchemeKind::Simi2, SchemeKind::Exp};

HistoryDataset random_dataset(std::mt19937_64& rng, int instances, int universe) {
    std::vector<std::vector<Tour>> routings;
    for (int t = 0; t < instances; ++t) {
        std::vector<StopId> stops;
        for (int s = 1; s <= universe; ++s)
            if (rng() % 3 != 0) stops.push_back(s);
        if (stops.empty()) stops.push_back(1 + static_cast<StopId>(rng() % universe));
        std::shuffle(stops.begin(), stops.end(), rng);
        std::vector<Tour> tours;
        for (StopId s : stops) {
            if (tours.empty() || rng() % 4 == 0) tours.emplace_back();
            tours.back().push_back(s);
        }
        routings.push_back(tours);
    }
    return make_dataset(routings);
}

void check_row_stochastic(const TransitionMatrix& p, bool positive) {
    for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
        CHECK(std::abs(p.probs.row(i).sum() - 1.0) <= 1e-12);
        CHECK(p.probs(i, i) == 0.0);
        for (Eigen::Index j = 0; j < p.probs.cols(); ++j) {
            CHECK(p.probs(i, j) >= 0.0);
            if (positive && i != j) CHECK(p.probs(i, j) > 0.0);
        }
    }
}

}  // namespace

TEST_CASE("compute_weights per scheme") {
    auto ds = make_dataset({{{1, 2, 3}}, {{1, 2}}});
    const std::vector<StopId> cur{1, 2, 3};

    for (auto [t, w] : compute_weights(ds, cur, WeighingScheme{SchemeKind::Unif})) CHECK(w == 1.0);

    auto exp = compute_weights(ds, cur, WeighingScheme{SchemeKind::Exp, 0.7});
    CHECK(exp.at(1) == doctest::Approx(0.063).epsilon(1e-12));
    CHECK(exp.at(2) == doctest::Approx(0.21).epsilon(1e-12));

    auto time = compute_weights(ds, cur, WeighingScheme{SchemeKind::Time});
    CHECK(time.at(1) == doctest::Approx(1.0 / 3.0));
    CHECK(time.at(2) == doctest::Approx(2.0 / 3.0));
    auto time2 = compute_weights(ds, cur, WeighingScheme{SchemeKind::Time2});
    CHECK(time2.at(2) == doctest::Approx(4.0 / 9.0));

    auto simi = compute_weights(ds, cur, WeighingScheme{SchemeKind::Simi});
    CHECK(simi.at(1) == 1.0);
    CHECK(simi.at(2) == doctest::Approx(2.0 / 3.0));
    auto simi2 = compute_weights(ds, cur, WeighingScheme{SchemeKind::Simi2});
    CHECK(simi2.at(2) == doctest::Approx(4.0 / 9.0));

    auto jac = make_dataset({{{1, 2, 3}}});
    CHECK(compute_weights(jac, {2, 3, 4}, WeighingScheme{SchemeKind::Simi}).at(1) == doctest::Approx(0.5));
    CHECK_THROWS(compute_weights(jac, {}, WeighingScheme{SchemeKind::Simi}));
}

TEST_CASE("scheme domain checks") {
    CHECK_THROWS(WeighingScheme{SchemeKind::Exp, 0.0}.validate());
    CHECK_THROWS(WeighingScheme{SchemeKind::Exp, 1.0}.validate());
    CHECK_THROWS(WeighingScheme{SchemeKind::Time, 0.7, -1.0}.validate());
    CHECK(WeighingScheme::parse("time2").kind == SchemeKind::Time2);
    CHECK(WeighingScheme::parse("EXP").kind == SchemeKind::Exp);
    CHECK_THROWS(WeighingScheme::parse("dist"));
}

TEST_CASE("EXP weight mass on the most recent instances") {
    std::vector<std::vector<Tour>> rs(20, std::vector<Tour>{{1, 2}});
    auto ds = make_dataset(rs);
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        auto w = compute_weights(ds, {1, 2}, WeighingScheme{SchemeKind::Exp, alpha});
        double total = 0;
        for (auto& [t, v] : w) total += v;
        for (int k = 1; k <= 20; ++k) {
            double recent = 0;
            for (int t = 20 - k + 1; t <= 20; ++t) recent += w.at(t);
            CHECK(recent / total >= 1.0 - std::pow(1.0 - alpha, k) - 1e-12);
        }
    }
}

TEST_CASE("frequency_matrix sums weighted adjacency") {
    auto ds = make_dataset({{{1, 2}}, {{2, 1}}});
    StopIndex idx({0, 1, 2});
    auto F = frequency_matrix(ds, {{1, 1.0}, {2, 3.0}}, idx);
    Eigen::MatrixXd expect(3, 3);
    expect << 0, 1, 3,
              3, 0, 1,
              1, 3, 0;
    CHECK(F == expect);

    auto twice = make_dataset({{{1, 2}}, {{1, 2}}});
    auto F2 = frequency_matrix(twice, {{1, 1.0}, {2, 1.0}}, idx);
    CHECK(F2(0, 1) == 2.0);
    CHECK(F2(1, 2) == 2.0);
    CHECK(F2(2, 0) == 2.0);
    CHECK(F2(1, 0) == 0.0);
}

TEST_CASE("laplace_normalize rows") {
    StopIndex idx({0, 1, 2, 3});
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(4, 4);
    F(0, 1) = 2; F(0, 3) = 1;
    F(1, 2) = 1;
    auto p = laplace_normalize(F, 1.0, idx);
    CHECK(p.probs(0, 1) == doctest::Approx(3.0 / 6.0));
    CHECK(p.probs(0, 2) == doctest::Approx(1.0 / 6.0));
    CHECK(p.probs(0, 3) == doctest::Approx(2.0 / 6.0));
    CHECK(p.probs(3, 0) == doctest::Approx(1.0 / 3.0));

    auto p0 = laplace_normalize(F, 0.0, idx);
    CHECK(p0.probs(1, 2) == 1.0);
    CHECK(p0.probs(1, 0) == 0.0);
    CHECK_FALSE(p0.flagged_rows[1]);
    CHECK(p0.flagged_rows[2]);
    CHECK(p0.probs(2, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("estimate_first_order examples") {
    auto one = make_dataset({{{1, 2}}});
    auto p = estimate_first_order(one, WeighingScheme{}, 0.0);
    CHECK(p.at(0, 1) == 1.0);
    CHECK(p.at(1, 2) == 1.0);
    CHECK(p.at(2, 0) == 1.0);

    auto ps = estimate_first_order(one, WeighingScheme{}, 1.0);
    CHECK(ps.at(0, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(ps.at(0, 2) == doctest::Approx(1.0 / 3.0));

    auto both = make_dataset({{{1, 2}}, {{2, 1}}});
    auto pb = estimate_first_order(both, WeighingScheme{}, 0.0);
    CHECK(pb.at(0, 1) == doctest::Approx(0.5));
    CHECK(pb.at(0, 2) == doctest::Approx(0.5));
}

TEST_CASE("estimate_second_order examples") {
    auto one = make_dataset({{{1, 2, 3}}});
    auto p = estimate_second_order(one, WeighingScheme{}, 0.0);
    CHECK(p.depot_row(p.index.at(1)) == 1.0);
    CHECK(p.at(0, 1, 2) == 1.0);
    CHECK(p.at(1, 2, 3) == 1.0);
    CHECK(p.at(2, 3, 0) == 1.0);

    auto bridged = make_dataset({{{1, 2}, {3, 4}}});
    auto pb = estimate_second_order(bridged, WeighingScheme{}, 0.0);
    // (2, 0, 3) is a tour boundary and must not be counted: the (2, 0) slice stays unseen.
    CHECK(pb.flagged_slices[pb.index.at(2) * pb.size() + pb.index.at(0)]);
    CHECK(pb.at(1, 2, 0) == 1.0);

    auto fork = make_dataset({{{1, 2, 3}}, {{1, 2, 4}}});
    auto pf = estimate_second_order(fork, WeighingScheme{}, 0.0);
    CHECK(pf.at(1, 2, 3) == doctest::Approx(0.5));
    CHECK(pf.at(1, 2, 4) == doctest::Approx(0.5));
}

TEST_CASE("row stochasticity over schemes, lambdas and orders") {
    std::mt19937_64 rng(11);
    for (int d = 0; d < 10; ++d) {
        auto ds = random_dataset(rng, 6, 7);
        const auto cur = ds.instances.back().stops;
        for (SchemeKind kind : kAllKinds) {
            for (double lambda : {0.0, 0.5, 1.0}) {
                WeighingScheme sch{kind};
                check_row_stochastic(estimate_first_order(ds, sch, lambda, cur), lambda > 0);
                auto t = estimate_second_order(ds, sch, lambda, cur);
                const std::size_t mu = t.size();
                CHECK(std::abs(t.depot_row.sum() - 1.0) <= 1e-12);
                for (std::size_t i = 0; i < mu; ++i)
                    for (std::size_t j = 0; j < mu; ++j) {
                        if (i == j) continue;
                        double s = 0;
                        bool pos = true;
                        for (std::size_t k = 0; k < mu; ++k) {
                            s += t.cell(i, j, k);
                            if (k != j && t.cell(i, j, k) <= 0) pos = false;
                        }
                        CHECK(std::abs(s - 1.0) <= 1e-12);
                        if (lambda > 0) CHECK(pos);
                    }
            }
        }
    }
}

TEST_CASE("single-instance datasets give identical matrices for all schemes") {
    // Weights cancel only when nothing else enters the rows: lambda = 0 and a shared current set.
    std::mt19937_64 rng(3);
    for (int d = 0; d < 10; ++d) {
        auto ds = random_dataset(rng, 1, 6);
        const auto cur = ds.instances[0].stops;
        auto ref = estimate_first_order(ds, WeighingScheme{}, 0.0, cur);
        for (SchemeKind kind : kAllKinds) {
            auto p = estimate_first_order(ds, WeighingScheme{kind}, 0.0, cur);
            CHECK((p.probs - ref.probs).cwiseAbs().maxCoeff() <= 1e-15);
        }
    }
}

TEST_CASE("softmax distance probabilities") {
    DistanceMatrix eq{StopIndex({0, 1, 2, 3}), Eigen::MatrixXd::Constant(4, 4, 5.0)};
    eq.dist.diagonal().setZero();
    auto u = softmax_distance_matrix(eq);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(u.probs(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 3.0));

    DistanceMatrix d{StopIndex({0, 1, 2}), Eigen::MatrixXd::Zero(3, 3)};
    d.dist(0, 2) = std::log(2.0);
    d.dist(1, 0) = 1; d.dist(1, 2) = 1; d.dist(2, 0) = 1; d.dist(2, 1) = 1;
    auto s = softmax_distance_matrix(d, 1.0);
    CHECK(s.probs(0, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(s.probs(0, 2) == doctest::Approx(1.0 / 3.0));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.5, 30.0);
    DistanceMatrix r{StopIndex({0, 1, 2, 3, 4}), Eigen::MatrixXd::Zero(5, 5)};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if (i != j) r.dist(i, j) = U(rng);
    DistanceMatrix r3 = r;
    r3.dist *= 3.0;
    auto a = softmax_distance_matrix(r, 0.4);
    auto b = softmax_distance_matrix(r3, 0.4 / 3.0);
    CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() <= 1e-12);
    check_row_stochastic(a, true);

    DistanceMatrix far = r;
    far.dist *= 1e4;  // would underflow without the row-min shift
    check_row_stochastic(softmax_distance_matrix(far), false);
}

TEST_CASE("theta star") {
    DistanceMatrix d{StopIndex({0, 1, 2}), Eigen::MatrixXd::Zero(3, 3)};
    d.dist(0, 1) = d.dist(0, 2) = std::log(2.0);
    CHECK(solve_theta_star(d) == doctest::Approx(1.0).epsilon(1e-9));

    d.dist(0, 1) = 1.0;
    d.dist(0, 2) = 2.0;
    // Independent bisection on e^-t + e^-2t = 1; closed form t = -log((sqrt(5) - 1) / 2).
    const double closed = -std::log((std::sqrt(5.0) - 1.0) / 2.0);
    const double th = solve_theta_star(d);
    CHECK(std::abs(th - closed) <= 1e-9);
    CHECK(std::abs(std::exp(-th) + std::exp(-2 * th) - 1.0) <= 1e-10);

    DistanceMatrix d2 = d;
    d2.dist *= 2.0;
    CHECK(solve_theta_star(d2) == doctest::Approx(th / 2.0).epsilon(1e-9));

    DistanceMatrix zero{StopIndex({0, 1, 2}), Eigen::MatrixXd::Zero(3, 3)};
    CHECK_THROWS(solve_theta_star(zero));
}

TEST_CASE("mix_matrices endpoints, example and convexity") {
    StopIndex idx({0, 1, 2});
    TransitionMatrix p{idx, Eigen::MatrixXd::Zero(3, 3), 0.0, {false, false, false}};
    TransitionMatrix d = p;
    p.probs << 0, 1, 0,
               0.5, 0, 0.5,
               1, 0, 0;
    d.probs << 0, 0.2, 0.8,
               0.1, 0, 0.9,
               0.3, 0.7, 0;
    CHECK(mix_matrices(p, d, 1.0).probs == p.probs);
    CHECK(mix_matrices(p, d, 0.0).probs == d.probs);
    auto h = mix_matrices(p, d, 0.5);
    CHECK(h.probs(0, 1) == doctest::Approx(0.6));
    CHECK(h.probs(0, 2) == doctest::Approx(0.4));
    for (double beta : {0.1, 0.33, 0.9}) {
        auto m = mix_matrices(p, d, beta);
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(m.probs.row(i).sum() - 1.0) <= 1e-12);
            for (int j = 0; j < 3; ++j) {
                CHECK(m.probs(i, j) >= std::min(p.probs(i, j), d.probs(i, j)) - 1e-15);
                CHECK(m.probs(i, j) <= std::max(p.probs(i, j), d.probs(i, j)) + 1e-15);
            }
        }
    }
    TransitionMatrix small{StopIndex({0, 1}), Eigen::MatrixXd::Zero(2, 2), 0.0, {false, false}};
    CHECK_THROWS(mix_matrices(p, small, 0.5));
}

TEST_CASE("extend_uniform adds unseen stops") {
    auto ds = make_dataset({{{1, 2}}});
    auto p = estimate_first_order(ds, WeighingScheme{}, 0.0);
    auto e = extend_uniform(p, {1, 2, 3});
    CHECK(e.size() == 4);
    CHECK(e.flagged_rows[e.index.at(3)]);
    CHECK(e.at(3, 0) == doctest::Approx(1.0 / 3.0));
    // Old row 0 -> 1 had mass 1; the new column gets 1/3 before renormalisation.
    CHECK(e.at(0, 3) == doctest::Approx((1.0 / 3.0) / (4.0 / 3.0)));
    CHECK(e.at(0, 1) == doctest::Approx(1.0 / (4.0 / 3.0)));
    check_row_stochastic(e, false);

    auto t = estimate_second_order(ds, WeighingScheme{}, 0.0);
    auto te = extend_uniform(t, {3});
    CHECK(te.size() == 4);
    CHECK(std::abs(te.depot_row.sum() - 1.0) <= 1e-12);
}

TEST_CASE("distance matrix validation") {
    DistanceMatrix d{StopIndex({0, 1}), Eigen::MatrixXd::Zero(2, 2)};
    d.dist(0, 1) = -1;
    CHECK_THROWS_AS(d.validate(), DataError);
    d.dist(0, 1) = 1;
    d.dist(1, 1) = 2;
    CHECK_THROWS_AS(d.validate(), DataError);
    d.dist(1, 1) = 0;
    CHECK_NOTHROW(d.validate());
    CHECK_THROWS_AS(d.restricted(StopIndex({0, 1, 5})), DataError);
}
