#include <doctest.h>

#include <cmath>

#include "lvggm/diagnostics.hpp"
#include "support.hpp"

using namespace lvggm;

namespace {

FitReport<double> report_with(const MatrixXd& S, const MatrixXd& L)
{
    FitReport<double> r;
    r.decomp = {S, L};
    return r;
}

SyntheticModel<double> model(std::uint64_t seed, Eigen::Index p = 12, Eigen::Index h = 2)
{
    GeneratorParams g;
    g.p = p;
    g.h = h;
    g.max_degree = 3;
    g.edge_strength = 0.7;
    g.latent_strength = 3.0;
    g.seed = seed;
    return generate_latent_model<double>(g);
}

}  // namespace

TEST_CASE("recovery metrics examples")
{
    const auto m = model(1);
    const auto truth = m.truth();
    const double ztol = default_zero_tol(m.S_star);

    const auto exact = recovery_metrics(truth, m, ztol, 1e-6);
    CHECK(exact.sign_consistent);
    CHECK(exact.rank_correct);
    CHECK(exact.rank_est == 2);
    CHECK(exact.loss_linf == 0.0);
    CHECK(exact.loss_spectral == 0.0);
    CHECK(exact.loss_frob_total == 0.0);

    REQUIRE_FALSE(m.graph.empty());
    auto dropped = truth;
    const auto [i, j] = m.graph.front();
    dropped.S(i, j) = dropped.S(j, i) = 0.0;
    const auto miss = recovery_metrics(dropped, m, ztol, 1e-6);
    CHECK(miss.false_negatives == 1);
    CHECK(miss.false_positives == 0);
    CHECK_FALSE(miss.sign_consistent);

    auto flipped = truth;
    flipped.S(i, j) = flipped.S(j, i) = -truth.S(i, j);
    const auto sign = recovery_metrics(flipped, m, ztol, 1e-6);
    CHECK(sign.sign_errors == 1);
    CHECK_FALSE(sign.sign_consistent);

    auto jitter = truth;
    jitter.L += 1e-12 * MatrixXd::Identity(12, 12);
    CHECK(recovery_metrics(jitter, m, ztol, 1e-6).rank_est == 2);

    const PrecisionDecomposition<double> small{MatrixXd::Identity(3, 3), MatrixXd::Zero(3, 3)};
    CHECK_THROWS_AS(recovery_metrics(small, truth, ztol, 1e-6), ArgumentError);
}

TEST_CASE("sign consistency implies zero support errors")
{
    Rng rng(101);
    const auto m = model(2);
    for (int trial = 0; trial < 50; ++trial) {
        auto est = m.truth();
        est.S += testgen::symmetric(rng, 12, 0.05 * rng.uniform());
        const auto r = recovery_metrics(est, m, 0.02, 1e-6);
        if (r.sign_consistent) {
            CHECK(r.false_positives == 0);
            CHECK(r.false_negatives == 0);
        }
    }
}

TEST_CASE("recovery metrics are permutation equivariant")
{
    Rng rng(103);
    const auto m = model(3);
    for (int trial = 0; trial < 10; ++trial) {
        PrecisionDecomposition<double> est{MatrixXd(m.S_star + testgen::symmetric(rng, 12, 0.1)),
                                           MatrixXd(m.L_star + testgen::psd_low_rank(rng, 12, 1, 0.5))};
        const auto perm = testgen::permutation(rng, 12);
        const PrecisionDecomposition<double> pe{testgen::permute(est.S, perm), testgen::permute(est.L, perm)};
        const PrecisionDecomposition<double> pt{testgen::permute(m.S_star, perm), testgen::permute(m.L_star, perm)};
        const auto a = recovery_metrics(est, m.truth(), 0.05, 1e-6);
        const auto b = recovery_metrics(pe, pt, 0.05, 1e-6);
        CHECK(a.false_positives == b.false_positives);
        CHECK(a.false_negatives == b.false_negatives);
        CHECK(a.sign_errors == b.sign_errors);
        CHECK(a.rank_est == b.rank_est);
        CHECK(a.loss_linf == doctest::Approx(b.loss_linf));
        CHECK(a.loss_spectral == doctest::Approx(b.loss_spectral));
        CHECK(a.loss_frob_total == doctest::Approx(b.loss_frob_total));
    }
}

TEST_CASE("signal levels")
{
    const auto w = marginal_precision<double>(testgen::worked_joint(), 1);
    const auto worked = signal_levels(PrecisionDecomposition<double>{w.S_star, w.L_star});
    CHECK(std::isinf(worked.theta));
    CHECK(worked.sigma_min == doctest::Approx(1.0));
    REQUIRE(worked.notes.size() == 1);

    const auto none = signal_levels(PrecisionDecomposition<double>{MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)});
    CHECK(none.sigma_min == 0.0);
    CHECK(none.notes.back().find("no low-rank part") != std::string::npos);

    MatrixXd S = 5 * MatrixXd::Identity(3, 3);
    S(0, 1) = S(1, 0) = -0.3;
    S(1, 2) = S(2, 1) = 2.0;
    CHECK(signal_levels(PrecisionDecomposition<double>{S, MatrixXd::Zero(3, 3)}).theta == doctest::Approx(0.3));

    const auto m = model(4);
    const auto levels = signal_levels(m);
    CHECK(levels.theta > 0);
    CHECK(levels.sigma_min > 0);
}

TEST_CASE("identifiability surrogates")
{
    const Eigen::Index p = 5;
    MatrixXd e1 = MatrixXd::Zero(p, p);
    e1(0, 0) = 2.0;
    CHECK(identifiability_report(PrecisionDecomposition<double>{MatrixXd::Identity(p, p), e1}).coherence ==
          doctest::Approx(1.0));

    const MatrixXd ones = MatrixXd::Ones(p, p) / double(p);
    const auto flat = identifiability_report(PrecisionDecomposition<double>{MatrixXd::Identity(p, p), ones});
    CHECK(flat.coherence == doctest::Approx(1.0 / std::sqrt(double(p))));
    CHECK(flat.subspace_dim == 1);

    const auto empty = identifiability_report(PrecisionDecomposition<double>{MatrixXd::Identity(p, p), MatrixXd::Zero(p, p)});
    CHECK(empty.coherence == 0.0);
    CHECK_FALSE(empty.notes.empty());

    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto m = model(seed, 6 + static_cast<Eigen::Index>(seed), 1 + static_cast<Eigen::Index>(seed % 3));
        const auto r = identifiability_report(m);
        const double k = double(r.subspace_dim);
        CHECK(r.subspace_dim == m.h());
        CHECK(r.coherence >= std::sqrt(k / double(m.p())) - 1e-12);
        CHECK(r.coherence <= 1.0 + 1e-12);
        CHECK(r.max_degree <= 3);
    }
}

TEST_CASE("kkt residuals at closed-form optima")
{
    const auto scalar = SampleCovariance<double>::population(MatrixXd::Constant(1, 1, 1.0));
    const PrecisionDecomposition<double> s_opt{MatrixXd::Constant(1, 1, 0.5), MatrixXd::Zero(1, 1)};
    const auto k1 = kkt_report(scalar, s_opt, RegularizationParams<double>{0.5, 2.0});
    CHECK(k1.dual_linf <= 1e-15);
    CHECK(k1.support_slack <= 1e-15);
    CHECK(k1.max() <= 1e-12);

    const auto ident = SampleCovariance<double>::population(MatrixXd::Identity(4, 4));
    const PrecisionDecomposition<double> d_opt{MatrixXd(0.5 * MatrixXd::Identity(4, 4)), MatrixXd::Zero(4, 4)};
    const auto k2 = kkt_report(ident, d_opt, RegularizationParams<double>{0.5, 2.0});
    CHECK(k2.dual_linf <= 1e-8);
    CHECK(k2.support_slack <= 1e-8);
    CHECK(k2.dual_spec <= 1e-8);
    CHECK(k2.lowrank_slack <= 1e-8);

    const PrecisionDecomposition<double> bad{MatrixXd::Identity(2, 2), MatrixXd(2 * MatrixXd::Identity(2, 2))};
    CHECK_THROWS_AS(kkt_report(SampleCovariance<double>::population(MatrixXd::Identity(2, 2)), bad,
                               RegularizationParams<double>{0.5, 1.0}),
                    DomainError);
}

TEST_CASE("kkt residuals flag points away from the optimum")
{
    Rng rng(107);
    SolverOptions<double> o;
    o.tol_primal = o.tol_dual = 1e-9;
    o.max_iter = 20000;
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng.below(5));
        const auto sigma = testgen::random_covariance(rng, p, 5 * p);
        const RegularizationParams<double> reg{0.1 + 0.2 * rng.uniform(), 0.3 + rng.uniform()};
        const auto fit = fit_mle(sigma, reg, o);
        REQUIRE(fit.converged);
        PrecisionDecomposition<double> moved = fit.decomp;
        moved.S += testgen::symmetric(rng, p, 0.3);
        if (check_feasibility(moved) != Feasibility::feasible) continue;
        const double dist = (moved.S - fit.decomp.S).norm();
        if (dist < 0.1) continue;
        CHECK(kkt_report(sigma, moved, reg).max() > 0.01);
        ++checked;
    }
    CHECK(checked >= 5);
}

TEST_CASE("kkt residuals shrink as the solver tolerance tightens")
{
    Rng rng(109);
    for (int trial = 0; trial < 8; ++trial) {
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng.below(6));
        const auto sigma = testgen::random_covariance(rng, p, 4 * p);
        const RegularizationParams<double> reg{0.1 + 0.2 * rng.uniform(), 0.3 + rng.uniform()};
        SolverOptions<double> loose, strict;
        loose.tol_primal = loose.tol_dual = 1e-5;
        strict.tol_primal = strict.tol_dual = 1e-8;
        loose.max_iter = strict.max_iter = 20000;
        const auto a = fit_mle(sigma, reg, loose);
        const auto b = fit_mle(sigma, reg, strict);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(kkt_report(sigma, b.decomp, reg).max() <= kkt_report(sigma, a.decomp, reg).max());
    }
}

TEST_CASE("gamma stability intervals")
{
    const MatrixXd S = MatrixXd::Identity(3, 3);
    MatrixXd S_edge = S;
    S_edge(0, 1) = S_edge(1, 0) = 0.4;
    const MatrixXd L = MatrixXd::Zero(3, 3);

    std::vector<std::pair<double, FitReport<double>>> same;
    for (const double g : {0.1, 0.2, 0.4, 0.8}) same.emplace_back(g, report_with(S, L));
    const auto one = gamma_stability<double>(same, std::nullopt);
    REQUIRE(one.size() == 1);
    CHECK(one[0].gamma_lo == 0.1);
    CHECK(one[0].gamma_hi == 0.8);
    CHECK(one[0].ratio() == doctest::Approx(8.0));
    CHECK_FALSE(one[0].exact_recovery.has_value());

    std::vector<std::pair<double, FitReport<double>>> split;
    for (const double g : {0.1, 0.2}) split.emplace_back(g, report_with(S_edge, L));
    for (const double g : {0.4, 0.8}) split.emplace_back(g, report_with(S, L));
    const auto two = gamma_stability<double>(split, PrecisionDecomposition<double>{S_edge, L});
    REQUIRE(two.size() == 2);
    CHECK(two[0].gamma_hi == 0.2);
    CHECK(two[1].gamma_lo == 0.4);
    CHECK(two[0].support_size == 1);
    CHECK(two[1].support_size == 0);
    CHECK(*two[0].exact_recovery);
    CHECK_FALSE(*two[1].exact_recovery);

    std::swap(split[1], split[2]);
    CHECK_THROWS_AS(gamma_stability<double>(split, std::nullopt), ArgumentError);
}
