#include <doctest.h>

#include <cmath>

#include "lvggm/composite.hpp"
#include "support.hpp"

using namespace lvggm;

namespace {

SolverOptions<double> tight()
{
    SolverOptions<double> o;
    o.tol_primal = o.tol_dual = 1e-10;
    o.max_iter = 50000;
    return o;
}

double norm_of(const MatrixXd& m, double gamma) { return composite_norm(m, gamma, tight()).value; }

double split_value(const MatrixXd& M, const MatrixXd& L, double gamma) { return gamma * l1_norm(MatrixXd(M + L)) + L.trace(); }

}  // namespace

TEST_CASE("scalar values")
{
    CHECK(norm_of(MatrixXd::Constant(1, 1, 2.0), 0.5) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(norm_of(MatrixXd::Constant(1, 1, 2.0), 3.0) == doctest::Approx(6.0).epsilon(1e-8));
    CHECK(norm_of(MatrixXd::Constant(1, 1, -2.0), 0.5) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(norm_of(MatrixXd::Constant(1, 1, -2.0), 3.0) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("positive diagonal input keeps L = 0")
{
    VectorXd d(3);
    d << 1.0, 2.0, 0.5;
    const MatrixXd M = d.asDiagonal();
    const auto r = composite_norm(M, 0.7, tight());
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(0.7 * 3.5).epsilon(1e-8));
    CHECK(r.L.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK_FALSE(r.not_pd_warning);
}

TEST_CASE("3x3 value is no larger than natural candidate splits")
{
    const auto m = marginal_precision<double>(testgen::worked_joint(), 1);
    for (const double gamma : {0.2, 0.5, 1.0, 2.0}) {
        const auto r = composite_norm(m.K_O, gamma, tight());
        CHECK(r.value <= split_value(m.K_O, MatrixXd::Zero(2, 2), gamma) + 1e-8);
        CHECK(r.value <= split_value(m.K_O, m.L_star, gamma) + 1e-8);
        CHECK((r.S - r.L - m.K_O).norm() <= 1e-12);
        CHECK(min_eigenvalue(r.L) >= -1e-12);
    }
}

TEST_CASE("optimality against random feasible reparameterizations")
{
    Rng rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(5));
        const MatrixXd M = testgen::symmetric(rng, p);
        const double gamma = 0.1 + rng.uniform();
        const auto r = composite_norm(M, gamma, tight());
        REQUIRE(r.converged);
        for (int k = 0; k < 1000; ++k) {
            const MatrixXd cand = psd_projection(MatrixXd(r.L + testgen::symmetric(rng, p, 0.05)));
            CHECK(r.value <= split_value(M, cand, gamma) + 1e-7);
        }
    }
}

TEST_CASE("sign symmetry holds for small gamma and fails in general")
{
    Rng rng(73);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(5));
        const MatrixXd M = testgen::symmetric(rng, p);
        const double gamma = rng.uniform() / static_cast<double>(p);
        CHECK(norm_of(M, gamma) == doctest::Approx(norm_of(MatrixXd(-M), gamma)).epsilon(1e-7));
        CHECK(norm_of(M, gamma) == doctest::Approx(gamma * l1_norm(M)).epsilon(1e-7));
    }
    const MatrixXd I = MatrixXd::Identity(3, 3);
    CHECK(norm_of(I, 2.0) == doctest::Approx(6.0).epsilon(1e-8));
    CHECK(norm_of(MatrixXd(-I), 2.0) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("triangle inequality, positive homogeneity and monotonicity in gamma")
{
    Rng rng(79);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(4));
        const MatrixXd A = testgen::symmetric(rng, p), B = testgen::symmetric(rng, p);
        const double gamma = 0.1 + 1.5 * rng.uniform();
        CHECK(norm_of(MatrixXd(A + B), gamma) <= norm_of(A, gamma) + norm_of(B, gamma) + 1e-7);
        const double c = 0.1 + 5.0 * rng.uniform();
        CHECK(norm_of(MatrixXd(c * A), gamma) == doctest::Approx(c * norm_of(A, gamma)).epsilon(1e-7));
        CHECK(norm_of(A, gamma) <= norm_of(A, 1.5 * gamma) + 1e-8);
    }
}

TEST_CASE("warnings and argument errors")
{
    CHECK(composite_norm(MatrixXd(-MatrixXd::Identity(2, 2)), 1.0).not_pd_warning);
    CHECK_THROWS_AS(composite_norm(MatrixXd(MatrixXd::Identity(2, 2)), 0.0), ArgumentError);
    CHECK_THROWS_AS(composite_norm(MatrixXd(MatrixXd::Zero(2, 3)), 1.0), ArgumentError);
}

TEST_CASE("composite route on the scalar instance")
{
    const auto sigma = SampleCovariance<double>::population(MatrixXd::Constant(1, 1, 1.0));
    const auto fit = fit_via_composite(sigma, RegularizationParams<double>{0.5, 2.0}, tight());
    CHECK(fit.M_hat(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(fit.decomposition.S(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(fit.decomposition.L(0, 0)) <= 1e-8);
    CHECK(fit.total_objective == doctest::Approx(fit.report.objective).epsilon(1e-8));
    CHECK_THROWS_AS(fit_via_composite(sigma, RegularizationParams<double>{0.0, 1.0}), ArgumentError);
}

TEST_CASE("composite route agrees with the direct solver")
{
    Rng rng(83);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(7));
        const auto sigma = testgen::random_covariance(rng, p, 5 * p);
        const RegularizationParams<double> reg{0.05 + 0.2 * rng.uniform(), 0.2 + rng.uniform()};
        const auto fit = fit_via_composite(sigma, reg, tight());
        REQUIRE(fit.report.converged);
        CHECK(std::abs(fit.total_objective - fit.report.objective) <= 1e-5 * std::abs(fit.report.objective));
        CHECK((fit.decomposition.S - fit.decomposition.L - fit.M_hat).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(fit.decomposition.value <=
              reg.gamma * l1_norm(fit.report.decomp.S) + fit.report.decomp.L.trace() + 1e-7);
    }
}
