#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lvggm/diagnostics.hpp"
#include "lvggm/synth.hpp"
#include "support.hpp"

using namespace lvggm;

namespace {

GeneratorParams params(Eigen::Index p, Eigen::Index h, Eigen::Index deg, double edge, double latent, std::uint64_t seed)
{
    GeneratorParams g;
    g.p = p;
    g.h = h;
    g.max_degree = deg;
    g.edge_strength = edge;
    g.latent_strength = latent;
    g.seed = seed;
    return g;
}

std::set<std::pair<Eigen::Index, Eigen::Index>> off_support(const MatrixXd& S)
{
    std::set<std::pair<Eigen::Index, Eigen::Index>> out;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < S.cols(); ++j) {
            if (S(i, j) != 0.0) out.emplace(i, j);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("no latents: L* = 0 and K_O = S* = K_joint")
{
    const auto m = generate_latent_model<double>(params(6, 0, 2, 0.4, 1.0, 3));
    CHECK(m.L_star.isZero(0));
    CHECK(m.K_O == m.S_star);
    CHECK(m.S_star == m.K_joint);
}

TEST_CASE("p = 2, h = 1 reproduces the 3x3 example structure")
{
    GeneratorParams g = params(2, 1, 0, 0.0, 1.0, 11);
    g.latent_fanout = 1.0;
    const auto m = generate_latent_model<double>(g);
    const double w = 1.0 / std::sqrt(2.0);
    const double d_obs = 1.0 + w + 0.1, d_lat = 1.0 + 2.0 * w + 0.1;
    CHECK(m.K_joint(0, 0) == doctest::Approx(d_obs));
    CHECK(m.K_joint(2, 2) == doctest::Approx(d_lat));
    CHECK(std::abs(m.K_joint(0, 2)) == doctest::Approx(w));
    CHECK(m.K_joint(0, 1) == 0.0);
    CHECK((m.S_star - d_obs * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-15);
    // L* = b bᵀ / d_lat with |b_i| = w: rank one, entries ±0.5/d_lat.
    CHECK(m.L_star.cwiseAbs().maxCoeff() == doctest::Approx(0.5 / d_lat));
    CHECK(m.L_star.cwiseAbs().minCoeff() == doctest::Approx(0.5 / d_lat));
    CHECK(numerical_rank(m.L_star, 1e-9) == 1);
    CHECK(m.graph.empty());
}

TEST_CASE("p = 40, h = 2 model has rank 2 and bounded rows")
{
    GeneratorParams g = params(40, 2, 4, 1.0, 10.0, 1);
    const auto m = generate_latent_model<double>(g);
    CHECK(numerical_rank(m.L_star, 1e-9) == 2);
    for (Eigen::Index i = 0; i < 40; ++i) CHECK((m.S_star.row(i).array() != 0.0).count() <= 5);
    CHECK(m.graph.size() <= 40u);
    CHECK_FALSE(m.graph.empty());
    CHECK(m.rng == std::string("mt19937_64"));
}

TEST_CASE("generated models satisfy the structural invariants")
{
    Rng meta(91);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(meta.below(30));
        const Eigen::Index h = static_cast<Eigen::Index>(meta.below(4));
        GeneratorParams g = params(p, h, static_cast<Eigen::Index>(meta.below(static_cast<std::uint64_t>(std::min<Eigen::Index>(p, 6)))),
                                   2.0 * meta.uniform(), 10.0 * meta.uniform(), meta.next());
        g.latent_fanout = 0.05 + 0.95 * meta.uniform();
        const auto m = generate_latent_model<double>(g);

        CHECK(min_eigenvalue(m.K_joint) >= 0.1);
        const auto marg = marginal_precision<double>(m.K_joint, h);
        CHECK((marg.S_star - m.S_star).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((marg.L_star - m.L_star).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((marg.K_O - m.K_O).cwiseAbs().maxCoeff() <= 1e-12);

        std::vector<Eigen::Index> degree(static_cast<std::size_t>(p), 0);
        for (const auto& [i, j] : m.graph) {
            CHECK(i < j);
            ++degree[i];
            ++degree[j];
        }
        for (const auto d : degree) CHECK(d <= g.max_degree);
        if (g.edge_strength != 0.0) {
            CHECK(off_support(m.S_star) == std::set<std::pair<Eigen::Index, Eigen::Index>>(m.graph.begin(), m.graph.end()));
        }
        const auto fanout = static_cast<Eigen::Index>(std::ceil(g.latent_fanout * static_cast<double>(p) - 1e-12));
        for (Eigen::Index k = 0; k < h; ++k) {
            CHECK((m.K_joint.col(p + k).head(p).array() != 0.0).count() == (g.latent_strength > 0 ? fanout : 0));
        }
        // L* = B D⁻¹ Bᵀ with B the observed-latent block, so rank(L*) = rank(B).
        const MatrixXd B = m.K_joint.block(0, p, p, h);
        const Eigen::Index rank_b = h == 0 ? 0 : Eigen::FullPivLU<MatrixXd>(B).rank();
        CHECK(numerical_rank(m.L_star, 1e-9) == rank_b);
    }
}

TEST_CASE("latent strength does not move the conditional graph")
{
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const auto weak = generate_latent_model<double>(params(20, 2, 3, 0.5, 1.0, seed));
        const auto strong = generate_latent_model<double>(params(20, 2, 3, 0.5, 30.0, seed));
        CHECK(off_support(weak.S_star) == off_support(strong.S_star));
        CHECK(weak.graph == strong.graph);
    }
}

TEST_CASE("generator is deterministic and validates its parameters")
{
    const auto a = generate_latent_model<double>(params(10, 1, 2, 0.5, 2.0, 42));
    const auto b = generate_latent_model<double>(params(10, 1, 2, 0.5, 2.0, 42));
    CHECK(a.K_joint == b.K_joint);
    CHECK_THROWS_AS(generate_latent_model<double>(params(0, 0, 0, 0.0, 0.0, 1)), ArgumentError);
    CHECK_THROWS_AS(generate_latent_model<double>(params(3, 0, 3, 0.0, 0.0, 1)), ArgumentError);
    CHECK_THROWS_AS(generate_latent_model<double>(params(3, -1, 1, 0.0, 0.0, 1)), ArgumentError);
    GeneratorParams g = params(3, 1, 1, 0.0, 1.0, 1);
    g.latent_fanout = 0.0;
    CHECK_THROWS_AS(generate_latent_model<double>(g), ArgumentError);
}

TEST_CASE("sampling is deterministic per seed")
{
    const auto m = generate_latent_model<double>(params(5, 1, 2, 0.5, 2.0, 7));
    CHECK(draw_samples(m, 50, 3) == draw_samples(m, 50, 3));
    CHECK(draw_samples(m, 50, 3) != draw_samples(m, 50, 4));
    CHECK_THROWS_AS(draw_samples(m, 0, 1), ArgumentError);
}

TEST_CASE("Monte Carlo: sample covariance matches cov_O")
{
    const auto m = generate_latent_model<double>(params(3, 1, 1, 0.5, 2.0, 5));
    const auto sigma = sample_covariance(draw_samples(m, 100000, 17));
    CHECK((sigma.matrix() - m.cov_O).norm() <= 0.05 * m.cov_O.norm());

    const auto iid = SyntheticModel<double>::from_joint(params(4, 0, 0, 0.0, 0.0, 5), MatrixXd::Identity(4, 4), {});
    CHECK(iid.cov_O == MatrixXd::Identity(4, 4));
    const auto s2 = sample_covariance(draw_samples(iid, 100000, 19));
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(s2.matrix()(i, i) - 1.0) <= 0.05);
}

TEST_CASE("random number generator")
{
    Rng a(5489), b(5489);
    std::mt19937_64 reference(5489);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == reference());
    for (int i = 0; i < 1000; ++i) {
        const double u = b.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(b.below(7) < 7u);
        const double s = b.sign();
        CHECK(std::abs(s) == 1.0);
    }
    CHECK_THROWS_AS(b.below(0), ArgumentError);

    Rng c(99);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = c.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) <= 0.01);
    CHECK(std::abs(sq / n - 1.0) <= 0.02);
}
