#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lvggm/gaussian.hpp"
#include "lvggm/types.hpp"

namespace lvggm {

/// Seeded 64-bit Mersenne Twister with hand-rolled transforms.
///
/// The engine's output sequence is fixed by the standard; the uniform,
/// integer and normal transforms are implemented here because the standard
/// distributions are implementation-defined.
class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on {0, ..., bound-1} by rejection.
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound == 0) throw ArgumentError("Rng::below needs a positive bound");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// +1 or -1 with equal probability.
    double sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

    /// Standard normal via the Box-Muller transform (both outputs used).
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct GeneratorParams {
    Eigen::Index p = 0;
    Eigen::Index h = 0;
    Eigen::Index max_degree = 0;
    double latent_fanout = 1.0;
    double edge_strength = 0.0;
    double latent_strength = 0.0;
    std::uint64_t seed = 0;
};

using Edge = std::pair<Eigen::Index, Eigen::Index>;

/// Ground-truth latent-variable Gaussian model. Observed coordinates come
/// first in K_joint, latent coordinates last.
template <typename Scalar = double>
struct SyntheticModel {
    GeneratorParams params;
    Matrix<Scalar> K_joint;
    Matrix<Scalar> S_star;
    Matrix<Scalar> L_star;
    Matrix<Scalar> K_O;
    Matrix<Scalar> cov_O;
    /// Conditional graph on the observed variables, (i, j) with i < j, sorted.
    std::vector<Edge> graph;
    std::string rng = Rng::kAlgorithm;

    Eigen::Index p() const { return params.p; }
    Eigen::Index h() const { return params.h; }

    PrecisionDecomposition<Scalar> truth() const { return {S_star, L_star}; }

    /// Rebuilds every derived field from K_joint.
    static SyntheticModel from_joint(const GeneratorParams& params, const Matrix<Scalar>& K_joint,
                                     std::vector<Edge> graph)
    {
        if (K_joint.rows() != params.p + params.h || K_joint.cols() != K_joint.rows()) {
            throw ArgumentError(detail::concat("joint precision is ", K_joint.rows(), "x", K_joint.cols(),
                                               ", expected ", params.p + params.h));
        }
        SyntheticModel m;
        m.params = params;
        m.K_joint = K_joint;
        auto marg = marginal_precision<Scalar>(K_joint, params.h);
        m.S_star = std::move(marg.S_star);
        m.L_star = std::move(marg.L_star);
        m.K_O = std::move(marg.K_O);
        const Eigen::LLT<Matrix<Scalar>> chol(m.K_O);
        if (chol.info() != Eigen::Success) throw DomainError("marginal precision is not positive definite");
        m.cov_O = symmetrize(Matrix<Scalar>(chol.solve(Matrix<Scalar>::Identity(params.p, params.p))));
        std::sort(graph.begin(), graph.end());
        m.graph = std::move(graph);
        return m;
    }
};

/// Random latent-variable model with bounded-degree conditional graph.
///
/// The conditional graph targets ⌊p·max_degree/4⌋ edges (average degree
/// max_degree/2), drawing uniform pairs and rejecting any that would exceed
/// the degree bound. Edge weights are ±edge_strength. Each latent couples to
/// ⌈latent_fanout·p⌉ distinct observed variables with weights
/// ±latent_strength/√p. The latent block is diagonal and every diagonal entry
/// is 1 + (row absolute off-diagonal sum) + 0.1, so λ_min(K_joint) ≥ 1.1.
template <typename Scalar = double>
SyntheticModel<Scalar> generate_latent_model(const GeneratorParams& params)
{
    const Eigen::Index p = params.p, h = params.h;
    if (p < 1) throw ArgumentError("generate_latent_model needs p >= 1");
    if (h < 0) throw ArgumentError("latent count must be >= 0");
    if (params.max_degree < 0 || params.max_degree >= p) {
        throw ArgumentError(detail::concat("max_degree must lie in [0, p), got ", params.max_degree));
    }
    if (!(params.latent_fanout > 0.0 && params.latent_fanout <= 1.0)) {
        throw ArgumentError("latent_fanout must lie in (0, 1]");
    }
    if (!std::isfinite(params.edge_strength) || !std::isfinite(params.latent_strength)) {
        throw ArgumentError("strengths must be finite");
    }

    Rng rng(params.seed);
    const Eigen::Index total = p + h;
    Matrix<Scalar> K = Matrix<Scalar>::Zero(total, total);

    std::vector<Eigen::Index> degree(static_cast<std::size_t>(p), 0);
    std::vector<Edge> graph;
    const Eigen::Index target = p * params.max_degree / 4;
    constexpr int kRetries = 1000;
    for (Eigen::Index e = 0; e < target; ++e) {
        bool placed = false;
        for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
            auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p)));
            auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p)));
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            if (degree[i] >= params.max_degree || degree[j] >= params.max_degree) continue;
            if (K(i, j) != Scalar(0) || std::find(graph.begin(), graph.end(), Edge{i, j}) != graph.end()) continue;
            const Scalar w = Scalar(rng.sign() * params.edge_strength);
            K(i, j) = K(j, i) = w;
            ++degree[i];
            ++degree[j];
            graph.emplace_back(i, j);
            placed = true;
        }
        if (!placed) break;
    }
    if (params.edge_strength == 0.0) graph.clear();

    const auto fanout = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::ceil(params.latent_fanout * static_cast<double>(p) - 1e-12)), 1, p);
    const Scalar coupling = Scalar(params.latent_strength / std::sqrt(static_cast<double>(p)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < h; ++k) {
        for (Eigen::Index i = 0; i < p; ++i) order[i] = i;
        // Partial Fisher-Yates: the first `fanout` slots are a uniform subset.
        for (Eigen::Index i = 0; i < fanout; ++i) {
            const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p - i)));
            std::swap(order[i], order[j]);
        }
        for (Eigen::Index i = 0; i < fanout; ++i) {
            const Scalar w = Scalar(rng.sign()) * coupling;
            K(order[i], p + k) = K(p + k, order[i]) = w;
        }
    }

    for (Eigen::Index i = 0; i < total; ++i) {
        K(i, i) = Scalar(0);
        K(i, i) = Scalar(1) + K.row(i).cwiseAbs().sum() + Scalar(0.1);
    }
    return SyntheticModel<Scalar>::from_joint(params, K, std::move(graph));
}

/// n independent draws from N(0, cov_O) as rows, using the Cholesky factor of cov_O.
template <typename Scalar>
Matrix<Scalar> draw_samples(const SyntheticModel<Scalar>& model, Eigen::Index n, std::uint64_t seed)
{
    if (n < 1) throw ArgumentError("draw_samples needs n >= 1");
    const Eigen::LLT<Matrix<Scalar>> chol(model.cov_O);
    if (chol.info() != Eigen::Success) throw DomainError("model covariance is not positive definite");
    const Eigen::Index p = model.p();
    Rng rng(seed);
    Matrix<Scalar> Z(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) Z(i, j) = Scalar(rng.normal());
    }
    return Z * chol.matrixU();
}

}  // namespace lvggm
