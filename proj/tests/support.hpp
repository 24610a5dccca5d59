#pragma once

#include <cmath>
#include <vector>

#include "lvggm/synth.hpp"
#include "lvggm/types.hpp"

namespace testgen {

using lvggm::MatrixXd;
using lvggm::Rng;
using lvggm::VectorXd;

inline MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    }
    return m;
}

inline MatrixXd symmetric(Rng& rng, Eigen::Index p, double scale = 1.0)
{
    const MatrixXd g = gaussian(rng, p, p);
    return scale * 0.5 * (g + g.transpose());
}

/// PD with eigenvalues in roughly [floor, floor + spread].
inline MatrixXd positive_definite(Rng& rng, Eigen::Index p, double floor = 0.5, double spread = 2.0)
{
    const MatrixXd g = gaussian(rng, p, p);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    const MatrixXd q = qr.householderQ();
    VectorXd d(p);
    for (Eigen::Index i = 0; i < p; ++i) d(i) = floor + spread * rng.uniform();
    return lvggm::symmetrize(MatrixXd(q * d.asDiagonal() * q.transpose()));
}

inline MatrixXd psd_low_rank(Rng& rng, Eigen::Index p, Eigen::Index r, double scale = 1.0)
{
    const MatrixXd b = gaussian(rng, p, r);
    return lvggm::symmetrize(MatrixXd(scale * b * b.transpose() / double(std::max<Eigen::Index>(p, 1))));
}

/// Sample covariance of n standard normal draws times a random mixing matrix.
inline lvggm::SampleCovariance<double> random_covariance(Rng& rng, Eigen::Index p, Eigen::Index n)
{
    const MatrixXd mix = MatrixXd::Identity(p, p) + 0.3 * gaussian(rng, p, p);
    const MatrixXd x = gaussian(rng, n, p) * mix;
    return lvggm::SampleCovariance<double>(MatrixXd(x.transpose() * x / double(n)), static_cast<std::size_t>(n));
}

inline std::vector<Eigen::Index> permutation(Rng& rng, Eigen::Index p)
{
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) perm[i] = i;
    for (Eigen::Index i = p - 1; i > 0; --i) {
        std::swap(perm[i], perm[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    }
    return perm;
}

/// (P M Pᵀ)_{ij} = M_{perm[i], perm[j]}.
inline MatrixXd permute(const MatrixXd& m, const std::vector<Eigen::Index>& perm)
{
    const Eigen::Index p = m.rows();
    MatrixXd out(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) out(i, j) = m(perm[i], perm[j]);
    }
    return out;
}

/// The 3×3 joint precision with one latent coupled to both observed nodes.
inline MatrixXd worked_joint()
{
    MatrixXd k(3, 3);
    k << 2, 0, 1, 0, 2, 1, 1, 1, 2;
    return k;
}

}  // namespace testgen
