#pragma once

#include <cmath>

#include "lvggm/types.hpp"

namespace lvggm {

/// Prox of τ‖·‖₁: sign(m)·max(|m|-τ, 0) entrywise. Entries with |m| = τ map to 0.
template <typename Derived>
Matrix<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau)
{
    using Scalar = typename Derived::Scalar;
    if (tau < Scalar(0)) throw ArgumentError(detail::concat("threshold must be >= 0, got ", tau));
    return m.unaryExpr([tau](Scalar v) {
        const Scalar mag = std::abs(v) - tau;
        if (mag <= Scalar(0)) return Scalar(0);
        return v > Scalar(0) ? mag : -mag;
    });
}

/// Keeps entries with |m| > τ, zeroes the rest.
template <typename Derived>
Matrix<typename Derived::Scalar> hard_threshold(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau)
{
    using Scalar = typename Derived::Scalar;
    if (tau < Scalar(0)) throw ArgumentError(detail::concat("threshold must be >= 0, got ", tau));
    return m.unaryExpr([tau](Scalar v) { return std::abs(v) > tau ? v : Scalar(0); });
}

/// Rebuilds Q·diag(f(d))·Qᵀ from the eigendecomposition of a symmetric matrix.
template <typename Derived, typename Map>
Matrix<typename Derived::Scalar> spectral_map(const Eigen::MatrixBase<Derived>& m, Map&& f)
{
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols()) throw ArgumentError("spectral_map expects a square matrix");
    if (m.size() == 0) return Matrix<Scalar>(m.rows(), m.cols());
    const Matrix<Scalar> sym = symmetrize(m);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
    const Vector<Scalar> d = es.eigenvalues().unaryExpr(f);
    Matrix<Scalar> out = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
    return symmetrize(out);
}

/// Prox of τ·trace(·) + indicator(· ⪰ 0): eigenvalues d ↦ max(d-τ, 0).
template <typename Derived>
Matrix<typename Derived::Scalar> psd_trace_prox(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau)
{
    using Scalar = typename Derived::Scalar;
    if (tau < Scalar(0)) throw ArgumentError(detail::concat("threshold must be >= 0, got ", tau));
    return spectral_map(m, [tau](Scalar d) { return std::max(d - tau, Scalar(0)); });
}

/// Euclidean projection onto the PSD cone.
template <typename Derived>
Matrix<typename Derived::Scalar> psd_projection(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    return spectral_map(m, [](Scalar d) { return std::max(d, Scalar(0)); });
}

/// argmin_R -log det R + trace(RΣ) + (ρ/2)‖R - W‖_F².
///
/// With ρW - Σ = QΛQᵀ the minimizer is Q·diag((λᵢ + √(λᵢ² + 4ρ)) / 2ρ)·Qᵀ,
/// which is PD for every symmetric W.
template <typename DerivedW, typename DerivedS>
Matrix<typename DerivedW::Scalar> logdet_prox(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedS>& sigma,
                                              typename DerivedW::Scalar rho)
{
    using Scalar = typename DerivedW::Scalar;
    if (!(rho > Scalar(0))) throw ArgumentError(detail::concat("penalty rho must be > 0, got ", rho));
    if (w.rows() != sigma.rows() || w.cols() != sigma.cols()) throw ArgumentError("logdet_prox dimension mismatch");
    const Matrix<Scalar> shifted = rho * w - sigma;
    return spectral_map(shifted, [rho](Scalar l) {
        using std::sqrt;
        // Rationalized for l < 0 to avoid cancellation: (l + √(l²+4ρ))/2ρ = 2/(√(l²+4ρ) - l).
        const Scalar root = sqrt(l * l + Scalar(4) * rho);
        return l >= Scalar(0) ? (l + root) / (Scalar(2) * rho) : Scalar(2) / (root - l);
    });
}

/// Keeps the top `rank` eigenvalues, clipped at zero; every other eigenvalue is exactly zeroed.
template <typename Derived>
Matrix<typename Derived::Scalar> rank_psd_projection(const Eigen::MatrixBase<Derived>& m, Eigen::Index rank)
{
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols()) throw ArgumentError("rank_psd_projection expects a square matrix");
    const Eigen::Index p = m.rows();
    if (rank < 0 || rank > p) throw ArgumentError(detail::concat("rank cap ", rank, " outside [0, ", p, "]"));
    if (rank == 0 || p == 0) return Matrix<Scalar>::Zero(p, p);
    const Matrix<Scalar> sym = symmetrize(m);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
    Matrix<Scalar> out = Matrix<Scalar>::Zero(p, p);
    for (Eigen::Index k = p - rank; k < p; ++k) {
        const Scalar d = es.eigenvalues()(k);
        if (d > Scalar(0)) out.noalias() += d * es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
    }
    return symmetrize(out);
}

/// Projection onto {‖X‖_ℓ∞ ≤ radius} (entrywise clip).
template <typename Derived>
Matrix<typename Derived::Scalar> clip_linf(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar radius)
{
    return m.cwiseMax(-radius).cwiseMin(radius);
}

/// Projection onto {‖X‖₂ ≤ radius} for a general square matrix (singular-value clip).
template <typename Derived>
Matrix<typename Derived::Scalar> clip_spectral(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar radius)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return m;
    Eigen::JacobiSVD<Matrix<Scalar>> svd(m.eval(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector<Scalar>& sv = svd.singularValues();
    if (sv(0) <= radius) return m;
    const Vector<Scalar> clipped = sv.cwiseMin(radius);
    return svd.matrixU() * clipped.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace lvggm
