#pragma once

#include <algorithm>
#include <vector>

#include "lvggm/types.hpp"

namespace lvggm {

/// ℓ(K; Σ) = log det K - trace(KΣ) for symmetric PD K.
///
/// Throws DomainError naming the smallest eigenvalue when K is not PD.
template <typename Scalar>
Scalar gaussian_log_likelihood(const Matrix<Scalar>& K, const SampleCovariance<Scalar>& sigma)
{
    if (K.rows() != K.cols() || K.rows() != sigma.p()) {
        throw ArgumentError(detail::concat("precision is ", K.rows(), "x", K.cols(), ", covariance is ", sigma.p(),
                                           "x", sigma.p()));
    }
    const Matrix<Scalar> Ks = symmetrize(K);
    const Vector<Scalar> ev = symmetric_eigenvalues(Ks);
    if (!(ev(0) > Scalar(0))) {
        throw DomainError(detail::concat("precision is not positive definite: smallest eigenvalue ", ev(0)));
    }
    using std::log;
    Scalar logdet(0);
    for (Eigen::Index i = 0; i < ev.size(); ++i) logdet += log(ev(i));
    // trace(KΣ) for symmetric arguments is the Frobenius inner product.
    return logdet - Ks.cwiseProduct(sigma.matrix()).sum();
}

enum class ObjectiveStatus {
    ok,
    dimension_mismatch,
    lowrank_not_psd,
    precision_not_pd,
};

template <typename Scalar>
struct ObjectiveEvaluation {
    Scalar value = std::numeric_limits<Scalar>::infinity();
    ObjectiveStatus status = ObjectiveStatus::ok;

    bool finite() const { return status == ObjectiveStatus::ok; }
};

inline const char* to_string(ObjectiveStatus s)
{
    switch (s) {
        case ObjectiveStatus::ok: return "ok";
        case ObjectiveStatus::dimension_mismatch: return "dimension_mismatch";
        case ObjectiveStatus::lowrank_not_psd: return "lowrank_not_psd";
        case ObjectiveStatus::precision_not_pd: return "precision_not_pd";
    }
    return "unknown";
}

/// -ℓ(S-L; Σ) + λ(γ‖S‖₁ + trace L).
///
/// Infeasible input yields +∞ and a status naming the violated constraint.
template <typename Scalar>
ObjectiveEvaluation<Scalar> objective_value(const PrecisionDecomposition<Scalar>& decomp,
                                            const SampleCovariance<Scalar>& sigma,
                                            const RegularizationParams<Scalar>& reg, Scalar psd_tol = Scalar(1e-8))
{
    reg.validate();
    ObjectiveEvaluation<Scalar> out;
    if (decomp.S.rows() != sigma.p()) {
        out.status = ObjectiveStatus::dimension_mismatch;
        return out;
    }
    switch (check_feasibility(decomp, psd_tol)) {
        case Feasibility::feasible: break;
        case Feasibility::dimension_mismatch: out.status = ObjectiveStatus::dimension_mismatch; return out;
        case Feasibility::lowrank_not_psd: out.status = ObjectiveStatus::lowrank_not_psd; return out;
        case Feasibility::precision_not_pd: out.status = ObjectiveStatus::precision_not_pd; return out;
    }
    out.value = -gaussian_log_likelihood<Scalar>(decomp.precision(), sigma) +
                reg.lambda * (reg.gamma * l1_norm(decomp.S) + decomp.L.trace());
    return out;
}

/// Observed-block precision after integrating out latent coordinates.
template <typename Scalar>
struct MarginalPrecision {
    Matrix<Scalar> K_O;     ///< K_OO - K_OH K_HH⁻¹ K_HO
    Matrix<Scalar> S_star;  ///< K_OO
    Matrix<Scalar> L_star;  ///< K_OH K_HH⁻¹ K_HO
};

namespace detail {

inline void validate_partition(Eigen::Index total, const std::vector<Eigen::Index>& observed,
                               const std::vector<Eigen::Index>& latent)
{
    std::vector<int> seen(static_cast<std::size_t>(total), 0);
    auto mark = [&](Eigen::Index i) {
        if (i < 0 || i >= total) throw ArgumentError(concat("index ", i, " out of range for dimension ", total));
        if (seen[static_cast<std::size_t>(i)]++ != 0) {
            throw ArgumentError(concat("index ", i, " appears more than once in observed/latent sets"));
        }
    };
    for (auto i : observed) mark(i);
    for (auto i : latent) mark(i);
    if (observed.size() + latent.size() != static_cast<std::size_t>(total)) {
        throw ArgumentError("observed and latent index sets must cover every coordinate");
    }
    if (observed.empty()) throw ArgumentError("observed index set is empty");
}

template <typename Scalar>
Matrix<Scalar> submatrix(const Matrix<Scalar>& m, const std::vector<Eigen::Index>& rows,
                         const std::vector<Eigen::Index>& cols)
{
    Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
        }
    }
    return out;
}

}  // namespace detail

/// Schur-complement marginalization of a joint precision matrix.
///
/// K_O is formed as S* - L* so that K_O + L* = S* holds exactly in floating
/// point up to one rounding per entry.
template <typename Scalar>
MarginalPrecision<Scalar> marginal_precision(const Matrix<Scalar>& K_joint, const std::vector<Eigen::Index>& observed,
                                             const std::vector<Eigen::Index>& latent)
{
    if (K_joint.rows() != K_joint.cols()) throw ArgumentError("joint precision must be square");
    detail::validate_partition(K_joint.rows(), observed, latent);
    const Matrix<Scalar> K = symmetrize(K_joint);

    MarginalPrecision<Scalar> out;
    out.S_star = detail::submatrix(K, observed, observed);
    const auto p = out.S_star.rows();
    if (latent.empty()) {
        out.L_star = Matrix<Scalar>::Zero(p, p);
        out.K_O = out.S_star;
        return out;
    }
    const Matrix<Scalar> K_HH = detail::submatrix(K, latent, latent);
    const Matrix<Scalar> K_OH = detail::submatrix(K, observed, latent);
    const Scalar lo = min_eigenvalue(K_HH);
    const Scalar scale = std::max(Scalar(1), K_HH.cwiseAbs().maxCoeff());
    if (!(lo > std::numeric_limits<Scalar>::epsilon() * scale * Scalar(K_HH.rows()))) {
        throw DomainError(detail::concat("latent block K_HH is singular or indefinite: smallest eigenvalue ", lo));
    }
    const Eigen::LLT<Matrix<Scalar>> chol(K_HH);
    // L* = (C⁻¹K_HO)ᵀ(C⁻¹K_HO) with K_HH = CCᵀ, symmetric PSD by construction.
    const Matrix<Scalar> half = chol.matrixL().solve(K_OH.transpose());
    out.L_star = half.transpose() * half;
    out.L_star = symmetrize(out.L_star);
    out.K_O = out.S_star - out.L_star;
    return out;
}

/// Convenience overload: the last `h` coordinates are latent.
template <typename Scalar>
MarginalPrecision<Scalar> marginal_precision(const Matrix<Scalar>& K_joint, Eigen::Index h)
{
    const Eigen::Index total = K_joint.rows();
    if (h < 0 || h >= total) throw ArgumentError(detail::concat("latent count ", h, " invalid for dimension ", total));
    std::vector<Eigen::Index> observed, latent;
    for (Eigen::Index i = 0; i < total - h; ++i) observed.push_back(i);
    for (Eigen::Index i = total - h; i < total; ++i) latent.push_back(i);
    return marginal_precision(K_joint, observed, latent);
}

enum class Centering {
    zero_mean,      ///< (1/n) Σ xᵢxᵢᵀ
    subtract_mean,  ///< 1/(n-1) with the sample mean removed
};

/// Sample covariance of an n×p data matrix (rows are observations).
template <typename Derived>
SampleCovariance<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& samples,
                                                             Centering centering = Centering::zero_mean)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = samples.rows();
    if (n < 1) throw ArgumentError("sample_covariance needs at least one observation");
    if (samples.cols() < 1) throw ArgumentError("sample_covariance needs at least one variable");
    Matrix<Scalar> X = samples;
    Scalar denom = Scalar(n);
    if (centering == Centering::subtract_mean) {
        if (n < 2) throw ArgumentError("mean-centred covariance needs at least two observations");
        X.rowwise() -= X.colwise().mean();
        denom = Scalar(n - 1);
    }
    Matrix<Scalar> cov = Matrix<Scalar>::Zero(X.cols(), X.cols());
    cov.template selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), Scalar(1) / denom);
    cov = cov.template selfadjointView<Eigen::Lower>();
    return SampleCovariance<Scalar>(cov, static_cast<std::size_t>(n));
}

}  // namespace lvggm
