#pragma once

#include <algorithm>
#include <vector>

#include "lvggm/types.hpp"

namespace lvggm {

/// Optimality residuals of a candidate (S, L), with G = Σ - (S-L)⁻¹. All
/// entries are non-negative and vanish at an optimum.
template <typename Scalar = double>
struct KktReport {
    /// max(0, ‖G‖_ℓ∞/(λγ) - 1)
    Scalar dual_linf = Scalar(0);
    /// max over supp(S) of |G_ij + λγ·sign(S_ij)|
    Scalar support_slack = Scalar(0);
    /// max(0, λ_max(G)/λ - 1)
    Scalar dual_spec = Scalar(0);
    /// ‖(λI - G)·U‖₂ for U an orthonormal basis of range(L)
    Scalar lowrank_slack = Scalar(0);

    Scalar max() const { return std::max({dual_linf, support_slack, dual_spec, lowrank_slack}); }
};

template <typename Scalar>
KktReport<Scalar> kkt_report(const SampleCovariance<Scalar>& sigma, const PrecisionDecomposition<Scalar>& decomp,
                             const RegularizationParams<Scalar>& reg)
{
    reg.validate();
    if (!(reg.lambda > Scalar(0))) throw ArgumentError("kkt_report needs lambda > 0");
    if (decomp.S.rows() != sigma.p()) throw ArgumentError("kkt_report dimension mismatch");
    const Feasibility f = check_feasibility(decomp);
    if (f != Feasibility::feasible) throw DomainError(detail::concat("kkt_report on infeasible point: ", to_string(f)));

    const Eigen::Index p = sigma.p();
    const Matrix<Scalar> K = symmetrize(decomp.precision());
    const Eigen::LLT<Matrix<Scalar>> chol(K);
    const Matrix<Scalar> G =
        symmetrize(Matrix<Scalar>(sigma.matrix() - chol.solve(Matrix<Scalar>::Identity(p, p))));
    const Scalar lg = reg.lambda * reg.gamma;

    KktReport<Scalar> out;
    out.dual_linf = std::max(Scalar(0), linf_norm(G) / lg - Scalar(1));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const Scalar s = decomp.S(i, j);
            if (s != Scalar(0)) {
                out.support_slack = std::max(out.support_slack, std::abs(G(i, j) + lg * (s > Scalar(0) ? 1 : -1)));
            }
        }
    }
    out.dual_spec = std::max(Scalar(0), max_eigenvalue(G) / reg.lambda - Scalar(1));

    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetrize(decomp.L));
    const Scalar cut = Scalar(1e-9) * std::max(Scalar(1), es.eigenvalues().cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (es.eigenvalues()(i) > cut) keep.push_back(i);
    }
    if (!keep.empty()) {
        Matrix<Scalar> U(p, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) U.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
        const Matrix<Scalar> slack = (reg.lambda * Matrix<Scalar>::Identity(p, p) - G) * U;
        out.lowrank_slack = spectral_norm(slack);
    }
    return out;
}

}  // namespace lvggm
