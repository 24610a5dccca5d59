#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lvggm/gaussian.hpp"
#include "lvggm/kkt.hpp"
#include "lvggm/solver.hpp"
#include "lvggm/synth.hpp"
#include "lvggm/types.hpp"

namespace lvggm {

/// Number of eigenvalues above rel_tol·max(λ_max, 1e-12).
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar rel_tol)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return 0;
    const auto ev = symmetric_eigenvalues(m);
    const Scalar cut = rel_tol * std::max(ev(ev.size() - 1), Scalar(1e-12));
    return static_cast<Eigen::Index>((ev.array() > cut).count());
}

/// Signed off-diagonal support of the upper triangle: +1, -1 or 0 per pair.
template <typename Scalar>
std::vector<signed char> sign_pattern(const Matrix<Scalar>& S, Scalar zero_tol)
{
    std::vector<signed char> out;
    const Eigen::Index p = S.rows();
    out.reserve(static_cast<std::size_t>(p * (p - 1) / 2));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const Scalar v = S(i, j);
            out.push_back(std::abs(v) > zero_tol ? (v > Scalar(0) ? 1 : -1) : 0);
        }
    }
    return out;
}

template <typename Scalar = double>
struct RecoveryMetrics {
    bool sign_consistent = false;
    Eigen::Index false_positives = 0;
    Eigen::Index false_negatives = 0;
    /// Support pairs present in both whose signs disagree.
    Eigen::Index sign_errors = 0;
    bool rank_correct = false;
    Eigen::Index rank_est = 0;
    Eigen::Index rank_true = 0;
    Scalar loss_linf = Scalar(0);       ///< ‖Ŝ - S*‖_ℓ∞
    Scalar loss_spectral = Scalar(0);   ///< ‖L̂ - L*‖₂
    Scalar loss_frob_total = Scalar(0); ///< ‖Ŝ - S*‖_F + ‖L̂ - L*‖_F
};

/// Default support threshold 1e-6·max|S*|.
template <typename Scalar>
Scalar default_zero_tol(const Matrix<Scalar>& S_star)
{
    return Scalar(1e-6) * std::max(linf_norm(S_star), Scalar(1e-300));
}

/// Compares an estimate against the true (S*, L*). Support is off-diagonal,
/// each symmetric pair counted once; the true support is the exact nonzeros of S*.
template <typename Scalar>
RecoveryMetrics<Scalar> recovery_metrics(const PrecisionDecomposition<Scalar>& est,
                                         const PrecisionDecomposition<Scalar>& truth, Scalar zero_tol,
                                         Scalar rank_tol)
{
    if (est.S.rows() != truth.S.rows() || est.L.rows() != truth.L.rows() || est.S.rows() != est.L.rows() ||
        est.S.cols() != truth.S.cols()) {
        throw ArgumentError(detail::concat("dimension mismatch: estimate ", est.S.rows(), ", truth ", truth.S.rows()));
    }
    RecoveryMetrics<Scalar> out;
    const auto est_pattern = sign_pattern(est.S, zero_tol);
    const auto true_pattern = sign_pattern(truth.S, Scalar(0));
    for (std::size_t k = 0; k < est_pattern.size(); ++k) {
        const bool e = est_pattern[k] != 0, t = true_pattern[k] != 0;
        if (e && !t) ++out.false_positives;
        if (!e && t) ++out.false_negatives;
        if (e && t && est_pattern[k] != true_pattern[k]) ++out.sign_errors;
    }
    out.sign_consistent = out.false_positives == 0 && out.false_negatives == 0 && out.sign_errors == 0;
    out.rank_est = numerical_rank(est.L, rank_tol);
    out.rank_true = numerical_rank(truth.L, Scalar(1e-9));
    out.rank_correct = out.rank_est == out.rank_true;
    const Matrix<Scalar> dS = est.S - truth.S, dL = est.L - truth.L;
    out.loss_linf = linf_norm(dS);
    out.loss_spectral = spectral_norm(dL);
    out.loss_frob_total = dS.norm() + dL.norm();
    return out;
}

template <typename Scalar>
RecoveryMetrics<Scalar> recovery_metrics(const PrecisionDecomposition<Scalar>& est, const SyntheticModel<Scalar>& truth,
                                         Scalar zero_tol, Scalar rank_tol)
{
    return recovery_metrics(est, truth.truth(), zero_tol, rank_tol);
}

template <typename Scalar = double>
struct SignalLevels {
    /// Smallest |S*_ij| over the off-diagonal support; +∞ if that support is empty.
    Scalar theta = std::numeric_limits<Scalar>::infinity();
    /// Smallest eigenvalue of L* above 1e-10; 0 if L* = 0.
    Scalar sigma_min = Scalar(0);
    std::vector<std::string> notes;
};

template <typename Scalar>
SignalLevels<Scalar> signal_levels(const PrecisionDecomposition<Scalar>& truth)
{
    SignalLevels<Scalar> out;
    const Eigen::Index p = truth.S.rows();
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (i != j && truth.S(i, j) != Scalar(0)) out.theta = std::min(out.theta, std::abs(truth.S(i, j)));
        }
    }
    if (!(out.theta < std::numeric_limits<Scalar>::infinity())) {
        out.notes.push_back("sparse component has no off-diagonal support; theta is +inf");
    }
    if (p > 0) {
        const auto ev = symmetric_eigenvalues(truth.L);
        bool any = false;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) > Scalar(1e-10)) {
                out.sigma_min = any ? std::min(out.sigma_min, ev(i)) : ev(i);
                any = true;
            }
        }
        if (!any) out.notes.push_back("no low-rank part; sigma_min is 0");
    }
    return out;
}

template <typename Scalar>
SignalLevels<Scalar> signal_levels(const SyntheticModel<Scalar>& truth)
{
    return signal_levels(truth.truth());
}

template <typename Scalar = double>
struct IdentifiabilityReport {
    /// max_i ‖P_U eᵢ‖₂ over U = column space of L*; 0 when L* = 0.
    Scalar coherence = Scalar(0);
    Eigen::Index subspace_dim = 0;
    /// Max off-diagonal nonzeros per row of S*.
    Eigen::Index max_degree = 0;
    std::string notes;
};

/// Computable surrogates for the tangent-space transversality conditions:
/// row/column-space coherence of L* and the maximum degree of S*.
template <typename Scalar>
IdentifiabilityReport<Scalar> identifiability_report(const PrecisionDecomposition<Scalar>& truth)
{
    IdentifiabilityReport<Scalar> out;
    const Eigen::Index p = truth.S.rows();
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::Index deg = 0;
        for (Eigen::Index j = 0; j < p; ++j) deg += (i != j && truth.S(i, j) != Scalar(0));
        out.max_degree = std::max(out.max_degree, deg);
    }
    if (p == 0) return out;
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetrize(truth.L));
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (es.eigenvalues()(i) > Scalar(1e-10)) keep.push_back(i);
    }
    out.subspace_dim = static_cast<Eigen::Index>(keep.size());
    if (keep.empty()) {
        out.notes = "no low-rank part; coherence reported as 0";
        return out;
    }
    Matrix<Scalar> U(p, out.subspace_dim);
    for (std::size_t k = 0; k < keep.size(); ++k) U.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
    out.coherence = U.rowwise().norm().maxCoeff();
    return out;
}

template <typename Scalar>
IdentifiabilityReport<Scalar> identifiability_report(const SyntheticModel<Scalar>& truth)
{
    return identifiability_report(truth.truth());
}

/// A maximal run of consecutive γ values sharing (sign pattern of Ŝ, rank of L̂).
template <typename Scalar = double>
struct StabilityInterval {
    Scalar gamma_lo = Scalar(0);
    Scalar gamma_hi = Scalar(0);
    std::size_t first = 0;  ///< index of the first fit in the interval
    std::size_t last = 0;   ///< index of the last fit in the interval
    Eigen::Index support_size = 0;
    Eigen::Index rank = 0;
    /// Set only when truth was supplied.
    std::optional<bool> exact_recovery;

    Scalar ratio() const { return gamma_hi / gamma_lo; }
};

template <typename Scalar = double>
struct StabilityOptions {
    /// Absolute support threshold; defaults to 1e-6·max|S*| with truth, else
    /// 1e-6·max|Ŝ| per fit.
    std::optional<Scalar> zero_tol;
    Scalar rank_tol = Scalar(1e-6);
};

template <typename Scalar>
std::vector<StabilityInterval<Scalar>> gamma_stability(const std::vector<std::pair<Scalar, FitReport<Scalar>>>& results,
                                                       const std::optional<PrecisionDecomposition<Scalar>>& truth,
                                                       const StabilityOptions<Scalar>& opts = {})
{
    for (std::size_t k = 1; k < results.size(); ++k) {
        if (!(results[k - 1].first < results[k].first)) {
            throw ArgumentError(detail::concat("gamma values must be strictly increasing; position ", k, " has ",
                                               results[k].first, " after ", results[k - 1].first));
        }
    }
    const auto zero_tol_for = [&](const Matrix<Scalar>& S) {
        if (opts.zero_tol) return *opts.zero_tol;
        return truth ? default_zero_tol(truth->S) : default_zero_tol(S);
    };
    std::vector<signed char> true_pattern;
    Eigen::Index true_rank = 0;
    if (truth) {
        true_pattern = sign_pattern(truth->S, Scalar(0));
        true_rank = numerical_rank(truth->L, Scalar(1e-9));
    }

    std::vector<StabilityInterval<Scalar>> out;
    std::vector<signed char> current;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& fit = results[k].second;
        auto pattern = sign_pattern(fit.decomp.S, zero_tol_for(fit.decomp.S));
        const Eigen::Index rank = numerical_rank(fit.decomp.L, opts.rank_tol);
        if (!out.empty() && pattern == current && rank == out.back().rank) {
            out.back().gamma_hi = results[k].first;
            out.back().last = k;
            continue;
        }
        StabilityInterval<Scalar> iv;
        iv.gamma_lo = iv.gamma_hi = results[k].first;
        iv.first = iv.last = k;
        iv.rank = rank;
        iv.support_size = static_cast<Eigen::Index>(std::count_if(pattern.begin(), pattern.end(), [](signed char c) {
            return c != 0;
        }));
        if (truth) iv.exact_recovery = pattern == true_pattern && rank == true_rank;
        current = std::move(pattern);
        out.push_back(iv);
    }
    return out;
}

}  // namespace lvggm
