#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>

#include "lvggm/gaussian.hpp"
#include "lvggm/prox.hpp"
#include "lvggm/solver.hpp"
#include "lvggm/types.hpp"

namespace lvggm {

// ---------------------------------------------------------------------------
// Rank-constrained alternating estimator
//
//     min -ℓ(S-L; Σ) + λ‖S‖₁   s.t. S - L ≻ 0, L ⪰ 0, rank(L) ≤ r
//
// S-step: the convex fit with L held fixed (consensus ADMM with a pinned L
// block). L-step: projected gradient with rank-r PSD truncation and
// backtracking that keeps S - L ≻ 0 and enforces sufficient decrease. Outer
// steps are only accepted when they do not increase the objective.
// ---------------------------------------------------------------------------

struct RankConstraint {
    Eigen::Index r = 0;
};

template <typename Scalar = double>
struct AlternatingOptions {
    SolverOptions<Scalar> inner;
    int max_outer = 200;
    /// Stop when the outer decrease falls below tol·max(1, |objective|).
    Scalar tol = Scalar(1e-10);
    int lowrank_steps = 50;
};

namespace detail {

template <typename Scalar>
Scalar rank_objective(const SampleCovariance<Scalar>& sigma, const Matrix<Scalar>& S, const Matrix<Scalar>& L,
                      Scalar lambda)
{
    LikelihoodProblem<Scalar> prob;
    prob.sigma = &sigma;
    prob.sparse_weight = lambda;
    return likelihood_objective(prob, S, L);
}

/// Smooth part f(L) = -log det(S-L) + trace((S-L)Σ) for fixed S.
template <typename Scalar>
Scalar smooth_in_lowrank(const SampleCovariance<Scalar>& sigma, const Matrix<Scalar>& S, const Matrix<Scalar>& L,
                         Scalar floor)
{
    const Matrix<Scalar> K = S - L;
    const Vector<Scalar> ev = symmetric_eigenvalues(K);
    if (!(ev(0) > floor)) return std::numeric_limits<Scalar>::infinity();
    return -ev.array().log().sum() + K.cwiseProduct(sigma.matrix()).sum();
}

/// Projected gradient on L with rank-r PSD truncation. Returns the new L and
/// never increases f.
template <typename Scalar>
Matrix<Scalar> lowrank_step(const SampleCovariance<Scalar>& sigma, const Matrix<Scalar>& S, Matrix<Scalar> L,
                            Eigen::Index r, Scalar floor, int steps)
{
    Scalar f = smooth_in_lowrank(sigma, S, L, floor);
    Scalar t = Scalar(1);
    for (int k = 0; k < steps; ++k) {
        const Matrix<Scalar> grad = symmetrize(Matrix<Scalar>(Matrix<Scalar>(S - L).inverse() - sigma.matrix()));
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            const Matrix<Scalar> cand = rank_psd_projection(Matrix<Scalar>(L - t * grad), r);
            const Matrix<Scalar> step = cand - L;
            const Scalar fc = smooth_in_lowrank(sigma, S, cand, floor);
            const Scalar model = f + grad.cwiseProduct(step).sum() + step.squaredNorm() / (Scalar(2) * t);
            if (fc <= model && fc <= f) {
                moved = step.norm() > Scalar(0) && fc < f;
                L = cand;
                f = fc;
                break;
            }
            t /= Scalar(2);
        }
        if (!moved) break;
        t *= Scalar(2);
    }
    return L;
}

}  // namespace detail

template <typename Scalar>
FitReport<Scalar> fit_em_rank(const SampleCovariance<Scalar>& sigma, Scalar lambda, RankConstraint rank,
                              const std::optional<PrecisionDecomposition<std::type_identity_t<Scalar>>>& init = std::nullopt,
                              const AlternatingOptions<std::type_identity_t<Scalar>>& opts = {})
{
    opts.inner.validate();
    if (!(lambda >= Scalar(0))) throw ArgumentError(detail::concat("lambda must be >= 0, got ", lambda));
    const Eigen::Index p = sigma.p();
    if (rank.r < 0 || rank.r > p) throw ArgumentError(detail::concat("rank cap ", rank.r, " outside [0, ", p, "]"));
    detail::require_invertible_if_unregularized(sigma, lambda);

    Matrix<Scalar> S, L;
    FitReport<Scalar> report;
    if (init) {
        if (init->S.rows() != p || check_feasibility(*init) != Feasibility::feasible) {
            throw ArgumentError("initial decomposition is infeasible");
        }
        const auto ev = symmetric_eigenvalues(init->L);
        Eigen::Index nz = 0;
        const Scalar cut = Scalar(1e-10) * std::max(Scalar(1), ev.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < ev.size(); ++i) nz += ev(i) > cut;
        if (nz > rank.r) throw ArgumentError(detail::concat("initial L has rank ", nz, " above the cap ", rank.r));
        S = init->S;
        L = rank_psd_projection(init->L, rank.r);
        report.initialization = "user";
    } else {
        S = detail::diagonal_start(sigma, lambda);
        L = Matrix<Scalar>::Zero(p, p);
        report.initialization = "default";
    }

    SolverOptions<Scalar> inner = opts.inner;
    inner.sparse_only = false;
    inner.record_history = false;
    const Scalar floor = std::max(opts.inner.feasibility_floor, Scalar(0));

    Scalar F = detail::rank_objective(sigma, S, L, lambda);
    if (!(F < std::numeric_limits<Scalar>::infinity())) throw ArgumentError("initial point is infeasible");
    report.history.push_back({F, F, Scalar(0), Scalar(0), opts.inner.penalty});

    FitReport<Scalar> last_inner;
    bool inner_ok = true;
    for (int outer = 1; outer <= opts.max_outer; ++outer) {
        // S-step with L pinned.
        detail::LikelihoodProblem<Scalar> prob;
        prob.sigma = &sigma;
        prob.sparse_weight = lambda;
        prob.mode = detail::LowRankBlock::fixed;
        prob.fixed_L = L;
        last_inner = detail::consensus_admm(prob, PrecisionDecomposition<Scalar>{S, L}, inner);
        inner_ok = last_inner.converged;
        const Scalar F_s = detail::rank_objective(sigma, last_inner.decomp.S, L, lambda);
        if (F_s <= F && min_eigenvalue(Matrix<Scalar>(last_inner.decomp.S - L)) >= floor) S = last_inner.decomp.S;
        const Scalar F_mid = detail::rank_objective(sigma, S, L, lambda);

        // L-step.
        if (rank.r > 0) L = detail::lowrank_step(sigma, S, L, rank.r, floor, opts.lowrank_steps);
        const Scalar F_new = detail::rank_objective(sigma, S, L, lambda);
        if (F_new > F || F_mid > F) {
            throw DomainError(detail::concat("alternating fit: objective increased at outer iteration ", outer, " (",
                                             F, " -> ", std::max(F_mid, F_new), ")"));
        }
        const Scalar decrease = F - F_new;
        F = F_new;
        report.history.push_back({F, F, last_inner.primal_residual, last_inner.dual_residual, Scalar(0)});
        report.iterations = outer;
        if (decrease <= opts.tol * std::max(Scalar(1), std::abs(F))) {
            report.converged = inner_ok;
            break;
        }
    }

    report.decomp = {S, L};
    report.objective = F;
    report.primal_residual = last_inner.primal_residual;
    report.dual_residual = last_inner.dual_residual;
    report.status = report.converged ? FitStatus::converged : FitStatus::max_iterations;
    report.feasible = min_eigenvalue(Matrix<Scalar>(S - L)) >= floor;
    if (!inner_ok) report.notes.push_back("final sparse step did not reach its tolerance");
    return report;
}

// ---------------------------------------------------------------------------
// Two-step thresholding estimator
// ---------------------------------------------------------------------------

enum class ThresholdMode { hard, soft };

template <typename Scalar = double>
struct ThresholdParams {
    Scalar t_sparse = Scalar(0);
    Scalar t_spectral = Scalar(0);
    ThresholdMode sparse_mode = ThresholdMode::hard;
    ThresholdMode spectral_mode = ThresholdMode::hard;

    void validate() const
    {
        if (!(t_sparse >= 0) || !(t_spectral >= 0)) throw ArgumentError("thresholds must be >= 0");
    }

    /// t_sparse = c₁√(log p / n), t_spectral = c₂√(p / n).
    static ThresholdParams scaled(Eigen::Index p, std::size_t n, Scalar c_sparse = Scalar(1),
                                  Scalar c_spectral = Scalar(1))
    {
        if (n == 0) throw ArgumentError("threshold scaling needs a finite sample count");
        using std::log;
        using std::sqrt;
        ThresholdParams out;
        out.t_sparse = c_sparse * sqrt(log(Scalar(std::max<Eigen::Index>(p, 2))) / Scalar(n));
        out.t_spectral = c_spectral * sqrt(Scalar(p) / Scalar(n));
        return out;
    }
};

/// Ŝ = threshold(Σ⁻¹, t_sparse); L̂ = PSD spectral threshold of Ŝ - Σ⁻¹ at t_spectral.
///
/// Not likelihood-based: S - L ≻ 0 is reported in `feasible`, not enforced.
template <typename Scalar>
FitReport<Scalar> fit_two_step_threshold(const SampleCovariance<Scalar>& sigma, const ThresholdParams<Scalar>& thr)
{
    thr.validate();
    const auto ev = symmetric_eigenvalues(sigma.matrix());
    const Scalar hi = ev(ev.size() - 1);
    if (!(ev(0) > Scalar(1e-10) * hi) || !(hi > Scalar(0))) {
        throw DomainError(detail::concat("two-step thresholding needs an invertible covariance (n > p); "
                                         "smallest eigenvalue ",
                                         ev(0), ", largest ", hi));
    }
    const Matrix<Scalar> precision = symmetrize(Matrix<Scalar>(sigma.matrix().inverse()));

    FitReport<Scalar> report;
    Matrix<Scalar> S = thr.sparse_mode == ThresholdMode::hard ? hard_threshold(precision, thr.t_sparse)
                                                              : soft_threshold(precision, thr.t_sparse);
    const Matrix<Scalar> resid = S - precision;
    const Scalar t = thr.t_spectral;
    Matrix<Scalar> L = thr.spectral_mode == ThresholdMode::hard
                           ? spectral_map(resid, [t](Scalar d) { return d > t && d > Scalar(0) ? d : Scalar(0); })
                           : psd_trace_prox(resid, t);
    report.decomp = {S, L};
    report.iterations = 1;
    report.primal_residual = Scalar(0);
    report.dual_residual = Scalar(0);
    report.converged = true;
    report.status = FitStatus::converged;
    report.feasible = min_eigenvalue(Matrix<Scalar>(S - L)) > Scalar(0);
    if (report.feasible) {
        report.objective = -gaussian_log_likelihood<Scalar>(Matrix<Scalar>(S - L), sigma);
    } else {
        report.notes.push_back("S - L is not positive definite");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Dantzig-style estimator
//
//     min γ‖S‖₁ + trace L   s.t. ‖Σ(S-L) - I‖_ℓ∞ ≤ γλ, ‖Σ(S-L) - I‖₂ ≤ λ, L ⪰ 0
//
// Consensus ADMM: x = (S, L, Z∞, Z₂) each with a closed-form prox or
// projection; z = (S', L') symmetric with S = S', L = L', Z∞ = Z₂ = ΣD - I for
// D = S' - L'. The z-update decouples into E = S'+L' (explicit) and D, which
// solves D + 2(Σ²D + DΣ²) = m + Σc + cᵀΣ in the eigenbasis of Σ.
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct DantzigConstraints {
    Scalar linf = Scalar(0);      ///< ‖Σ(S-L) - I‖_ℓ∞
    Scalar spectral = Scalar(0);  ///< ‖Σ(S-L) - I‖₂
    Scalar linf_bound = Scalar(0);
    Scalar spectral_bound = Scalar(0);

    Scalar violation() const { return std::max({Scalar(0), linf - linf_bound, spectral - spectral_bound}); }
};

template <typename Scalar>
DantzigConstraints<Scalar> dantzig_constraints(const SampleCovariance<Scalar>& sigma,
                                               const PrecisionDecomposition<Scalar>& d,
                                               const RegularizationParams<Scalar>& reg)
{
    const Eigen::Index p = sigma.p();
    const Matrix<Scalar> resid = sigma.matrix() * d.precision() - Matrix<Scalar>::Identity(p, p);
    return {linf_norm(resid), spectral_norm(resid), reg.gamma * reg.lambda, reg.lambda};
}

template <typename Scalar>
Scalar dantzig_objective(const PrecisionDecomposition<Scalar>& d, Scalar gamma)
{
    return gamma * l1_norm(d.S) + d.L.trace();
}

template <typename Scalar>
FitReport<Scalar> fit_dantzig(const SampleCovariance<Scalar>& sigma, const RegularizationParams<Scalar>& reg,
                              SolverOptions<Scalar> opts = {})
{
    reg.validate();
    opts.validate();
    if (!(reg.lambda > Scalar(0))) throw ArgumentError("the Dantzig estimator needs lambda > 0");
    using std::sqrt;
    const Matrix<Scalar>& C = sigma.matrix();
    const Eigen::Index p = C.rows();
    const Matrix<Scalar> I = Matrix<Scalar>::Identity(p, p);
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    const Scalar linf_bound = reg.gamma * reg.lambda;
    const Scalar spec_bound = reg.lambda;

    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(C);
    const Matrix<Scalar>& Q = es.eigenvectors();
    const Vector<Scalar> sq = es.eigenvalues().array().square();
    // Penalty weight on the residual blocks, invariant under rescaling of Σ.
    const Scalar hi = es.eigenvalues()(p - 1);
    const Scalar eig_floor = Scalar(1e-12) * std::max(hi, Scalar(1));
    const Scalar w = Scalar(1) / (std::max(es.eigenvalues()(0), eig_floor) * std::max(hi, eig_floor));
    Matrix<Scalar> denom(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) denom(i, j) = Scalar(1) + Scalar(2) * w * (sq(i) + sq(j));
    }

    FitReport<Scalar> report;
    report.initialization = "zero";

    // A null vector v of Σ gives vᵀ(ΣD - I) = -vᵀ, so ‖ΣD - I‖₂ ≥ 1 for every D.
    if (es.eigenvalues()(0) <= eig_floor && spec_bound < Scalar(1)) {
        report.status = FitStatus::infeasible;
        report.decomp = {Matrix<Scalar>::Zero(p, p), Matrix<Scalar>::Zero(p, p)};
        report.notes.push_back("singular covariance: spectral constraint needs lambda >= 1");
        return report;
    }

    Matrix<Scalar> Sz = Matrix<Scalar>::Zero(p, p), Lz = Sz;
    const bool invertible = es.eigenvalues()(0) > eig_floor;
    if (invertible) {
        Sz = symmetrize(Matrix<Scalar>(Q * es.eigenvalues().cwiseInverse().asDiagonal() * Q.transpose()));
        report.initialization = "inverse";
    }
    Matrix<Scalar> S = Sz, L = Lz, Z1, Z2;
    Matrix<Scalar> US = Sz, UL = Sz, U1 = Sz, U2 = Sz;
    Matrix<Scalar> resid_z = C * (Sz - Lz) - I;
    Scalar rho = std::clamp(opts.penalty, opts.rho_min, opts.rho_max);
    Scalar best = inf;
    PrecisionDecomposition<Scalar> best_decomp{Sz, Lz};
    if (invertible && dantzig_constraints(sigma, best_decomp, reg).violation() <= Scalar(1e-6)) {
        best = dantzig_objective(best_decomp, reg.gamma);
    }
    const Scalar slack = Scalar(1e-6);
    int adapt_every = opts.adapt_interval, next_adapt = adapt_every;

    for (int it = 1; it <= opts.max_iter; ++it) {
        S = soft_threshold(Sz - US, reg.gamma / rho);
        L = psd_trace_prox(Lz - UL, Scalar(1) / rho);
        Z1 = clip_linf(Matrix<Scalar>(resid_z - U1), linf_bound);
        Z2 = clip_spectral(Matrix<Scalar>(resid_z - U2), spec_bound);

        const Matrix<Scalar> a = S + US, b = L + UL;
        const Matrix<Scalar> c = (Z1 + I + U1) + (Z2 + I + U2);
        const Matrix<Scalar> m = a - b;
        const Matrix<Scalar> Cc = C * c;
        const Matrix<Scalar> rhs = Q.transpose() * (m + w * (Cc + Cc.transpose())) * Q;
        const Matrix<Scalar> D = symmetrize(Matrix<Scalar>(Q * rhs.cwiseQuotient(denom) * Q.transpose()));
        const Matrix<Scalar> E = a + b;
        const Matrix<Scalar> Sz_new = (E + D) / Scalar(2), Lz_new = (E - D) / Scalar(2);
        const Matrix<Scalar> resid_new = C * D - I;

        const Matrix<Scalar> rS = S - Sz_new, rL = L - Lz_new, r1 = Z1 - resid_new, r2 = Z2 - resid_new;
        US += rS;
        UL += rL;
        U1 += r1;
        U2 += r2;
        const Matrix<Scalar> dS = Sz_new - Sz, dL = Lz_new - Lz, dR = resid_new - resid_z;
        const Scalar primal = sqrt(rS.squaredNorm() + rL.squaredNorm() + w * (r1.squaredNorm() + r2.squaredNorm()));
        const Scalar dual = rho * sqrt(dS.squaredNorm() + dL.squaredNorm() + Scalar(2) * w * w * dR.squaredNorm());
        Sz = Sz_new;
        Lz = Lz_new;
        resid_z = resid_new;

        const PrecisionDecomposition<Scalar> cur{S, L};
        const auto cons = dantzig_constraints(sigma, cur, reg);
        const Scalar obj = dantzig_objective(cur, reg.gamma);
        const bool ok = cons.violation() <= slack;
        if (ok && obj < best) {
            best = obj;
            best_decomp = cur;
        }
        if (opts.record_history) report.history.push_back({ok ? obj : inf, best, primal, dual, rho});
        report.iterations = it;
        report.primal_residual = primal;
        report.dual_residual = dual;

        const Scalar scale = std::max(Scalar(1), Sz.norm() + Lz.norm());
        if (primal <= opts.tol_primal * scale && dual <= opts.tol_dual * scale && ok) {
            report.converged = true;
            break;
        }
        if (it == next_adapt) {
            Scalar next = rho;
            if (primal > Scalar(10) * dual) next = std::min(rho * Scalar(2), opts.rho_max);
            else if (dual > Scalar(10) * primal) next = std::max(rho / Scalar(2), opts.rho_min);
            if (next != rho) {
                const Scalar ratio = rho / next;
                US *= ratio;
                UL *= ratio;
                U1 *= ratio;
                U2 *= ratio;
                rho = next;
                // Back off so penalty changes stay sparse; frequent flips can make the iteration diverge.
                adapt_every = std::min(adapt_every * 2, 1 << 20);
            }
            next_adapt = it + adapt_every;
        }
    }

    const PrecisionDecomposition<Scalar> last{S, L};
    const auto cons = dantzig_constraints(sigma, last, reg);
    if (cons.violation() <= slack) {
        report.decomp = last;
        report.objective = dantzig_objective(last, reg.gamma);
        report.feasible = true;
    } else if (best < inf) {
        report.decomp = best_decomp;
        report.objective = best;
        report.feasible = true;
        report.notes.push_back("final iterate violates the constraints; reporting best feasible iterate");
    } else {
        report.decomp = last;
        report.objective = inf;
        report.feasible = false;
    }
    if (report.converged) {
        report.status = FitStatus::converged;
    } else if (!report.feasible) {
        report.status = FitStatus::infeasible;
        report.notes.push_back(detail::concat("no iterate met the constraints; final violation ", cons.violation()));
    } else {
        report.status = FitStatus::max_iterations;
    }
    return report;
}

}  // namespace lvggm
