#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "lvggm/gaussian.hpp"
#include "lvggm/kkt.hpp"
#include "lvggm/prox.hpp"
#include "lvggm/types.hpp"

namespace lvggm {

template <typename Scalar = double>
struct SolverOptions {
    int max_iter = 2000;
    Scalar tol_primal = Scalar(1e-7);
    Scalar tol_dual = Scalar(1e-7);
    /// Initial ADMM penalty ρ; rescaled adaptively within [rho_min, rho_max].
    Scalar penalty = Scalar(1);
    /// Reported solutions satisfy S - L ⪰ feasibility_floor·I.
    Scalar feasibility_floor = Scalar(1e-8);
    /// Iterations between penalty rebalancing checks.
    int adapt_interval = 10;
    Scalar rho_min = Scalar(1e-4);
    Scalar rho_max = Scalar(1e4);
    /// Pins L ≡ 0, reducing the fit to an ℓ1-penalized likelihood.
    bool sparse_only = false;
    bool record_history = true;

    void validate() const
    {
        if (max_iter < 1) throw ArgumentError(detail::concat("max_iter must be >= 1, got ", max_iter));
        if (!(tol_primal > 0) || !(tol_dual > 0)) throw ArgumentError("solver tolerances must be > 0");
        if (!(penalty > 0)) throw ArgumentError("penalty must be > 0");
        if (!(feasibility_floor >= 0)) throw ArgumentError("feasibility_floor must be >= 0");
        if (adapt_interval < 1) throw ArgumentError("adapt_interval must be >= 1");
        if (!(rho_min > 0) || !(rho_max >= rho_min)) throw ArgumentError("invalid penalty bounds");
    }
};

enum class FitStatus {
    converged,
    max_iterations,
    infeasible,
};

inline const char* to_string(FitStatus s)
{
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iterations: return "max_iterations";
        case FitStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

template <typename Scalar>
struct IterationRecord {
    /// Objective at the current (S, L); +∞ when S - L is not PD.
    Scalar objective;
    /// Best objective over feasible iterates so far.
    Scalar merit;
    Scalar primal_residual;
    Scalar dual_residual;
    Scalar penalty;
};

template <typename Scalar = double>
struct FitReport {
    PrecisionDecomposition<Scalar> decomp;
    Scalar objective = std::numeric_limits<Scalar>::infinity();
    int iterations = 0;
    Scalar primal_residual = std::numeric_limits<Scalar>::infinity();
    Scalar dual_residual = std::numeric_limits<Scalar>::infinity();
    bool converged = false;
    FitStatus status = FitStatus::max_iterations;
    /// Whether decomp satisfies L ⪰ 0 and S - L ⪰ floor·I.
    bool feasible = false;
    std::string initialization = "default";
    std::vector<IterationRecord<Scalar>> history;
    std::vector<std::string> notes;
};

namespace detail {

enum class LowRankBlock {
    trace_psd,  ///< weight·trace(L) + indicator(L ⪰ 0)
    zero,       ///< L ≡ 0
    fixed,      ///< L ≡ a given matrix
};

/// min -ℓ(S-L; Σ) + sparse_weight‖S‖₁ + lowrank_weight·trace(L)
/// with the L block chosen by `mode`.
template <typename Scalar>
struct LikelihoodProblem {
    const SampleCovariance<Scalar>* sigma = nullptr;
    Scalar sparse_weight = Scalar(0);
    Scalar lowrank_weight = Scalar(0);
    LowRankBlock mode = LowRankBlock::trace_psd;
    Matrix<Scalar> fixed_L;
    /// When positive, convergence also requires kkt_report(...).max() ≤ kkt_bound.
    Scalar kkt_bound = Scalar(0);
};

/// Objective value at (S, L); +∞ when S - L is not PD. Uses a Cholesky
/// factorization, so it is only a cheap screen for positive definiteness.
template <typename Scalar>
Scalar likelihood_objective(const LikelihoodProblem<Scalar>& prob, const Matrix<Scalar>& S, const Matrix<Scalar>& L)
{
    const Matrix<Scalar> K = S - L;
    const Eigen::LLT<Matrix<Scalar>> chol(K);
    if (chol.info() != Eigen::Success) return std::numeric_limits<Scalar>::infinity();
    using std::log;
    const Scalar logdet = Scalar(2) * chol.matrixLLT().diagonal().array().log().sum();
    if (!std::isfinite(double(logdet))) return std::numeric_limits<Scalar>::infinity();
    return -logdet + K.cwiseProduct(prob.sigma->matrix()).sum() + prob.sparse_weight * l1_norm(S) +
           prob.lowrank_weight * L.trace();
}

/// Consensus ADMM over x = (R, S, L), z = (S', L') with R = S' - L', S = S', L = L'.
///
/// The x-update is three closed-form proxes; the z-update is a per-entry 2×2
/// least-squares solve. The reported (S, L) is the x-block, so S carries exact
/// zeros and L is exactly PSD.
template <typename Scalar>
FitReport<Scalar> consensus_admm(const LikelihoodProblem<Scalar>& prob, const PrecisionDecomposition<Scalar>& init,
                                 const SolverOptions<Scalar>& opts)
{
    using std::sqrt;
    const Matrix<Scalar>& sigma = prob.sigma->matrix();
    const Eigen::Index p = sigma.rows();
    const Scalar inf = std::numeric_limits<Scalar>::infinity();

    Matrix<Scalar> S = init.S, L = init.L;
    if (prob.mode == LowRankBlock::zero) L.setZero(p, p);
    if (prob.mode == LowRankBlock::fixed) L = prob.fixed_L;
    Matrix<Scalar> Sz = S, Lz = L, R = S - L;
    Matrix<Scalar> UR = Matrix<Scalar>::Zero(p, p), US = UR, UL = UR;
    Scalar rho = std::clamp(opts.penalty, opts.rho_min, opts.rho_max);

    FitReport<Scalar> report;
    Scalar best = inf;
    Matrix<Scalar> bestS, bestL;
    Scalar last_objective = inf;

    for (int it = 1; it <= opts.max_iter; ++it) {
        R = logdet_prox(Sz - Lz - UR, sigma, rho);
        S = soft_threshold(Sz - US, prob.sparse_weight / rho);
        switch (prob.mode) {
            case LowRankBlock::trace_psd: L = psd_trace_prox(Lz - UL, prob.lowrank_weight / rho); break;
            case LowRankBlock::zero: L.setZero(p, p); break;
            case LowRankBlock::fixed: L = prob.fixed_L; break;
        }

        const Matrix<Scalar> a = R + UR, b = S + US, c = L + UL;
        const Matrix<Scalar> Sz_new = (a + Scalar(2) * b + c) / Scalar(3);
        const Matrix<Scalar> Lz_new = (b - a + Scalar(2) * c) / Scalar(3);
        const Matrix<Scalar> rR = R - (Sz_new - Lz_new), rS = S - Sz_new, rL = L - Lz_new;
        UR += rR;
        US += rS;
        UL += rL;

        const Matrix<Scalar> dS = Sz_new - Sz, dL = Lz_new - Lz;
        const Scalar primal = sqrt(rR.squaredNorm() + rS.squaredNorm() + rL.squaredNorm());
        const Scalar dual = rho * sqrt((dS - dL).squaredNorm() + dS.squaredNorm() + dL.squaredNorm());
        Sz = Sz_new;
        Lz = Lz_new;

        const Scalar objective = likelihood_objective(prob, S, L);
        last_objective = objective;
        if (objective < best) {
            best = objective;
            bestS = S;
            bestL = L;
        }
        if (opts.record_history) report.history.push_back({objective, best, primal, dual, rho});

        report.iterations = it;
        report.primal_residual = primal;
        report.dual_residual = dual;

        const Scalar scale = std::max(Scalar(1), R.norm());
        if (primal <= opts.tol_primal * scale && dual <= opts.tol_dual * scale && objective < inf &&
            min_eigenvalue(Matrix<Scalar>(S - L)) >= opts.feasibility_floor) {
            const bool certified =
                !(prob.kkt_bound > Scalar(0)) ||
                kkt_report(*prob.sigma, PrecisionDecomposition<Scalar>{S, L},
                           RegularizationParams<Scalar>{prob.lowrank_weight, prob.sparse_weight / prob.lowrank_weight})
                        .max() <= prob.kkt_bound;
            if (certified) {
                report.converged = true;
                break;
            }
        }

        if (it % opts.adapt_interval == 0) {
            Scalar next = rho;
            if (primal > Scalar(10) * dual) next = std::min(rho * Scalar(2), opts.rho_max);
            else if (dual > Scalar(10) * primal) next = std::max(rho / Scalar(2), opts.rho_min);
            if (next != rho) {
                const Scalar ratio = rho / next;
                UR *= ratio;
                US *= ratio;
                UL *= ratio;
                rho = next;
            }
        }
    }

    report.status = report.converged ? FitStatus::converged : FitStatus::max_iterations;
    if (last_objective < inf && min_eigenvalue(Matrix<Scalar>(S - L)) >= opts.feasibility_floor) {
        report.decomp = {S, L};
        report.objective = last_objective;
        report.feasible = true;
    } else if (best < inf) {
        report.decomp = {bestS, bestL};
        report.objective = best;
        report.feasible = min_eigenvalue(Matrix<Scalar>(bestS - bestL)) >= opts.feasibility_floor;
        report.notes.push_back("final iterate infeasible; reporting best feasible iterate");
    } else {
        report.decomp = {S, L};
        report.objective = inf;
        report.feasible = false;
        report.notes.push_back("no feasible iterate was produced");
    }
    return report;
}

template <typename Scalar>
Matrix<Scalar> diagonal_start(const SampleCovariance<Scalar>& sigma, Scalar sparse_weight)
{
    const Vector<Scalar> d = sigma.matrix().diagonal().array() + sparse_weight;
    const Scalar floor = std::max(Scalar(1e-8), Scalar(1e-8) * sigma.matrix().diagonal().maxCoeff());
    return d.cwiseMax(floor).cwiseInverse().asDiagonal();
}

template <typename Scalar>
void require_invertible_if_unregularized(const SampleCovariance<Scalar>& sigma, Scalar lambda)
{
    if (lambda > Scalar(0)) return;
    const auto ev = symmetric_eigenvalues(sigma.matrix());
    const Scalar hi = ev(ev.size() - 1);
    if (!(ev(0) > Scalar(1e-10) * std::max(hi, Scalar(1e-300)))) {
        throw DomainError(concat("lambda = 0 requires a positive definite covariance; smallest eigenvalue ", ev(0)));
    }
}

}  // namespace detail

/// Regularized maximum-likelihood sparse-plus-low-rank fit:
///
///     min -ℓ(S-L; Σ) + λ(γ‖S‖₁ + trace L)   s.t. S - L ≻ 0, L ⪰ 0.
///
/// Convergence needs the scaled ADMM residuals below tolerance and, for λ > 0,
/// KKT residuals within 10·max(tol_primal, tol_dual). A report with
/// converged == false is returned when the iteration cap is hit.
template <typename Scalar>
FitReport<Scalar> fit_mle(const SampleCovariance<Scalar>& sigma, const RegularizationParams<Scalar>& reg,
                          const SolverOptions<Scalar>& opts = {},
                          const std::optional<PrecisionDecomposition<std::type_identity_t<Scalar>>>& init = std::nullopt)
{
    reg.validate();
    opts.validate();
    detail::require_invertible_if_unregularized(sigma, reg.lambda);

    detail::LikelihoodProblem<Scalar> prob;
    prob.sigma = &sigma;
    prob.sparse_weight = reg.lambda * reg.gamma;
    prob.lowrank_weight = reg.lambda;
    prob.mode = opts.sparse_only ? detail::LowRankBlock::zero : detail::LowRankBlock::trace_psd;
    if (!opts.sparse_only && reg.lambda > Scalar(0)) {
        prob.kkt_bound = Scalar(10) * std::max(opts.tol_primal, opts.tol_dual);
    }

    PrecisionDecomposition<Scalar> start;
    std::string init_kind = "default";
    if (init) {
        if (init->S.rows() != sigma.p() || check_feasibility(*init) != Feasibility::feasible) {
            throw ArgumentError("initial decomposition is infeasible");
        }
        start = *init;
        init_kind = "user";
    } else {
        start.S = detail::diagonal_start(sigma, prob.sparse_weight);
        start.L = Matrix<Scalar>::Zero(sigma.p(), sigma.p());
    }
    auto report = detail::consensus_admm(prob, start, opts);
    report.initialization = init_kind;
    return report;
}

}  // namespace lvggm
