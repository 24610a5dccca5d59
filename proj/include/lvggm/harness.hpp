#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvggm/alternatives.hpp"
#include "lvggm/diagnostics.hpp"
#include "lvggm/solver.hpp"
#include "lvggm/synth.hpp"

namespace lvggm::harness {

enum class Estimator { mle, em, threshold, dantzig, composite };

Estimator parse_estimator(const std::string& name);
const char* to_string(Estimator e);

struct FitConfig {
    Estimator estimator = Estimator::mle;
    double lambda = 0.1;
    double gamma = 1.0;
    /// Rank cap for the alternating estimator.
    Eigen::Index rank = 0;
    /// Threshold estimator; unset values default to the √(log p/n), √(p/n) scaling.
    std::optional<double> t_sparse;
    std::optional<double> t_spectral;
    ThresholdMode sparse_mode = ThresholdMode::hard;
    ThresholdMode spectral_mode = ThresholdMode::hard;
    SolverOptions<double> solver;
    double rank_tol = 1e-6;
    /// Support threshold for metrics; unset means 1e-6·max|S*| (or max|Ŝ| without truth).
    std::optional<double> zero_tol;

    void validate() const;
};

struct FitOutcome {
    FitReport<double> report;
    std::optional<KktReport<double>> kkt;
    std::optional<RecoveryMetrics<double>> metrics;
    /// Off-diagonal pairs of Ŝ above the support threshold.
    Eigen::Index support_size = 0;
    double wall_time_ms = 0.0;
    /// Non-empty when the estimator raised an error.
    std::string error;
    /// 0 converged, 2 not converged, 1 error.
    int exit_code = 1;
};

/// Runs one estimator on Σ. Estimator errors are captured in the outcome.
FitOutcome run_fit(const SampleCovariance<double>& sigma, const std::optional<SyntheticModel<double>>& truth,
                   const FitConfig& config);

/// Report document. `with_time` controls the wall_time_ms key.
nlohmann::json fit_to_json(const FitOutcome& outcome, const FitConfig& config, Eigen::Index p, bool with_time = true);

/// "a,b,c" or "lo:hi:count" (count values evenly spaced in log10 between lo and hi).
std::vector<double> parse_grid(const std::string& spec);

struct SweepConfig {
    FitConfig base;
    std::vector<double> lambdas;
    std::vector<double> gammas;
    unsigned jobs = 1;

    void validate() const;
};

struct SweepRow {
    double lambda = 0.0;
    std::vector<StabilityInterval<double>> intervals;
};

struct SweepResult {
    /// Row-major over (lambda, gamma).
    std::vector<FitOutcome> cells;
    std::vector<SweepRow> rows;

    const FitOutcome& cell(std::size_t li, std::size_t gi, std::size_t n_gamma) const
    {
        return cells[li * n_gamma + gi];
    }
};

/// Cells run on `jobs` threads and are stored by grid index.
SweepResult run_sweep(const SampleCovariance<double>& sigma, const std::optional<SyntheticModel<double>>& truth,
                      const SweepConfig& config);

struct RecoveryInterval {
    double lambda = 0.0;
    StabilityInterval<double> interval;
};

/// Widest exact-recovery interval over all λ rows (by γ_hi/γ_lo).
std::optional<RecoveryInterval> best_recovery(const SweepResult& result);

/// Header: lambda,gamma,status,converged,objective,iterations,support_size,rank,
/// sign_consistent,loss_linf,loss_spectral,loss_frob_total. Metric columns are
/// empty without truth.
std::string sweep_csv(const SweepResult& result, const SweepConfig& config);

nlohmann::json sweep_to_json(const SweepResult& result, const SweepConfig& config, Eigen::Index p,
                             bool with_time = false);

/// Support threshold used for the cell statistics.
double effective_zero_tol(const FitConfig& config, const MatrixXd& S_est,
                          const std::optional<SyntheticModel<double>>& truth);

}  // namespace lvggm::harness
