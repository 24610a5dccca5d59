#include "lvggm/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "lvggm/composite.hpp"
#include "lvggm/report.hpp"

namespace lvggm::harness {

namespace {

nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

FitReport<double> dispatch(const SampleCovariance<double>& sigma, const FitConfig& config, std::optional<double>* kkt_lambda)
{
    const RegularizationParams<double> reg{config.lambda, config.gamma};
    switch (config.estimator) {
        case Estimator::mle: {
            *kkt_lambda = config.lambda;
            return fit_mle(sigma, reg, config.solver);
        }
        case Estimator::composite: {
            *kkt_lambda = config.lambda;
            auto fit = fit_via_composite(sigma, reg, config.solver);
            FitReport<double> out = std::move(fit.report);
            out.decomp = {fit.decomposition.S, fit.decomposition.L};
            out.objective = fit.total_objective;
            out.converged = out.converged && fit.decomposition.converged;
            if (!fit.decomposition.converged) {
                out.status = FitStatus::max_iterations;
                out.notes.push_back("composite split did not converge");
            }
            out.feasible = check_feasibility(out.decomp) == Feasibility::feasible;
            return out;
        }
        case Estimator::em: {
            AlternatingOptions<double> alt;
            alt.inner = config.solver;
            return fit_em_rank(sigma, config.lambda, RankConstraint{config.rank}, std::nullopt, alt);
        }
        case Estimator::dantzig: return fit_dantzig(sigma, reg, config.solver);
        case Estimator::threshold: {
            ThresholdParams<double> thr;
            if (!config.t_sparse || !config.t_spectral) {
                if (sigma.is_population()) {
                    throw ArgumentError("threshold estimator on a population covariance needs explicit "
                                        "--t-sparse and --t-spectral");
                }
                thr = ThresholdParams<double>::scaled(sigma.p(), sigma.n());
            }
            if (config.t_sparse) thr.t_sparse = *config.t_sparse;
            if (config.t_spectral) thr.t_spectral = *config.t_spectral;
            thr.sparse_mode = config.sparse_mode;
            thr.spectral_mode = config.spectral_mode;
            return fit_two_step_threshold(sigma, thr);
        }
    }
    throw ArgumentError("unknown estimator");
}

nlohmann::json interval_to_json(const StabilityInterval<double>& iv)
{
    nlohmann::json j{{"gamma_lo", iv.gamma_lo},
                     {"gamma_hi", iv.gamma_hi},
                     {"ratio", iv.ratio()},
                     {"first", iv.first},
                     {"last", iv.last},
                     {"support_size", iv.support_size},
                     {"rank", iv.rank}};
    if (iv.exact_recovery) j["exact_recovery"] = *iv.exact_recovery;
    return j;
}

}  // namespace

Estimator parse_estimator(const std::string& name)
{
    if (name == "mle") return Estimator::mle;
    if (name == "em") return Estimator::em;
    if (name == "threshold") return Estimator::threshold;
    if (name == "dantzig") return Estimator::dantzig;
    if (name == "composite") return Estimator::composite;
    throw ArgumentError("unknown estimator '" + name + "' (expected mle, em, threshold, dantzig or composite)");
}

const char* to_string(Estimator e)
{
    switch (e) {
        case Estimator::mle: return "mle";
        case Estimator::em: return "em";
        case Estimator::threshold: return "threshold";
        case Estimator::dantzig: return "dantzig";
        case Estimator::composite: return "composite";
    }
    return "unknown";
}

void FitConfig::validate() const
{
    solver.validate();
    if (!std::isfinite(lambda) || lambda < 0) throw ArgumentError(detail::concat("lambda must be >= 0, got ", lambda));
    if (!std::isfinite(gamma) || gamma <= 0) throw ArgumentError(detail::concat("gamma must be > 0, got ", gamma));
    if (rank < 0) throw ArgumentError("rank must be >= 0");
    if (!(rank_tol > 0)) throw ArgumentError("rank_tol must be > 0");
    if (zero_tol && !(*zero_tol >= 0)) throw ArgumentError("zero_tol must be >= 0");
    if (t_sparse && !(*t_sparse >= 0)) throw ArgumentError("t_sparse must be >= 0");
    if (t_spectral && !(*t_spectral >= 0)) throw ArgumentError("t_spectral must be >= 0");
}

double effective_zero_tol(const FitConfig& config, const MatrixXd& S_est,
                          const std::optional<SyntheticModel<double>>& truth)
{
    if (config.zero_tol) return *config.zero_tol;
    return truth ? default_zero_tol(truth->S_star) : default_zero_tol(S_est);
}

FitOutcome run_fit(const SampleCovariance<double>& sigma, const std::optional<SyntheticModel<double>>& truth,
                   const FitConfig& config)
{
    FitOutcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        config.validate();
        if (truth && truth->p() != sigma.p()) {
            throw ArgumentError(detail::concat("truth has p = ", truth->p(), " but the covariance is ", sigma.p(), "x",
                                               sigma.p()));
        }
        std::optional<double> kkt_lambda;
        out.report = dispatch(sigma, config, &kkt_lambda);
        if (kkt_lambda && *kkt_lambda > 0 && out.report.feasible) {
            out.kkt = kkt_report(sigma, out.report.decomp, RegularizationParams<double>{*kkt_lambda, config.gamma});
        }
        const double zero_tol = effective_zero_tol(config, out.report.decomp.S, truth);
        const auto pattern = sign_pattern(out.report.decomp.S, zero_tol);
        out.support_size = std::count_if(pattern.begin(), pattern.end(), [](signed char c) { return c != 0; });
        if (truth) out.metrics = recovery_metrics(out.report.decomp, *truth, zero_tol, config.rank_tol);
        out.exit_code = out.report.converged ? 0 : 2;
    } catch (const std::exception& e) {
        out.error = e.what();
        out.exit_code = 1;
    }
    out.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

nlohmann::json fit_to_json(const FitOutcome& outcome, const FitConfig& config, Eigen::Index p, bool with_time)
{
    nlohmann::json j;
    j["estimator"] = to_string(config.estimator);
    j["lambda"] = config.lambda;
    j["gamma"] = config.gamma;
    if (config.estimator == Estimator::em) j["rank"] = config.rank;
    j["p"] = p;
    if (!outcome.error.empty()) {
        j["error"] = outcome.error;
        j["converged"] = false;
        j["exit_code"] = outcome.exit_code;
        if (with_time) j["wall_time_ms"] = outcome.wall_time_ms;
        return j;
    }
    const auto& r = outcome.report;
    j["objective"] = number_or_null(r.objective);
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["status"] = to_string(r.status);
    j["feasible"] = r.feasible;
    j["primal_residual"] = number_or_null(r.primal_residual);
    j["dual_residual"] = number_or_null(r.dual_residual);
    j["kkt"] = outcome.kkt ? report::kkt_to_json(*outcome.kkt) : nlohmann::json(nullptr);
    j["S"] = report::sparse_triplets(r.decomp.S);
    j["L"] = report::eigenpairs(r.decomp.L, config.rank_tol);
    j["rank_tol"] = config.rank_tol;
    j["support_size"] = outcome.support_size;
    if (outcome.metrics) j["metrics"] = report::metrics_to_json(*outcome.metrics);
    j["notes"] = r.notes;
    j["exit_code"] = outcome.exit_code;
    if (with_time) j["wall_time_ms"] = outcome.wall_time_ms;
    return j;
}

std::vector<double> parse_grid(const std::string& spec)
{
    const auto parse_value = [&spec](const std::string& token) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (token.empty() || used != token.size() || !std::isfinite(v)) {
            throw ArgumentError("bad grid value '" + token + "' in '" + spec + "'");
        }
        return v;
    };
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() != 3) throw ArgumentError("log grid must be lo:hi:count, got '" + spec + "'");
        const double lo = parse_value(parts[0]), hi = parse_value(parts[1]);
        std::size_t used = 0;
        long count = 0;
        try {
            count = std::stol(parts[2], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != parts[2].size() || count < 1) throw ArgumentError("grid count must be a positive integer in '" + spec + "'");
        if (!(lo > 0) || !(hi > 0)) throw ArgumentError("log grid bounds must be > 0 in '" + spec + "'");
        if (count == 1) {
            if (lo != hi) throw ArgumentError("a one-point log grid needs lo == hi in '" + spec + "'");
            return {lo};
        }
        const double a = std::log10(lo), b = std::log10(hi);
        for (long k = 0; k < count; ++k) {
            out.push_back(k == 0 ? lo : k == count - 1 ? hi : std::pow(10.0, a + (b - a) * double(k) / double(count - 1)));
        }
    } else {
        std::stringstream ss(spec);
        for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_value(part));
    }
    if (out.empty()) throw ArgumentError("empty grid '" + spec + "'");
    return out;
}

void SweepConfig::validate() const
{
    if (lambdas.empty() || gammas.empty()) throw ArgumentError("sweep grids must be non-empty");
    for (std::size_t k = 1; k < gammas.size(); ++k) {
        if (!(gammas[k - 1] < gammas[k])) throw ArgumentError("gamma grid must be strictly increasing");
    }
    for (double l : lambdas) {
        if (!(l > 0) && base.estimator != Estimator::threshold) {
            throw ArgumentError(detail::concat("lambda values must be > 0, got ", l));
        }
    }
    if (jobs < 1) throw ArgumentError("jobs must be >= 1");
}

SweepResult run_sweep(const SampleCovariance<double>& sigma, const std::optional<SyntheticModel<double>>& truth,
                      const SweepConfig& config)
{
    config.validate();
    const std::size_t ng = config.gammas.size(), total = config.lambdas.size() * ng;
    SweepResult out;
    out.cells.resize(total);

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t k = next.fetch_add(1); k < total; k = next.fetch_add(1)) {
            FitConfig cell = config.base;
            cell.lambda = config.lambdas[k / ng];
            cell.gamma = config.gammas[k % ng];
            out.cells[k] = run_fit(sigma, truth, cell);
        }
    };
    const unsigned width = static_cast<unsigned>(std::min<std::size_t>(config.jobs, total));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < width; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::optional<PrecisionDecomposition<double>> truth_decomp;
    if (truth) truth_decomp = truth->truth();
    StabilityOptions<double> sopts;
    sopts.zero_tol = config.base.zero_tol;
    sopts.rank_tol = config.base.rank_tol;
    for (std::size_t li = 0; li < config.lambdas.size(); ++li) {
        SweepRow row;
        row.lambda = config.lambdas[li];
        // Failed cells split the row into independently analysed segments.
        std::size_t gi = 0;
        while (gi < ng) {
            if (!out.cell(li, gi, ng).error.empty()) {
                ++gi;
                continue;
            }
            std::vector<std::pair<double, FitReport<double>>> segment;
            const std::size_t begin = gi;
            for (; gi < ng && out.cell(li, gi, ng).error.empty(); ++gi) {
                segment.emplace_back(config.gammas[gi], out.cell(li, gi, ng).report);
            }
            for (auto iv : gamma_stability(segment, truth_decomp, sopts)) {
                iv.first += begin;
                iv.last += begin;
                row.intervals.push_back(iv);
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::optional<RecoveryInterval> best_recovery(const SweepResult& result)
{
    std::optional<RecoveryInterval> best;
    for (const auto& row : result.rows) {
        for (const auto& iv : row.intervals) {
            if (!iv.exact_recovery.value_or(false)) continue;
            if (!best || iv.ratio() > best->interval.ratio()) best = RecoveryInterval{row.lambda, iv};
        }
    }
    return best;
}

std::string sweep_csv(const SweepResult& result, const SweepConfig& config)
{
    using report::format_number;
    std::ostringstream os;
    os << "lambda,gamma,status,converged,objective,iterations,support_size,rank,sign_consistent,loss_linf,"
          "loss_spectral,loss_frob_total\n";
    const std::size_t ng = config.gammas.size();
    for (std::size_t li = 0; li < config.lambdas.size(); ++li) {
        for (std::size_t gi = 0; gi < ng; ++gi) {
            const auto& c = result.cell(li, gi, ng);
            os << format_number(config.lambdas[li]) << ',' << format_number(config.gammas[gi]) << ',';
            if (!c.error.empty()) {
                os << "error,false,,,,,,,,\n";
                continue;
            }
            const auto& r = c.report;
            os << to_string(r.status) << ',' << (r.converged ? "true" : "false") << ',' << format_number(r.objective)
               << ',' << r.iterations << ',' << c.support_size << ',' << numerical_rank(r.decomp.L, config.base.rank_tol)
               << ',';
            if (c.metrics) {
                const auto& m = *c.metrics;
                os << (m.sign_consistent ? "true" : "false") << ',' << format_number(m.loss_linf) << ','
                   << format_number(m.loss_spectral) << ',' << format_number(m.loss_frob_total);
            } else {
                os << ",,,";
            }
            os << '\n';
        }
    }
    return os.str();
}

nlohmann::json sweep_to_json(const SweepResult& result, const SweepConfig& config, Eigen::Index p, bool with_time)
{
    nlohmann::json j;
    j["kind"] = "sweep";
    j["estimator"] = to_string(config.base.estimator);
    j["lambdas"] = config.lambdas;
    j["gammas"] = config.gammas;
    auto cells = nlohmann::json::array();
    const std::size_t ng = config.gammas.size();
    for (std::size_t k = 0; k < result.cells.size(); ++k) {
        FitConfig cell = config.base;
        cell.lambda = config.lambdas[k / ng];
        cell.gamma = config.gammas[k % ng];
        cells.push_back(fit_to_json(result.cells[k], cell, p, with_time));
    }
    j["cells"] = std::move(cells);
    auto rows = nlohmann::json::array();
    for (const auto& row : result.rows) {
        auto ivs = nlohmann::json::array();
        for (const auto& iv : row.intervals) ivs.push_back(interval_to_json(iv));
        rows.push_back({{"lambda", row.lambda}, {"intervals", std::move(ivs)}});
    }
    j["stability"] = std::move(rows);
    if (const auto best = best_recovery(result)) {
        j["best_recovery"] = {{"lambda", best->lambda}, {"interval", interval_to_json(best->interval)}};
    } else {
        j["best_recovery"] = nullptr;
    }
    return j;
}

}  // namespace lvggm::harness
