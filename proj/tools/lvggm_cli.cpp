#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lvggm/composite.hpp"
#include "lvggm/harness.hpp"
#include "lvggm/io.hpp"
#include "lvggm/report.hpp"

using namespace lvggm;

namespace {

struct InputArgs {
    std::string path;
    std::string format;
    bool header = false;
    bool center = false;
    long samples = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::string truth;
};

struct SolverArgs {
    std::optional<double> tol;
    std::optional<int> max_iter;
};

void add_input(CLI::App* cmd, InputArgs& in, bool with_truth)
{
    cmd->add_option("--input", in.path, "Input file")->required();
    cmd->add_option("--format", in.format, "csv-samples, mtx-covariance or model-json (default: from extension)");
    cmd->add_flag("--header", in.header, "Skip one header line in CSV input");
    cmd->add_flag("--center", in.center, "Subtract the column means of CSV samples");
    cmd->add_option("--samples", in.samples, "Draw this many samples from a model-json input")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", in.seed, "Sampling seed for model-json input");
    cmd->add_option("--n", in.n, "Sample count of an mtx-covariance input (0: population)");
    if (with_truth) cmd->add_option("--truth", in.truth, "Ground-truth model JSON for recovery metrics");
}

void add_solver(CLI::App* cmd, SolverArgs& s)
{
    cmd->add_option("--tol", s.tol, "Primal and dual stopping tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", s.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
}

void apply_solver(const SolverArgs& s, SolverOptions<double>& opts)
{
    if (s.tol) opts.tol_primal = opts.tol_dual = *s.tol;
    if (s.max_iter) opts.max_iter = *s.max_iter;
}

io::Format infer_format(const InputArgs& in)
{
    if (!in.format.empty()) return io::parse_format(in.format);
    const auto ends_with = [&](const char* ext) {
        const std::string e(ext);
        return in.path.size() >= e.size() && in.path.compare(in.path.size() - e.size(), e.size(), e) == 0;
    };
    if (ends_with(".csv")) return io::Format::csv_samples;
    if (ends_with(".mtx")) return io::Format::mtx_covariance;
    if (ends_with(".json")) return io::Format::model_json;
    throw ArgumentError("cannot infer the format of '" + in.path + "'; pass --format");
}

io::LoadedInput load(const InputArgs& in)
{
    io::ReadOptions ro;
    ro.skip_header = in.header;
    ro.center = in.center;
    ro.samples = in.samples;
    ro.seed = in.seed;
    ro.declared_n = in.n;
    auto loaded = io::read_input(in.path, infer_format(in), ro);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    if (!in.truth.empty()) loaded.model = io::model_from_json(io::read_json(in.truth));
    return loaded;
}

void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        io::write_text(path, text);
    }
}

ThresholdMode parse_mode(const std::string& s)
{
    if (s == "hard") return ThresholdMode::hard;
    if (s == "soft") return ThresholdMode::soft;
    throw ArgumentError("threshold mode must be hard or soft, got '" + s + "'");
}

struct FitArgs {
    InputArgs in;
    SolverArgs solver;
    std::string estimator = "mle";
    std::string lambda = "0.1";
    std::string gamma = "1";
    long rank = 0;
    std::optional<double> t_sparse, t_spectral;
    std::string sparse_mode = "hard", spectral_mode = "hard";
    double rank_tol = 1e-6;
    std::optional<double> zero_tol;
    std::string output;
};

void add_fit_options(CLI::App* cmd, FitArgs& a, bool grids)
{
    add_input(cmd, a.in, true);
    add_solver(cmd, a.solver);
    cmd->add_option("--estimator", a.estimator, "mle, em, threshold, dantzig or composite");
    cmd->add_option("--lambda", a.lambda, grids ? "Lambda grid: a,b,c or lo:hi:count (log10-spaced)" : "Lambda");
    cmd->add_option("--gamma", a.gamma, grids ? "Gamma grid: a,b,c or lo:hi:count (log10-spaced)" : "Gamma");
    cmd->add_option("--rank", a.rank, "Rank cap for the em estimator")->check(CLI::NonNegativeNumber);
    cmd->add_option("--t-sparse", a.t_sparse, "Entrywise threshold for the threshold estimator");
    cmd->add_option("--t-spectral", a.t_spectral, "Spectral threshold for the threshold estimator");
    cmd->add_option("--sparse-mode", a.sparse_mode, "hard or soft");
    cmd->add_option("--spectral-mode", a.spectral_mode, "hard or soft");
    cmd->add_option("--rank-tol", a.rank_tol, "Relative eigenvalue cutoff for rank and reported eigenpairs");
    cmd->add_option("--zero-tol", a.zero_tol, "Absolute cutoff for the support of S");
    cmd->add_option("--output", a.output, "Output JSON path (default: stdout)");
}

harness::FitConfig make_config(const FitArgs& a)
{
    harness::FitConfig c;
    c.estimator = harness::parse_estimator(a.estimator);
    c.rank = a.rank;
    c.t_sparse = a.t_sparse;
    c.t_spectral = a.t_spectral;
    c.sparse_mode = parse_mode(a.sparse_mode);
    c.spectral_mode = parse_mode(a.spectral_mode);
    apply_solver(a.solver, c.solver);
    c.rank_tol = a.rank_tol;
    c.zero_tol = a.zero_tol;
    return c;
}

double single_value(const std::string& text, const char* name)
{
    const auto grid = harness::parse_grid(text);
    if (grid.size() != 1) throw ArgumentError(std::string(name) + " must be a single value for fit");
    return grid.front();
}

int cmd_fit(const FitArgs& a)
{
    const auto loaded = load(a.in);
    auto config = make_config(a);
    config.lambda = single_value(a.lambda, "--lambda");
    config.gamma = single_value(a.gamma, "--gamma");
    const auto outcome = harness::run_fit(loaded.sigma, loaded.model, config);
    emit(a.output, harness::fit_to_json(outcome, config, loaded.sigma.p()).dump(2) + "\n");
    if (!outcome.error.empty()) std::cerr << "error: " << outcome.error << "\n";
    return outcome.exit_code;
}

int cmd_sweep(const FitArgs& a, unsigned jobs, const std::string& csv, bool timing)
{
    const auto loaded = load(a.in);
    harness::SweepConfig config;
    config.base = make_config(a);
    config.base.solver.record_history = false;
    config.lambdas = harness::parse_grid(a.lambda);
    config.gammas = harness::parse_grid(a.gamma);
    config.jobs = jobs;
    const auto result = harness::run_sweep(loaded.sigma, loaded.model, config);
    emit(a.output, harness::sweep_to_json(result, config, loaded.sigma.p(), timing).dump(2) + "\n");
    if (!csv.empty()) io::write_text(csv, harness::sweep_csv(result, config));
    for (const auto& c : result.cells) {
        if (!c.error.empty()) return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse plus low-rank precision estimation for latent-variable Gaussian graphical models"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic latent-variable model (and samples)");
    GeneratorParams gp;
    gp.p = 40;
    gp.h = 2;
    gp.max_degree = 4;
    gp.edge_strength = 1.0;
    gp.latent_strength = 10.0;
    std::string gen_output, gen_csv;
    long gen_samples = 0;
    std::uint64_t sample_seed = 1;
    gen->set_help_flag("--help", "Print this help message and exit");
    gen->add_option("--p", gp.p, "Observed variables")->capture_default_str();
    gen->add_option("--h", gp.h, "Latent variables")->capture_default_str();
    gen->add_option("--max-degree", gp.max_degree, "Degree bound of the conditional graph")->capture_default_str();
    gen->add_option("--fanout", gp.latent_fanout, "Fraction of observed nodes each latent couples to")
        ->capture_default_str();
    gen->add_option("--edge-strength", gp.edge_strength, "Magnitude of graph edge weights")->capture_default_str();
    gen->add_option("--latent-strength", gp.latent_strength, "Latent coupling scale")->capture_default_str();
    gen->add_option("--seed", gp.seed, "Model seed")->capture_default_str();
    gen->add_option("--output", gen_output, "Model JSON path (default: stdout)");
    gen->add_option("--samples", gen_samples, "Also draw this many samples")->check(CLI::NonNegativeNumber);
    gen->add_option("--sample-seed", sample_seed, "Seed for the samples")->capture_default_str();
    gen->add_option("--csv", gen_csv, "Samples CSV path (required with --samples)");

    // fit / sweep
    FitArgs fit_args, sweep_args;
    auto* fit = app.add_subcommand("fit", "Fit one estimator at a single (lambda, gamma)");
    add_fit_options(fit, fit_args, false);
    auto* sweep = app.add_subcommand("sweep", "Fit over a (lambda, gamma) grid with a stability summary");
    add_fit_options(sweep, sweep_args, true);
    unsigned jobs = 1;
    std::string sweep_csv_path;
    bool timing = false;
    sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sweep->add_option("--csv", sweep_csv_path, "Aggregate CSV path");
    sweep->add_flag("--timing", timing, "Include per-cell wall time in the JSON (not reproducible)");

    // decompose
    auto* dec = app.add_subcommand("decompose", "Composite norm of a symmetric matrix");
    std::string dec_input, dec_output;
    double dec_gamma = 1.0, dec_rank_tol = 1e-6;
    SolverArgs dec_solver;
    dec->add_option("--input", dec_input, "MatrixMarket matrix")->required();
    dec->add_option("--gamma", dec_gamma, "Trade-off parameter")->check(CLI::PositiveNumber);
    dec->add_option("--rank-tol", dec_rank_tol, "Relative eigenvalue cutoff for reported eigenpairs");
    dec->add_option("--output", dec_output, "Output JSON path (default: stdout)");
    add_solver(dec, dec_solver);

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "Feasibility, objective, KKT residuals and metrics of a given (S, L)");
    InputArgs diag_in;
    std::string diag_decomp, diag_output;
    std::optional<double> diag_lambda, diag_gamma, diag_zero_tol;
    double diag_rank_tol = 1e-6;
    add_input(diag, diag_in, true);
    diag->add_option("--decomp", diag_decomp, "Fit report JSON holding S and L")->required();
    diag->add_option("--lambda", diag_lambda, "Lambda (default: from the report)");
    diag->add_option("--gamma", diag_gamma, "Gamma (default: from the report)");
    diag->add_option("--rank-tol", diag_rank_tol, "Relative eigenvalue cutoff for rank");
    diag->add_option("--zero-tol", diag_zero_tol, "Absolute cutoff for the support of S");
    diag->add_option("--output", diag_output, "Output JSON path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            if (gen_samples > 0 && gen_csv.empty()) throw ArgumentError("--samples needs --csv");
            const auto model = generate_latent_model<double>(gp);
            emit(gen_output, io::model_to_json(model).dump(2) + "\n");
            if (gen_samples > 0) io::write_csv_samples(gen_csv, draw_samples(model, gen_samples, sample_seed));
            return 0;
        }
        if (*fit) return cmd_fit(fit_args);
        if (*sweep) return cmd_sweep(sweep_args, jobs, sweep_csv_path, timing);
        if (*dec) {
            const MatrixXd m = io::read_matrix_market(dec_input);
            SolverOptions<double> opts;
            opts.max_iter = 20000;
            opts.tol_primal = opts.tol_dual = 1e-10;
            apply_solver(dec_solver, opts);
            const auto nd = composite_norm(m, dec_gamma, opts);
            nlohmann::json j{{"gamma", dec_gamma},
                             {"p", m.rows()},
                             {"value", nd.value},
                             {"residual", nd.residual},
                             {"iterations", nd.iterations},
                             {"converged", nd.converged},
                             {"not_pd_warning", nd.not_pd_warning},
                             {"S", report::sparse_triplets(nd.S)},
                             {"L", report::eigenpairs(nd.L, dec_rank_tol)}};
            emit(dec_output, j.dump(2) + "\n");
            return nd.converged ? 0 : 2;
        }
        if (*diag) {
            const auto loaded = load(diag_in);
            const auto doc = io::read_json(diag_decomp);
            const auto d = report::decomposition_from_json(doc);
            if (d.p() != loaded.sigma.p()) throw ArgumentError("decomposition and covariance dimensions differ");
            const double lambda = diag_lambda ? *diag_lambda : doc.value("lambda", 0.0);
            const double gamma = diag_gamma ? *diag_gamma : doc.value("gamma", 1.0);
            const RegularizationParams<double> reg{lambda, gamma};
            reg.validate();
            const Feasibility f = check_feasibility(d);
            const auto obj = objective_value(d, loaded.sigma, reg);
            nlohmann::json j{{"lambda", lambda},
                             {"gamma", gamma},
                             {"p", d.p()},
                             {"feasibility", to_string(f)},
                             {"objective", obj.finite() ? nlohmann::json(obj.value) : nlohmann::json(nullptr)},
                             {"rank", numerical_rank(d.L, diag_rank_tol)}};
            if (f == Feasibility::feasible && lambda > 0) {
                j["kkt"] = report::kkt_to_json(kkt_report(loaded.sigma, d, reg));
            } else {
                j["kkt"] = nullptr;
            }
            if (loaded.model) {
                const double zt = diag_zero_tol ? *diag_zero_tol : default_zero_tol(loaded.model->S_star);
                j["metrics"] = report::metrics_to_json(recovery_metrics(d, *loaded.model, zt, diag_rank_tol));
                const auto sl = signal_levels(*loaded.model);
                j["signal_levels"] = {{"theta", std::isfinite(sl.theta) ? nlohmann::json(sl.theta) : nlohmann::json("inf")},
                                      {"sigma_min", sl.sigma_min},
                                      {"notes", sl.notes}};
                const auto ir = identifiability_report(*loaded.model);
                j["identifiability"] = {{"coherence", ir.coherence},
                                        {"subspace_dim", ir.subspace_dim},
                                        {"max_degree", ir.max_degree},
                                        {"notes", ir.notes}};
            }
            emit(diag_output, j.dump(2) + "\n");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
