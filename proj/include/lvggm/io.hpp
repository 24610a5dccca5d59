#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lvggm/synth.hpp"
#include "lvggm/types.hpp"

namespace lvggm::io {

/// Malformed input file. `line` and `column` are 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, std::size_t column, const std::string& what);

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

enum class Format { csv_samples, mtx_covariance, model_json };

Format parse_format(const std::string& name);
const char* to_string(Format f);

/// Rows are observations, comma-separated. `skip_header` drops the first line.
MatrixXd read_csv_samples(const std::string& path, bool skip_header = false);
void write_csv_samples(const std::string& path, const MatrixXd& samples);

/// MatrixMarket coordinate real (symmetric or general) as a dense matrix.
MatrixXd read_matrix_market(const std::string& path);
/// Writes the lower triangle as `coordinate real symmetric`.
void write_matrix_market(const std::string& path, const MatrixXd& m);

nlohmann::json model_to_json(const SyntheticModel<double>& model);
/// Rebuilds the model and re-checks symmetry, the eigenvalue margin and the
/// graph against the support of S*.
SyntheticModel<double> model_from_json(const nlohmann::json& doc);

nlohmann::json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

struct LoadedInput {
    SampleCovariance<double> sigma;
    std::optional<SyntheticModel<double>> model;
    std::vector<std::string> warnings;
};

struct ReadOptions {
    bool skip_header = false;
    bool center = false;
    /// For model-json input: draw this many samples; 0 uses the population covariance.
    Eigen::Index samples = 0;
    std::uint64_t seed = 0;
    /// Sample count attached to an mtx-covariance input; 0 marks it as population.
    std::size_t declared_n = 0;
};

/// csv-samples → sample covariance; mtx-covariance → validated PSD matrix;
/// model-json → model plus its population (or sampled) covariance.
LoadedInput read_input(const std::string& path, Format format, const ReadOptions& opts = {});

}  // namespace lvggm::io
