#include "lvggm/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "lvggm/gaussian.hpp"

namespace lvggm::io {

namespace {

std::string location(const std::string& path, std::size_t line, std::size_t column)
{
    std::ostringstream os;
    os << path;
    if (line > 0) os << ":" << line;
    if (column > 0) os << ":" << column;
    return os.str();
}

std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, 0, "cannot open file");
    return in;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view token, const std::string& path, std::size_t line, std::size_t column)
{
    const std::string_view t = trim(token);
    if (t.empty()) throw ParseError(path, line, column, "empty field");
    // strtod accepts the full decimal/exponent grammar including "inf"/"nan";
    // non-finite values are rejected below.
    const std::string buf(t);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) throw ParseError(path, line, column, "not a number: '" + buf + "'");
    if (!std::isfinite(v)) throw ParseError(path, line, column, "non-finite value: '" + buf + "'");
    return v;
}

long parse_index(std::string_view token, const std::string& path, std::size_t line, std::size_t column)
{
    const std::string_view t = trim(token);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError(path, line, column, "not an integer: '" + std::string(t) + "'");
    }
    return v;
}

std::vector<std::string_view> split_whitespace(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < s.size() && !(s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ParseError::ParseError(const std::string& path, std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error(location(path, line, column) + ": " + what), line_(line), column_(column)
{
}

Format parse_format(const std::string& name)
{
    if (name == "csv-samples") return Format::csv_samples;
    if (name == "mtx-covariance") return Format::mtx_covariance;
    if (name == "model-json") return Format::model_json;
    throw ArgumentError("unknown input format '" + name + "' (expected csv-samples, mtx-covariance or model-json)");
}

const char* to_string(Format f)
{
    switch (f) {
        case Format::csv_samples: return "csv-samples";
        case Format::mtx_covariance: return "mtx-covariance";
        case Format::model_json: return "model-json";
    }
    return "unknown";
}

MatrixXd read_csv_samples(const std::string& path, bool skip_header)
{
    auto in = open_input(path);
    std::vector<double> values;
    std::size_t cols = 0, rows = 0, lineno = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_header && lineno == 1) continue;
        if (trim(line).empty()) continue;
        std::size_t count = 0, start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view field =
                std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            values.push_back(parse_double(field, path, lineno, start + 1));
            ++count;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (rows == 0) cols = count;
        if (count != cols) {
            throw ParseError(path, lineno, 0,
                             "expected " + std::to_string(cols) + " fields, found " + std::to_string(count));
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(path, lineno, 0, "no observations");
    MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out(Eigen::Index(i), Eigen::Index(j)) = values[i * cols + j];
    }
    return out;
}

void write_csv_samples(const std::string& path, const MatrixXd& samples)
{
    std::ostringstream os;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < samples.cols(); ++j) {
            if (j > 0) os << ',';
            os << format_double(samples(i, j));
        }
        os << '\n';
    }
    write_text(path, os.str());
}

MatrixXd read_matrix_market(const std::string& path)
{
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(path, 1, 0, "empty file");
    ++lineno;
    const auto banner = split_whitespace(line);
    auto lower = [](std::string_view s) {
        std::string out(s);
        for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    if (banner.size() != 5 || banner[0] != "%%MatrixMarket" || lower(banner[1]) != "matrix") {
        throw ParseError(path, 1, 1, "missing '%%MatrixMarket matrix' banner");
    }
    if (lower(banner[2]) != "coordinate") throw ParseError(path, 1, 0, "only coordinate format is supported");
    const std::string field = lower(banner[3]), symmetry = lower(banner[4]);
    if (field != "real" && field != "double" && field != "integer") {
        throw ParseError(path, 1, 0, "unsupported field type '" + field + "'");
    }
    if (symmetry != "symmetric" && symmetry != "general") {
        throw ParseError(path, 1, 0, "unsupported symmetry '" + symmetry + "'");
    }
    const bool symmetric = symmetry == "symmetric";

    long rows = -1, cols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '%') continue;
        const auto tok = split_whitespace(t);
        if (tok.size() != 3) throw ParseError(path, lineno, 0, "expected 'rows cols entries'");
        rows = parse_index(tok[0], path, lineno, 1);
        cols = parse_index(tok[1], path, lineno, 2);
        nnz = parse_index(tok[2], path, lineno, 3);
        break;
    }
    if (rows < 1 || cols < 1 || nnz < 0) throw ParseError(path, lineno, 0, "missing or invalid size line");
    if (rows != cols) throw ParseError(path, lineno, 0, "covariance must be square");

    MatrixXd m = MatrixXd::Zero(rows, cols);
    long seen = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '%') continue;
        const auto tok = split_whitespace(t);
        if (tok.size() != 3) throw ParseError(path, lineno, 0, "expected 'row col value'");
        const long i = parse_index(tok[0], path, lineno, 1), j = parse_index(tok[1], path, lineno, 2);
        if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError(path, lineno, 0, "index out of range");
        const double v = parse_double(tok[2], path, lineno, 3);
        m(i - 1, j - 1) = v;
        if (symmetric) {
            if (j > i) throw ParseError(path, lineno, 0, "symmetric files store the lower triangle only");
            m(j - 1, i - 1) = v;
        }
        ++seen;
    }
    if (seen != nnz) {
        throw ParseError(path, lineno, 0,
                         "expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
    }
    return m;
}

void write_matrix_market(const std::string& path, const MatrixXd& m)
{
    std::ostringstream os;
    std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> entries;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = j; i < m.rows(); ++i) {
            if (m(i, j) != 0.0) entries.emplace_back(i, j, m(i, j));
        }
    }
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << m.rows() << ' ' << m.cols() << ' ' << entries.size() << '\n';
    for (const auto& [i, j, v] : entries) os << i + 1 << ' ' << j + 1 << ' ' << format_double(v) << '\n';
    write_text(path, os.str());
}

nlohmann::json model_to_json(const SyntheticModel<double>& model)
{
    nlohmann::json doc;
    doc["kind"] = "latent_gaussian_model";
    doc["p"] = model.params.p;
    doc["h"] = model.params.h;
    doc["seed"] = model.params.seed;
    doc["rng"] = model.rng;
    doc["parameters"] = {
        {"max_degree", model.params.max_degree},
        {"latent_fanout", model.params.latent_fanout},
        {"edge_strength", model.params.edge_strength},
        {"latent_strength", model.params.latent_strength},
    };
    auto edges = nlohmann::json::array();
    for (const auto& [i, j] : model.graph) edges.push_back({i, j});
    doc["edges"] = std::move(edges);
    const Eigen::Index total = model.K_joint.rows();
    std::vector<double> dense;
    dense.reserve(static_cast<std::size_t>(total * total));
    for (Eigen::Index i = 0; i < total; ++i) {
        for (Eigen::Index j = 0; j < total; ++j) dense.push_back(model.K_joint(i, j));
    }
    doc["K_joint"] = {{"rows", total}, {"cols", total}, {"row_major", std::move(dense)}};
    return doc;
}

SyntheticModel<double> model_from_json(const nlohmann::json& doc)
{
    try {
        GeneratorParams params;
        params.p = doc.at("p").get<Eigen::Index>();
        params.h = doc.at("h").get<Eigen::Index>();
        params.seed = doc.at("seed").get<std::uint64_t>();
        const auto& prm = doc.at("parameters");
        params.max_degree = prm.at("max_degree").get<Eigen::Index>();
        params.latent_fanout = prm.at("latent_fanout").get<double>();
        params.edge_strength = prm.at("edge_strength").get<double>();
        params.latent_strength = prm.at("latent_strength").get<double>();
        if (params.p < 1 || params.h < 0) throw ArgumentError("model has invalid p/h");

        const auto& kj = doc.at("K_joint");
        const auto total = kj.at("rows").get<Eigen::Index>();
        if (total != params.p + params.h || kj.at("cols").get<Eigen::Index>() != total) {
            throw ArgumentError("K_joint dimensions do not match p + h");
        }
        const auto dense = kj.at("row_major").get<std::vector<double>>();
        if (dense.size() != static_cast<std::size_t>(total * total)) throw ArgumentError("K_joint has wrong length");
        MatrixXd K(total, total);
        for (Eigen::Index i = 0; i < total; ++i) {
            for (Eigen::Index j = 0; j < total; ++j) K(i, j) = dense[static_cast<std::size_t>(i * total + j)];
        }
        if (relative_asymmetry(K) != 0.0) throw ArgumentError("K_joint is not symmetric");
        if (min_eigenvalue(K) < 0.1) throw DomainError("K_joint violates the eigenvalue margin 0.1");

        std::vector<Edge> graph;
        for (const auto& e : doc.at("edges")) {
            const auto i = e.at(0).get<Eigen::Index>(), j = e.at(1).get<Eigen::Index>();
            if (i < 0 || j < 0 || i >= params.p || j >= params.p || i >= j) {
                throw ArgumentError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") is invalid");
            }
            graph.emplace_back(i, j);
        }
        auto model = SyntheticModel<double>::from_joint(params, K, std::move(graph));
        if (doc.contains("rng")) model.rng = doc.at("rng").get<std::string>();

        // The stored graph must be exactly the off-diagonal support of S*.
        std::vector<Edge> support;
        for (Eigen::Index i = 0; i < params.p; ++i) {
            for (Eigen::Index j = i + 1; j < params.p; ++j) {
                if (model.S_star(i, j) != 0.0) support.emplace_back(i, j);
            }
        }
        if (support != model.graph) throw ArgumentError("edge list does not match the support of K_joint");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed model document: ") + e.what());
    }
}

nlohmann::json read_json(const std::string& path)
{
    auto in = open_input(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        // nlohmann reports a byte offset; recover line/column from the text.
        std::ifstream again(path);
        std::size_t line = 1, col = 1, pos = 0;
        char c;
        while (pos + 1 < e.byte && again.get(c)) {
            ++pos;
            if (c == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(path, line, col, e.what());
    }
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

LoadedInput read_input(const std::string& path, Format format, const ReadOptions& opts)
{
    LoadedInput out;
    switch (format) {
        case Format::csv_samples: {
            const MatrixXd X = read_csv_samples(path, opts.skip_header);
            out.sigma = sample_covariance(X, opts.center ? Centering::subtract_mean : Centering::zero_mean);
            break;
        }
        case Format::mtx_covariance: {
            const MatrixXd m = read_matrix_market(path);
            const double asym = relative_asymmetry(m);
            if (asym > SampleCovariance<double>::kAsymmetryWarning) {
                std::ostringstream os;
                os << "input matrix asymmetric (relative " << asym << "); symmetrized";
                out.warnings.push_back(os.str());
            }
            out.sigma = SampleCovariance<double>(m, opts.declared_n);
            break;
        }
        case Format::model_json: {
            auto model = model_from_json(read_json(path));
            if (opts.samples > 0) {
                out.sigma = sample_covariance(draw_samples(model, opts.samples, opts.seed),
                                              opts.center ? Centering::subtract_mean : Centering::zero_mean);
            } else {
                out.sigma = SampleCovariance<double>::population(model.cov_O);
            }
            out.model = std::move(model);
            break;
        }
    }
    return out;
}

}  // namespace lvggm::io
