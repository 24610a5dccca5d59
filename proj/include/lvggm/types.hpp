#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lvggm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Raised when a matrix argument lies outside the domain of an operation
/// (not PD, not PSD, singular where invertibility is required).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised for malformed arguments: dimension mismatches, bad index sets,
/// out-of-range parameters.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

template <typename... Args>
std::string concat(const Args&... args)
{
    std::ostringstream os;
    os.precision(17);
    (os << ... << args);
    return os.str();
}

}  // namespace detail

/// Largest relative asymmetry max|M - Mᵀ| / max(1, max|M|).
template <typename Derived>
typename Derived::Scalar relative_asymmetry(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return Scalar(0);
    const Scalar scale = std::max(Scalar(1), m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// (M + Mᵀ)/2.
template <typename Derived>
Matrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m)
{
    if (m.rows() != m.cols()) {
        throw ArgumentError(detail::concat("expected a square matrix, got ", m.rows(), "x", m.cols()));
    }
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out = m;
    return (out + out.transpose()) * Scalar(0.5);
}

/// Eigenvalues of a symmetric matrix in ascending order.
template <typename Derived>
Vector<typename Derived::Scalar> symmetric_eigenvalues(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return Vector<Scalar>();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m.eval(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return std::numeric_limits<Scalar>::infinity();
    return symmetric_eigenvalues(m)(0);
}

template <typename Derived>
typename Derived::Scalar max_eigenvalue(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return -std::numeric_limits<Scalar>::infinity();
    const auto ev = symmetric_eigenvalues(m);
    return ev(ev.size() - 1);
}

/// Entrywise ℓ1 norm over all p² entries.
template <typename Derived>
typename Derived::Scalar l1_norm(const Eigen::MatrixBase<Derived>& m)
{
    return m.cwiseAbs().sum();
}

/// Entrywise ℓ∞ norm.
template <typename Derived>
typename Derived::Scalar linf_norm(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    return m.size() == 0 ? Scalar(0) : m.cwiseAbs().maxCoeff();
}

/// Spectral norm (largest singular value); works for nonsymmetric input.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return Scalar(0);
    Eigen::JacobiSVD<Matrix<Scalar>> svd(m.eval());
    return svd.singularValues()(0);
}

/// Covariance estimate Σ_O^n together with its sample count.
///
/// Input is symmetrized on construction. A sample count of zero marks a
/// population (infinite-data) covariance.
template <typename Scalar = double>
class SampleCovariance {
public:
    static constexpr double kPsdTolerance = 1e-10;
    static constexpr double kAsymmetryWarning = 1e-8;

    SampleCovariance() = default;

    SampleCovariance(const Matrix<Scalar>& matrix, std::size_t n)
        : asymmetry_(relative_asymmetry(matrix)), matrix_(symmetrize(matrix)), n_(n)
    {
        if (matrix_.size() == 0) throw ArgumentError("covariance must be at least 1x1");
        if (!matrix_.allFinite()) throw DomainError("covariance has non-finite entries");
        const Scalar lo = min_eigenvalue(matrix_);
        const Scalar scale = std::max(Scalar(1), matrix_.cwiseAbs().maxCoeff());
        if (lo < -Scalar(kPsdTolerance) * scale) {
            throw DomainError(detail::concat("covariance is not PSD: smallest eigenvalue ", lo));
        }
    }

    static SampleCovariance population(const Matrix<Scalar>& matrix) { return SampleCovariance(matrix, 0); }

    const Matrix<Scalar>& matrix() const { return matrix_; }
    std::size_t n() const { return n_; }
    Eigen::Index p() const { return matrix_.rows(); }
    bool is_population() const { return n_ == 0; }

    /// Relative asymmetry of the matrix before symmetrization.
    Scalar input_asymmetry() const { return asymmetry_; }
    bool asymmetry_warning() const { return asymmetry_ > Scalar(kAsymmetryWarning); }

    /// Smallest eigenvalue relative to the largest, clamped below at zero.
    Scalar conditioning() const
    {
        const auto ev = symmetric_eigenvalues(matrix_);
        const Scalar hi = ev(ev.size() - 1);
        if (hi <= Scalar(0)) return Scalar(0);
        return std::max(Scalar(0), ev(0)) / hi;
    }

private:
    Scalar asymmetry_ = Scalar(0);
    Matrix<Scalar> matrix_;
    std::size_t n_ = 0;
};

/// Candidate split K = S - L of a precision matrix.
template <typename Scalar = double>
struct PrecisionDecomposition {
    Matrix<Scalar> S;
    Matrix<Scalar> L;

    Matrix<Scalar> precision() const { return S - L; }
    Eigen::Index p() const { return S.rows(); }
};

enum class Feasibility {
    feasible,
    dimension_mismatch,
    lowrank_not_psd,
    precision_not_pd,
};

inline const char* to_string(Feasibility f)
{
    switch (f) {
        case Feasibility::feasible: return "feasible";
        case Feasibility::dimension_mismatch: return "dimension_mismatch";
        case Feasibility::lowrank_not_psd: return "lowrank_not_psd";
        case Feasibility::precision_not_pd: return "precision_not_pd";
    }
    return "unknown";
}

/// Checks L ⪰ -tol·I and S - L ≻ 0.
template <typename Scalar>
Feasibility check_feasibility(const PrecisionDecomposition<Scalar>& d, Scalar psd_tol = Scalar(1e-8))
{
    if (d.S.rows() != d.S.cols() || d.L.rows() != d.L.cols() || d.S.rows() != d.L.rows()) {
        return Feasibility::dimension_mismatch;
    }
    if (d.L.size() > 0 && min_eigenvalue(d.L) < -psd_tol) return Feasibility::lowrank_not_psd;
    if (d.S.size() > 0 && !(min_eigenvalue(d.precision()) > Scalar(0))) return Feasibility::precision_not_pd;
    return Feasibility::feasible;
}

/// Overall strength λ and sparse/low-rank trade-off γ.
template <typename Scalar = double>
struct RegularizationParams {
    Scalar lambda = Scalar(0);
    Scalar gamma = Scalar(1);

    void validate() const
    {
        if (!(lambda >= Scalar(0)) || !std::isfinite(double(lambda))) {
            throw ArgumentError(detail::concat("lambda must be >= 0, got ", lambda));
        }
        if (!(gamma > Scalar(0)) || !std::isfinite(double(gamma))) {
            throw ArgumentError(detail::concat("gamma must be > 0, got ", gamma));
        }
    }
};

}  // namespace lvggm
