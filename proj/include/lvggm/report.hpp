#pragma once

#include <json.hpp>

#include "lvggm/diagnostics.hpp"
#include "lvggm/solver.hpp"
#include "lvggm/types.hpp"

namespace lvggm::report {

/// Upper-triangle nonzeros (diagonal included) as [[i, j, value], ...], 0-based.
nlohmann::json sparse_triplets(const MatrixXd& S);
/// Inverse of sparse_triplets for a p×p matrix.
MatrixXd from_triplets(const nlohmann::json& triplets, Eigen::Index p);

/// Eigenpairs of L with eigenvalue > rank_tol·max(λ_max, 1e-12), largest first.
nlohmann::json eigenpairs(const MatrixXd& L, double rank_tol);
/// Σ λ v vᵀ over the stored eigenpairs.
MatrixXd from_eigenpairs(const nlohmann::json& pairs, Eigen::Index p);

nlohmann::json kkt_to_json(const KktReport<double>& kkt);
nlohmann::json metrics_to_json(const RecoveryMetrics<double>& m);

/// Rebuilds (S, L) from a fit report document ("p", "S", "L" keys) and checks
/// the decomposition invariants.
PrecisionDecomposition<double> decomposition_from_json(const nlohmann::json& doc);

/// Number formatting shared by the CSV writers: %.17g, "inf"/"nan" spelled out.
std::string format_number(double v);

}  // namespace lvggm::report
