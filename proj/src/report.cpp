#include "lvggm/report.hpp"

#include <cmath>
#include <cstdio>

namespace lvggm::report {

nlohmann::json sparse_triplets(const MatrixXd& S)
{
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        for (Eigen::Index j = i; j < S.cols(); ++j) {
            if (S(i, j) != 0.0) out.push_back({i, j, S(i, j)});
        }
    }
    return out;
}

MatrixXd from_triplets(const nlohmann::json& triplets, Eigen::Index p)
{
    MatrixXd S = MatrixXd::Zero(p, p);
    for (const auto& t : triplets) {
        const auto i = t.at(0).get<Eigen::Index>(), j = t.at(1).get<Eigen::Index>();
        if (i < 0 || j < i || j >= p) {
            throw ArgumentError(detail::concat("triplet (", i, ", ", j, ") is not in the upper triangle of a ", p, "x",
                                               p, " matrix"));
        }
        S(i, j) = S(j, i) = t.at(2).get<double>();
    }
    return S;
}

nlohmann::json eigenpairs(const MatrixXd& L, double rank_tol)
{
    auto out = nlohmann::json::array();
    if (L.size() == 0) return out;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(L));
    const auto& ev = es.eigenvalues();
    const double cut = rank_tol * std::max(ev(ev.size() - 1), 1e-12);
    for (Eigen::Index k = ev.size() - 1; k >= 0; --k) {
        if (!(ev(k) > cut)) break;
        VectorXd v = es.eigenvectors().col(k);
        Eigen::Index lead = 0;
        v.cwiseAbs().maxCoeff(&lead);
        if (v(lead) < 0) v = -v;
        out.push_back({{"eigenvalue", ev(k)}, {"eigenvector", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    return out;
}

MatrixXd from_eigenpairs(const nlohmann::json& pairs, Eigen::Index p)
{
    MatrixXd L = MatrixXd::Zero(p, p);
    for (const auto& e : pairs) {
        const double value = e.at("eigenvalue").get<double>();
        const auto vec = e.at("eigenvector").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(vec.size()) != p) {
            throw ArgumentError(detail::concat("eigenvector of length ", vec.size(), ", expected ", p));
        }
        if (!(value >= 0.0)) throw ArgumentError(detail::concat("negative eigenvalue ", value, " in L"));
        const Eigen::Map<const VectorXd> v(vec.data(), p);
        L.noalias() += value * v * v.transpose();
    }
    return symmetrize(L);
}

nlohmann::json kkt_to_json(const KktReport<double>& kkt)
{
    return {{"dual_linf", kkt.dual_linf},
            {"support_slack", kkt.support_slack},
            {"dual_spec", kkt.dual_spec},
            {"lowrank_slack", kkt.lowrank_slack},
            {"max", kkt.max()}};
}

nlohmann::json metrics_to_json(const RecoveryMetrics<double>& m)
{
    return {{"sign_consistent", m.sign_consistent},
            {"false_positives", m.false_positives},
            {"false_negatives", m.false_negatives},
            {"sign_errors", m.sign_errors},
            {"rank_correct", m.rank_correct},
            {"rank_est", m.rank_est},
            {"rank_true", m.rank_true},
            {"loss_linf", m.loss_linf},
            {"loss_spectral", m.loss_spectral},
            {"loss_frob_total", m.loss_frob_total}};
}

PrecisionDecomposition<double> decomposition_from_json(const nlohmann::json& doc)
{
    try {
        const auto p = doc.at("p").get<Eigen::Index>();
        if (p < 1) throw ArgumentError("decomposition needs p >= 1");
        PrecisionDecomposition<double> d{from_triplets(doc.at("S"), p), from_eigenpairs(doc.at("L"), p)};
        if (min_eigenvalue(d.L) < -1e-8) throw DomainError("L is not positive semidefinite");
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed decomposition document: ") + e.what());
    }
}

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace lvggm::report
